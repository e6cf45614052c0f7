#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vmscope/image.hpp"
#include "vmscope/lesion_mask.hpp"

namespace vmscope {

/// Decodes any PNG to 1 channel (gray inputs) or 3 channels (everything else;
/// alpha is composited away).
Raster read_png(const std::filesystem::path& path);
Raster decode_png(const std::vector<std::uint8_t>& bytes);

void write_png(const std::filesystem::path& path, const Raster& image);
std::vector<std::uint8_t> encode_png(const Raster& image);

/// Ground-truth masks: gray PNG whose values are labels {0,1,2,3}. A mask
/// stored as 0/255 is accepted too (255 -> hydrops).
LesionMask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const LesionMask& mask);

}  // namespace vmscope
