#include "vmscope/png_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>

namespace vmscope {

namespace {

Raster decode_with(png_image& img) {
  const bool gray = (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Raster out(static_cast<int>(img.width), static_cast<int>(img.height), gray ? 1 : 3);
  // Black background for alpha composition.
  png_color background{0, 0, 0};
  if (png_image_finish_read(&img, &background, out.data(), 0, nullptr) == 0) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw Error(ErrorCode::IoError, "png decode failed: " + msg);
  }
  return out;
}

void append_bytes(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void raise_png_error(png_structp, png_const_charp message) { throw Error(ErrorCode::IoError, std::string("png encode failed: ") + message); }

void ignore_png_warning(png_structp, png_const_charp) {}

}  // namespace

Raster read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_png(bytes);
}

Raster decode_png(const std::vector<std::uint8_t>& bytes) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()) == 0) {
    throw Error(ErrorCode::IoError, std::string("not a PNG: ") + img.message);
  }
  return decode_with(img);
}

// The simplified write API always runs zlib at its default level, which costs
// ~170 ms on a 640x480 frame; the live views need speed over size.
std::vector<std::uint8_t> encode_png(const Raster& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw Error(ErrorCode::UnsupportedChannels, "png export supports 1 or 3 channels");
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, raise_png_error, ignore_png_warning);
  if (png == nullptr) throw Error(ErrorCode::IoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> bytes;
  try {
    if (info == nullptr) throw Error(ErrorCode::IoError, "png_create_info_struct failed");
    png_set_write_fn(png, &bytes, append_bytes, nullptr);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()), 8,
                 image.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 1);
    png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(image.width()) * static_cast<std::size_t>(image.channels());
    for (int y = 0; y < image.height(); ++y) {
      png_write_row(png, const_cast<png_bytep>(image.data() + stride * static_cast<std::size_t>(y)));
    }
    png_write_end(png, info);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return bytes;
}

void write_png(const std::filesystem::path& path, const Raster& image) {
  const auto bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

LesionMask read_mask_png(const std::filesystem::path& path) {
  const Raster raw = to_luminance(read_png(path));
  if ((raw.samples() > kVillus).any()) return mask_from_binary(raw);
  return mask_from_labels(raw);
}

void write_mask_png(const std::filesystem::path& path, const LesionMask& mask) {
  write_png(path, Raster(Plane<std::uint8_t>(mask.labels())));
}

}  // namespace vmscope
