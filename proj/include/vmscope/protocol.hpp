#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vmscope/lesion_mask.hpp"
#include "vmscope/pipeline.hpp"
#include "vmscope/slide_sim.hpp"

namespace vmscope {

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
/// Throws ProtocolError on characters outside the alphabet.
std::vector<std::uint8_t> base64_decode(const std::string& text);

/// Row-major runs over lesion / not-lesion, first run is background (may be
/// 0), comma separated. Runs sum to width*height.
std::string encode_mask_rle(const LesionMask& mask);
/// Decodes into a 0/1 mask. ProtocolError when the runs don't sum to w*h.
LesionMask decode_mask_rle(const std::string& rle, int width, int height);

struct ProtocolOptions {
  /// Slides live at <dir>/<id>/slide.png (+ mask.png) or <dir>/<id>.png.
  std::optional<std::filesystem::path> slide_dir;
  std::filesystem::path export_dir = "vmscope_exports";
};

/// Message dispatcher for the streaming API. Transport agnostic: one JSON
/// object in, one JSON object out. Thread safe; sessions step independently
/// and each session processes one frame at a time.
class ProtocolHandler {
 public:
  explicit ProtocolHandler(ProtocolOptions options = {});

  nlohmann::json handle(const nlohmann::json& message);
  std::string handle_text(const std::string& text);

  std::size_t session_count() const;

 private:
  struct Entry {
    std::mutex mutex;
    std::unique_ptr<Session> session;
    bool closed = false;
  };

  nlohmann::json create_session(const nlohmann::json& message);
  nlohmann::json frame(const nlohmann::json& message);
  nlohmann::json close_session(const nlohmann::json& message);
  std::shared_ptr<Entry> find(const std::string& id) const;
  VirtualSlide load_slide_by_id(const std::string& id) const;

  ProtocolOptions options_;
  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t next_id_ = 1;
};

nlohmann::json error_message(ErrorCode code, const std::string& message);

}  // namespace vmscope
