#include "vmscope/protocol.hpp"

#include <charconv>

#include <boost/beast/core/detail/base64.hpp>

#include "vmscope/png_io.hpp"

namespace vmscope {

namespace b64 = boost::beast::detail::base64;
using nlohmann::json;

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(b64::encoded_size(bytes.size()), '\0');
  out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  std::vector<std::uint8_t> out(b64::decoded_size(text.size()));
  const auto [written, read] = b64::decode(out.data(), text.data(), text.size());
  // decode stops at the first character it doesn't know; '=' padding is fine
  if (read != text.size() && text.find_first_not_of('=', read) != std::string::npos) {
    throw Error(ErrorCode::ProtocolError, "invalid base64 payload");
  }
  out.resize(written);
  return out;
}

std::string encode_mask_rle(const LesionMask& mask) {
  std::string out;
  bool lesion = false;
  long long run = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.is_lesion(x, y) != lesion) {
        out += std::to_string(run);
        out += ',';
        lesion = !lesion;
        run = 0;
      }
      ++run;
    }
  }
  out += std::to_string(run);
  return out;
}

LesionMask decode_mask_rle(const std::string& rle, int width, int height) {
  LesionMask mask(width, height);
  const long long total = static_cast<long long>(width) * height;
  long long pos = 0;
  bool lesion = false;
  const char* p = rle.data();
  const char* end = p + rle.size();
  while (true) {
    long long run = 0;
    const auto [next, ec] = std::from_chars(p, end, run);
    if (ec != std::errc() || run < 0) throw Error(ErrorCode::ProtocolError, "bad mask_rle token");
    if (pos + run > total) throw Error(ErrorCode::ProtocolError, "mask_rle runs exceed width*height");
    if (lesion) {
      for (long long i = pos; i < pos + run; ++i) mask(static_cast<int>(i % width), static_cast<int>(i / width)) = kHydrops;
    }
    pos += run;
    lesion = !lesion;
    p = next;
    if (p == end) break;
    if (*p != ',') throw Error(ErrorCode::ProtocolError, "mask_rle separator must be ','");
    ++p;
  }
  if (pos != total) throw Error(ErrorCode::ProtocolError, "mask_rle runs do not cover width*height");
  return mask;
}

json error_message(ErrorCode code, const std::string& message) {
  return {{"type", "error"}, {"code", std::string(to_string(code))}, {"message", message}};
}

ProtocolHandler::ProtocolHandler(ProtocolOptions options) : options_(std::move(options)) {}

std::size_t ProtocolHandler::session_count() const {
  std::lock_guard lock(sessions_mutex_);
  return sessions_.size();
}

std::string ProtocolHandler::handle_text(const std::string& text) {
  json message;
  try {
    message = json::parse(text);
  } catch (const json::exception& e) {
    return error_message(ErrorCode::ProtocolError, std::string("unparseable message: ") + e.what()).dump();
  }
  return handle(message).dump();
}

json ProtocolHandler::handle(const json& message) {
  try {
    if (!message.is_object() || !message.contains("type") || !message["type"].is_string()) {
      throw Error(ErrorCode::ProtocolError, "message needs a string 'type'");
    }
    const std::string type = message["type"];
    if (type == "create_session") return create_session(message);
    if (type == "frame") return frame(message);
    if (type == "close_session") return close_session(message);
    throw Error(ErrorCode::ProtocolError, "unknown message type '" + type + "'");
  } catch (const Error& e) {
    json reply = error_message(e.code(), e.what());
    if (message.is_object()) {
      if (message.contains("session_id")) reply["session_id"] = message["session_id"];
      if (message.contains("index")) reply["index"] = message["index"];
    }
    return reply;
  } catch (const json::exception& e) {
    return error_message(ErrorCode::ProtocolError, e.what());
  }
}

VirtualSlide ProtocolHandler::load_slide_by_id(const std::string& id) const {
  if (!options_.slide_dir) throw Error(ErrorCode::InvalidArgument, "server has no slide directory");
  if (id.empty() || id.find('/') != std::string::npos || id.find("..") != std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "bad slide id '" + id + "'");
  }
  const auto dir = *options_.slide_dir / id;
  if (std::filesystem::is_regular_file(dir / "slide.png")) {
    std::optional<std::filesystem::path> mask;
    if (std::filesystem::is_regular_file(dir / "mask.png")) mask = dir / "mask.png";
    return load_slide(dir / "slide.png", mask, id);
  }
  const auto flat = *options_.slide_dir / (id + ".png");
  if (std::filesystem::is_regular_file(flat)) return load_slide(flat, std::nullopt, id);
  throw Error(ErrorCode::InvalidArgument, "unknown slide id '" + id + "'");
}

json ProtocolHandler::create_session(const json& message) {
  const SessionConfig cfg = parse_session_config(message.value("config", json::object()));
  std::shared_ptr<const LesionMask> mask;
  if (cfg.slide_id) {
    VirtualSlide slide = load_slide_by_id(*cfg.slide_id);
    if (slide.gt_mask) mask = std::make_shared<const LesionMask>(std::move(*slide.gt_mask));
  }
  auto backend = make_backend(cfg, mask);

  auto entry = std::make_shared<Entry>();
  std::string id;
  {
    std::lock_guard lock(sessions_mutex_);
    id = "s" + std::to_string(next_id_++);
    entry->session = std::make_unique<Session>(id, cfg, std::move(backend));
    sessions_[id] = entry;
  }
  return {{"type", "session_created"}, {"session_id", id}};
}

std::shared_ptr<ProtocolHandler::Entry> ProtocolHandler::find(const std::string& id) const {
  std::lock_guard lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::ProtocolError, "unknown session '" + id + "'");
  return it->second;
}

json ProtocolHandler::frame(const json& message) {
  const auto entry = find(message.at("session_id").get<std::string>());
  const int index = message.at("index").get<int>();
  const Raster image = decode_png(base64_decode(message.at("png").get<std::string>()));

  std::lock_guard lock(entry->mutex);
  if (entry->closed) throw Error(ErrorCode::ProtocolError, "session is closed");
  Session& session = *entry->session;
  if (index != session.frames_processed()) {
    throw Error(ErrorCode::ProtocolError,
                "expected frame index " + std::to_string(session.frames_processed()) + ", got " + std::to_string(index));
  }
  const PipelineOutputs out = session.step(image);
  return {{"type", "frame_result"},
          {"index", out.index},
          {"status", out.status == RegistrationStatus::Ok ? "ok" : "degraded"},
          {"placement", {{"x", out.placement.x}, {"y", out.placement.y}, {"w", out.placement.width}, {"h", out.placement.height}}},
          {"overlay_png", base64_encode(encode_png(out.labeled_view))},
          {"mask_rle", encode_mask_rle(out.mask)},
          {"mosaic_png", base64_encode(encode_png(out.mosaic_view))},
          {"lesion_map_png", base64_encode(encode_png(out.lesion_map_view))},
          {"timings_ms",
           {{"register", out.timings.register_ms},
            {"extend", out.timings.extend_ms},
            {"segment", out.timings.segment_ms},
            {"compose", out.timings.compose_ms}}}};
}

json ProtocolHandler::close_session(const json& message) {
  const std::string id = message.at("session_id").get<std::string>();
  const auto entry = find(id);
  std::filesystem::path dir = options_.export_dir / id;
  {
    std::lock_guard lock(entry->mutex);
    if (entry->closed) throw Error(ErrorCode::ProtocolError, "session is closed");
    try {
      entry->session->export_canvases(dir);
    } catch (const std::filesystem::filesystem_error& e) {
      throw Error(ErrorCode::IoError, e.what());
    }
    entry->closed = true;
  }
  {
    std::lock_guard lock(sessions_mutex_);
    sessions_.erase(id);
  }
  return {{"type", "session_closed"},
          {"session_id", id},
          {"exports", {{"mosaic_path", (dir / "mosaic.png").string()}, {"lesion_map_path", (dir / "lesion_map.png").string()}}}};
}

}  // namespace vmscope
