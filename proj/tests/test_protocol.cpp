#include <doctest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <filesystem>
#include <random>
#include <thread>

#include "support.hpp"
#include "vmscope/png_io.hpp"
#include "vmscope/protocol.hpp"
#include "vmscope/server.hpp"

using namespace vmscope;
using nlohmann::json;

namespace {

std::vector<std::uint8_t> bytes(const std::string& s) { return {s.begin(), s.end()}; }

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("vmscope_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

VirtualSlide small_slide() {
  SynthSlideParams p;
  p.width = 500;
  p.height = 400;
  p.blobs = 15;
  p.min_radius = 8;
  p.max_radius = 20;
  p.seed = 12;
  return synthesize_slide(p);
}

json frame_message(const std::string& sid, int index, const Raster& img) {
  return {{"type", "frame"}, {"session_id", sid}, {"index", index}, {"png", base64_encode(encode_png(img))}};
}

}  // namespace

TEST_CASE("base64 vectors") {
  CHECK(base64_encode({}) == "");
  CHECK(base64_encode(bytes("f")) == "Zg==");
  CHECK(base64_encode(bytes("fo")) == "Zm8=");
  CHECK(base64_encode(bytes("foo")) == "Zm9v");
  CHECK(base64_encode(bytes("foobar")) == "Zm9vYmFy");
  CHECK(base64_decode("Zm9vYg==") == bytes("foob"));
  CHECK(base64_decode("") == bytes(""));
  CHECK_THROWS_AS(base64_decode("Zm9v!"), Error);

  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::uint8_t> b(rng() % 50);
    for (auto& v : b) v = static_cast<std::uint8_t>(rng());
    CHECK(base64_decode(base64_encode(b)) == b);
  }
}

TEST_CASE("mask RLE golden vectors") {
  LesionMask diag(2, 2);
  diag(0, 0) = diag(1, 1) = kHydrops;
  CHECK(encode_mask_rle(diag) == "0,1,2,1");
  CHECK(encode_mask_rle(LesionMask(3, 1)) == "3");
  CHECK(encode_mask_rle(LesionMask(2, 1, kHydrops)) == "0,2");
  LesionMask row(5, 2);
  row(2, 0) = row(3, 0) = row(0, 1) = kHydrops;
  CHECK(encode_mask_rle(row) == "2,2,1,1,4");

  CHECK(decode_mask_rle("0,1,2,1", 2, 2) == diag);
  CHECK_THROWS_AS(decode_mask_rle("1,1", 2, 2), Error);
  CHECK_THROWS_AS(decode_mask_rle("1,x,2", 2, 2), Error);
  CHECK_THROWS_AS(decode_mask_rle("2,2,1", 2, 2), Error);
}

TEST_CASE("mask RLE round trips random masks") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> dim(1, 40);
  std::uniform_real_distribution<double> dens(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const int w = dim(rng), h = dim(rng);
    const LesionMask m = testing::random_mask(w, h, dens(rng), rng);
    const std::string rle = encode_mask_rle(m);
    long long total = 0;
    std::stringstream ss(rle);
    for (std::string part; std::getline(ss, part, ',');) total += std::stoll(part);
    CHECK(total == static_cast<long long>(w) * h);
    CHECK(decode_mask_rle(rle, w, h) == m);
  }
}

TEST_CASE("protocol handler session flow") {
  const auto dir = scratch_dir("protocol");
  const VirtualSlide slide = small_slide();
  save_slide(slide, dir / "slides" / "demo");
  ProtocolOptions opts;
  opts.slide_dir = dir / "slides";
  opts.export_dir = dir / "exports";
  ProtocolHandler h(opts);

  const json created = h.handle({{"type", "create_session"},
                                 {"config", {{"edge_width", 40}, {"backend", "oracle"}, {"slide_id", "demo"}, {"slide_origin", {100, 100}}}}});
  REQUIRE(created["type"] == "session_created");
  const std::string sid = created["session_id"];
  CHECK(h.session_count() == 1);

  const Raster f0 = crop_region(slide.image, {100, 100, 160, 120});
  const Raster f1 = crop_region(slide.image, {125, 110, 160, 120});
  const json r0 = h.handle(frame_message(sid, 0, f0));
  REQUIRE(r0["type"] == "frame_result");
  CHECK(r0["status"] == "ok");
  CHECK(r0["placement"] == json{{"x", 0}, {"y", 0}, {"w", 160}, {"h", 120}});

  // out-of-order index is rejected and does not advance the session
  const json skipped = h.handle(frame_message(sid, 2, f1));
  CHECK(skipped["type"] == "error");
  CHECK(skipped["code"] == "ProtocolError");
  CHECK(skipped["index"] == 2);

  const json r1 = h.handle(frame_message(sid, 1, f1));
  CHECK(r1["index"] == 1);
  CHECK(r1["placement"] == json{{"x", 25}, {"y", 10}, {"w", 160}, {"h", 120}});
  CHECK(decode_mask_rle(r1["mask_rle"], 160, 120) == crop_mask(*slide.gt_mask, {125, 110, 160, 120}));
  const Raster overlay = decode_png(base64_decode(r1["overlay_png"]));
  CHECK(overlay.width() == 160);
  CHECK(overlay.channels() == 3);
  CHECK(decode_png(base64_decode(r1["mosaic_png"])).width() == 185);
  for (const char* k : {"register", "extend", "segment", "compose"}) CHECK(r1["timings_ms"][k].get<double>() >= 0.0);

  const json closed = h.handle({{"type", "close_session"}, {"session_id", sid}});
  REQUIRE(closed["type"] == "session_closed");
  const Raster mosaic = read_png(closed["exports"]["mosaic_path"].get<std::string>());
  CHECK(mosaic.width() == 185);
  CHECK(mosaic.height() == 130);
  CHECK(std::filesystem::exists(closed["exports"]["lesion_map_path"].get<std::string>()));
  CHECK(h.session_count() == 0);
  CHECK(h.handle({{"type", "close_session"}, {"session_id", sid}})["type"] == "error");

  std::filesystem::remove_all(dir);
}

TEST_CASE("protocol handler errors") {
  ProtocolHandler h;
  const json bad_json = json::parse(h.handle_text("{not json"));
  CHECK(bad_json["type"] == "error");
  CHECK(bad_json["code"] == "ProtocolError");
  CHECK(h.handle({{"type", "dance"}})["code"] == "ProtocolError");
  CHECK(h.handle(json::array())["code"] == "ProtocolError");
  CHECK(h.handle({{"type", "frame"}, {"session_id", "s99"}, {"index", 0}, {"png", ""}})["code"] == "ProtocolError");
  CHECK(h.handle({{"type", "create_session"}, {"config", {{"backend", "oracle"}}}})["code"] == "MissingGroundTruth");
  CHECK(h.handle({{"type", "create_session"}, {"config", {{"slide_id", "../etc"}}}})["type"] == "error");
  CHECK(h.handle({{"type", "create_session"}, {"config", {{"edge_width", -1}}}})["code"] == "InvalidArgument");

  const std::string sid = h.handle({{"type", "create_session"}, {"config", {{"edge_width", 10}}}})["session_id"];
  const json garbage = h.handle({{"type", "frame"}, {"session_id", sid}, {"index", 0}, {"png", base64_encode(bytes("nope"))}});
  CHECK(garbage["type"] == "error");
  CHECK(garbage["session_id"] == sid);
  CHECK(h.handle({{"type", "frame"}, {"session_id", sid}, {"index", 0}})["code"] == "ProtocolError");
  // the session is still at index 0
  const json ok = h.handle(frame_message(sid, 0, testing::random_texture(64, 48, 1)));
  CHECK(ok["type"] == "frame_result");
}

TEST_CASE("live websocket session processes a 30-frame path in order") {
  namespace beast = boost::beast;
  namespace websocket = beast::websocket;
  using tcp = boost::asio::ip::tcp;

  const auto dir = scratch_dir("ws");
  ProtocolOptions opts;
  opts.export_dir = dir;
  StreamingServer server(opts);
  const std::uint16_t port = server.start(0);
  REQUIRE(port != 0);

  const VirtualSlide slide = small_slide();
  PathOptions po;
  po.viewport_width = 160;
  po.viewport_height = 120;
  std::vector<Eigen::Vector2d> path;
  for (int i = 0; i < 30; ++i) path.emplace_back(120 + 7 * i, 110 + 3 * i);
  const auto frames = generate_path_frames(slide, path, po);

  boost::asio::io_context ioc;
  tcp::resolver resolver(ioc);
  websocket::stream<tcp::socket> ws(ioc);
  boost::asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
  ws.handshake("127.0.0.1", "/");
  auto roundtrip = [&](const json& msg) {
    ws.text(true);
    ws.write(boost::asio::buffer(msg.dump()));
    beast::flat_buffer buf;
    ws.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
  };

  const json created = roundtrip({{"type", "create_session"}, {"config", {{"edge_width", 30}, {"backend", "threshold"}}}});
  REQUIRE(created["type"] == "session_created");
  const std::string sid = created["session_id"];
  for (const auto& f : frames) {
    const json r = roundtrip(frame_message(sid, f.index, f.pixels));
    REQUIRE(r["type"] == "frame_result");
    CHECK(r["index"] == f.index);
    CHECK(r["status"] == "ok");
    CHECK(r["placement"]["x"] == f.true_placement.x - frames[0].true_placement.x);
    CHECK(r["placement"]["y"] == f.true_placement.y - frames[0].true_placement.y);
  }
  const json closed = roundtrip({{"type", "close_session"}, {"session_id", sid}});
  CHECK(closed["type"] == "session_closed");
  CHECK(std::filesystem::exists(closed["exports"]["mosaic_path"].get<std::string>()));
  ws.close(websocket::close_code::normal);
  server.stop();
  std::filesystem::remove_all(dir);
}
