#include <mutex>

#include <opencv2/core.hpp>
#include <opencv2/dnn.hpp>

#include "vmscope/segmentation.hpp"

namespace vmscope {

namespace {

class DnnBackend final : public SegmenterBackend {
 public:
  DnnBackend(const std::filesystem::path& model_path, int input_width, int input_height)
      : input_width_(input_width), input_height_(input_height) {
    try {
      net_ = cv::dnn::readNet(model_path.string());
    } catch (const cv::Exception& e) {
      throw Error(ErrorCode::BackendFailure, "cannot load model " + model_path.string() + ": " + e.what());
    }
    if (net_.empty()) throw Error(ErrorCode::BackendFailure, "empty model " + model_path.string());
    net_.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
    net_.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);
  }

  std::string name() const override { return "external"; }
  int input_width() const override { return input_width_; }
  int input_height() const override { return input_height_; }

  LesionMask infer(const Raster& image, const std::optional<Rect>&) const override {
    const Raster rgb = to_rgb(image);
    const int w = rgb.width();
    const int h = rgb.height();
    int dims[4] = {1, 3, h, w};
    cv::Mat blob(4, dims, CV_32F);
    float* data = blob.ptr<float>();
    const std::size_t plane = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c)
          data[static_cast<std::size_t>(c) * plane + static_cast<std::size_t>(y) * w + x] = rgb(x, y, c) / 255.0f;

    cv::Mat out;
    {
      // cv::dnn::Net::forward mutates the net.
      std::lock_guard lock(mutex_);
      try {
        net_.setInput(blob);
        out = net_.forward();
      } catch (const cv::Exception& e) {
        throw Error(ErrorCode::BackendFailure, std::string("inference failed: ") + e.what());
      }
    }
    if (out.dims != 4 || out.size[0] != 1 || out.size[2] != h || out.size[3] != w) {
      throw Error(ErrorCode::BackendFailure, "model output must be 1xCxHxW at the input size");
    }
    const int classes = out.size[1];
    const float* scores = out.ptr<float>();
    LesionMask mask(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t at = static_cast<std::size_t>(y) * w + x;
        if (classes == 1) {
          mask(x, y) = scores[at] > 0.0f ? kHydrops : kBackground;
        } else {
          int best = 0;
          for (int c = 1; c < classes; ++c)
            if (scores[static_cast<std::size_t>(c) * plane + at] > scores[static_cast<std::size_t>(best) * plane + at]) best = c;
          mask(x, y) = best == 1 ? kHydrops : kBackground;
        }
      }
    }
    return mask;
  }

 private:
  int input_width_;
  int input_height_;
  mutable std::mutex mutex_;
  mutable cv::dnn::Net net_;
};

}  // namespace

std::unique_ptr<SegmenterBackend> make_dnn_backend(const std::filesystem::path& model_path, int input_width, int input_height) {
  return std::make_unique<DnnBackend>(model_path, input_width, input_height);
}

bool dnn_backend_available() { return true; }

}  // namespace vmscope
