#include "vmscope/fft.hpp"

#include <vector>

#include <unsupported/Eigen/FFT>

namespace vmscope {

namespace {

// Row transforms, then column transforms through a scratch buffer.
void transform_2d(PlaneC& data, bool inverse) {
  Eigen::FFT<double> fft;
  const Eigen::Index rows = data.rows();
  const Eigen::Index cols = data.cols();

  std::vector<std::complex<double>> in(static_cast<std::size_t>(std::max(rows, cols)));
  std::vector<std::complex<double>> out(in.size());

  for (Eigen::Index r = 0; r < rows; ++r) {
    std::complex<double>* row = data.data() + r * cols;
    if (inverse) {
      fft.inv(out.data(), row, static_cast<int>(cols));
    } else {
      fft.fwd(out.data(), row, static_cast<int>(cols));
    }
    std::copy_n(out.data(), cols, row);
  }
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) in[static_cast<std::size_t>(r)] = data(r, c);
    if (inverse) {
      fft.inv(out.data(), in.data(), static_cast<int>(rows));
    } else {
      fft.fwd(out.data(), in.data(), static_cast<int>(rows));
    }
    for (Eigen::Index r = 0; r < rows; ++r) data(r, c) = out[static_cast<std::size_t>(r)];
  }
}

}  // namespace

PlaneC fft2(const PlaneD& input) {
  PlaneC data = input.cast<std::complex<double>>();
  transform_2d(data, false);
  return data;
}

PlaneC ifft2(const PlaneC& spectrum) {
  PlaneC data = spectrum;
  transform_2d(data, true);
  return data;
}

}  // namespace vmscope
