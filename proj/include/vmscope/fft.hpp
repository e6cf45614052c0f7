#pragma once

#include <complex>

#include "vmscope/image.hpp"

namespace vmscope {

using PlaneC = Plane<std::complex<double>>;

/// Forward 2-D DFT of a real plane (any dims, no padding).
PlaneC fft2(const PlaneD& input);

/// Inverse 2-D DFT, scaled by 1/(rows*cols).
PlaneC ifft2(const PlaneC& spectrum);

}  // namespace vmscope
