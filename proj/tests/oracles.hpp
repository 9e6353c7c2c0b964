// SPDX-License-Identifier: Apache-2.0
// Independent reference computations for the tests. Nothing here calls the
// library's spectral code.
#pragma once

#include <complex>
#include <vector>

#include "flowsteer/tensor.hpp"

namespace oracle {

using Complex = std::complex<double>;

/// Direct O(n^4) 2-D DFT of an h x w real plane.
std::vector<Complex> dft2(const double* plane, std::size_t h, std::size_t w);
/// Inverse of dft2; returns the real part.
std::vector<double> idft2_real(const std::vector<Complex>& spec, std::size_t h, std::size_t w);

/// Spatial circular convolution of each channel with a centred odd kernel.
flowsteer::Tensor circular_convolve(const flowsteer::Tensor& image, const flowsteer::Tensor& kernel);

/// Frequency response of a centred odd kernel embedded in an h x w plane
/// with its centre at the origin, via dft2.
std::vector<Complex> kernel_response(const flowsteer::Tensor& kernel, std::size_t h, std::size_t w);

/// Wiener deconvolution computed with dft2 / idft2_real.
flowsteer::Tensor wiener(const flowsteer::Tensor& y, const flowsteer::Tensor& kernel, double lambda);

}  // namespace oracle
