#pragma once

#include "muchapro/types.hpp"

namespace muchapro {

/// Small real 2-D convolution kernel with odd side lengths.
struct Kernel2D {
  RArray coeffs;

  Index rows() const { return coeffs.rows(); }
  Index cols() const { return coeffs.cols(); }
  double sum() const { return coeffs.sum(); }

  void validate() const {
    require(rows() >= 1 && cols() >= 1, "kernel must be non-empty");
    require(rows() % 2 == 1 && cols() % 2 == 1, "kernel side lengths must be odd");
    require(all_finite(coeffs), "kernel has non-finite coefficients");
  }
};

Kernel2D delta_kernel();
Kernel2D boxcar_kernel(Index side);
/// Sampled Gaussian, truncated at ceil(4*sigma) and normalized to unit sum.
Kernel2D gaussian_kernel(double sigma);

/// Mirror index into [0, n): ..., 2, 1, 0 | 0', 1', 2', ... reflects about
/// the boundary without repeating the edge sample.
inline Index mirror_index(Index i, Index n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

/// 2-D convolution with mirror boundary handling; output size equals input
/// size. Rejects kernels larger than the image.
RArray convolve_mirror(const RArray& img, const Kernel2D& k);
CArray convolve_mirror(const CArray& img, const Kernel2D& k);

/// Separable Gaussian smoothing with mirror boundary; identical to
/// convolve_mirror with gaussian_kernel(sigma) but O(radius) per pixel.
RArray gaussian_smooth(const RArray& img, double sigma);

}  // namespace muchapro
