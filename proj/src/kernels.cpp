#include "muchapro/kernels.hpp"

#include <cmath>

namespace muchapro {

Kernel2D delta_kernel() {
  Kernel2D k;
  k.coeffs = RArray::Ones(1, 1);
  return k;
}

Kernel2D boxcar_kernel(Index side) {
  require(side >= 1 && side % 2 == 1, "boxcar side must be odd and positive");
  Kernel2D k;
  k.coeffs = RArray::Constant(side, side, 1.0 / static_cast<double>(side * side));
  return k;
}

Kernel2D gaussian_kernel(double sigma) {
  require(sigma > 0.0, "gaussian kernel needs sigma > 0");
  const Index r = std::max<Index>(1, static_cast<Index>(std::ceil(4.0 * sigma)));
  Kernel2D k;
  k.coeffs = RArray(2 * r + 1, 2 * r + 1);
  for (Index i = -r; i <= r; ++i)
    for (Index j = -r; j <= r; ++j)
      k.coeffs(i + r, j + r) =
          std::exp(-0.5 * (static_cast<double>(i * i + j * j)) / (sigma * sigma));
  k.coeffs /= k.coeffs.sum();
  return k;
}

namespace {

template <typename ArrayT>
ArrayT convolve_mirror_impl(const ArrayT& img, const Kernel2D& k) {
  k.validate();
  const Index h = img.rows(), w = img.cols();
  require(k.rows() <= h && k.cols() <= w, "kernel larger than image");
  const Index rr = (k.rows() - 1) / 2, rc = (k.cols() - 1) / 2;
  ArrayT out(h, w);
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      typename ArrayT::Scalar acc{};
      for (Index u = -rr; u <= rr; ++u) {
        const Index rm = mirror_index(r + u, h);
        for (Index v = -rc; v <= rc; ++v) {
          acc += k.coeffs(u + rr, v + rc) * img(rm, mirror_index(c + v, w));
        }
      }
      out(r, c) = acc;
    }
  }
  return out;
}

}  // namespace

RArray convolve_mirror(const RArray& img, const Kernel2D& k) {
  return convolve_mirror_impl(img, k);
}

CArray convolve_mirror(const CArray& img, const Kernel2D& k) {
  return convolve_mirror_impl(img, k);
}

RArray gaussian_smooth(const RArray& img, double sigma) {
  require(sigma > 0.0, "gaussian_smooth needs sigma > 0");
  const Index r = std::max<Index>(1, static_cast<Index>(std::ceil(4.0 * sigma)));
  Eigen::VectorXd g(2 * r + 1);
  for (Index i = -r; i <= r; ++i)
    g(i + r) = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
  g /= g.sum();

  const Index h = img.rows(), w = img.cols();
  require(2 * r + 1 <= h && 2 * r + 1 <= w, "kernel larger than image");
  RArray tmp(h, w), out(h, w);
  for (Index rr = 0; rr < h; ++rr)
    for (Index c = 0; c < w; ++c) {
      double acc = 0.0;
      for (Index v = -r; v <= r; ++v) acc += g(v + r) * img(rr, mirror_index(c + v, w));
      tmp(rr, c) = acc;
    }
  for (Index rr = 0; rr < h; ++rr)
    for (Index c = 0; c < w; ++c) {
      double acc = 0.0;
      for (Index u = -r; u <= r; ++u) acc += g(u + r) * tmp(mirror_index(rr + u, h), c);
      out(rr, c) = acc;
    }
  return out;
}

}  // namespace muchapro
