#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace muchapro {

using Index = Eigen::Index;
using Complex = std::complex<double>;

/// Image planes are stored row-major so that the flat pixel index
/// l = row * width + col walks the plane in memory order.
using CArray = Eigen::Array<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RArray = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Bad user input: malformed files, inconsistent dimensions, out-of-range
/// parameters. The CLI maps this to exit code 1.
class InvalidInput : public std::runtime_error {
 public:
  explicit InvalidInput(const std::string& msg) : std::runtime_error(msg) {}
};

/// Broken internal invariant. The CLI maps this to exit code 2.
class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidInput(msg);
}

template <typename Derived>
bool all_finite(const Eigen::ArrayBase<Derived>& a) {
  return a.isFinite().all();
}

inline bool all_finite(const CArray& a) {
  return a.real().isFinite().all() && a.imag().isFinite().all();
}

/// Multi-channel single-look complex image: D co-registered complex planes
/// of identical size. Channel d, pixel (r, c) holds the complex amplitude.
struct MultiChannelImage {
  std::vector<CArray> channels;

  MultiChannelImage() = default;
  explicit MultiChannelImage(std::vector<CArray> ch) : channels(std::move(ch)) {
    validate();
  }

  static MultiChannelImage zeros(Index d, Index height, Index width) {
    MultiChannelImage img;
    img.channels.assign(static_cast<size_t>(d), CArray::Zero(height, width));
    return img;
  }

  Index d() const { return static_cast<Index>(channels.size()); }
  Index height() const { return channels.empty() ? 0 : channels[0].rows(); }
  Index width() const { return channels.empty() ? 0 : channels[0].cols(); }
  Index pixels() const { return height() * width(); }

  void validate() const {
    require(!channels.empty(), "multi-channel image needs at least one channel");
    for (const auto& ch : channels) {
      require(ch.rows() == height() && ch.cols() == width(),
              "all channels must share the same dimensions");
      require(ch.rows() >= 1 && ch.cols() >= 1, "empty channel plane");
      require(all_finite(ch), "non-finite complex amplitude in image");
    }
  }
};

Index upper_pair_count(Index d);
std::pair<Index, Index> upper_pair(Index d, Index t);
Index upper_pair_index(Index d, Index i, Index j);

/// Field of per-pixel D x D Hermitian covariance matrices, stored as D*D
/// real planes: the D diagonals, then the real parts of the strict upper
/// triangle in row-major (i, j) order, then the matching imaginary parts.
/// Storing only these D*D real numbers makes every pixel's matrix Hermitian
/// by construction.
struct CovarianceField {
  Index d = 0;
  std::vector<RArray> planes;

  CovarianceField() = default;
  CovarianceField(Index d_, std::vector<RArray> planes_)
      : d(d_), planes(std::move(planes_)) {
    validate();
  }

  static CovarianceField zeros(Index d, Index height, Index width) {
    CovarianceField f;
    f.d = d;
    f.planes.assign(static_cast<size_t>(d * d), RArray::Zero(height, width));
    return f;
  }

  /// Constant field: the same Hermitian matrix at every pixel.
  static CovarianceField constant(const Eigen::MatrixXcd& c, Index height, Index width);

  Index height() const { return planes.empty() ? 0 : planes[0].rows(); }
  Index width() const { return planes.empty() ? 0 : planes[0].cols(); }
  Index pixels() const { return height() * width(); }

  const RArray& diag_plane(Index i) const { return planes[static_cast<size_t>(i)]; }
  const RArray& re_plane(Index t) const { return planes[static_cast<size_t>(d + t)]; }
  const RArray& im_plane(Index t) const {
    return planes[static_cast<size_t>(d + upper_pair_count(d) + t)];
  }

  Eigen::MatrixXcd matrix_at(Index r, Index c) const;
  void set_matrix_at(Index r, Index c, const Eigen::MatrixXcd& m);

  /// The D*D real parameters of the pixel, in plane order.
  Eigen::VectorXd params_at(Index r, Index c) const;
  void set_params_at(Index r, Index c, const Eigen::Ref<const Eigen::VectorXd>& v);

  void validate() const {
    require(d >= 1, "covariance field needs d >= 1");
    require(static_cast<Index>(planes.size()) == d * d,
            "covariance field needs d*d planes");
    for (const auto& p : planes) {
      require(p.rows() == height() && p.cols() == width(),
              "all covariance planes must share the same dimensions");
      require(all_finite(p), "non-finite value in covariance field");
    }
  }
};

}  // namespace muchapro
