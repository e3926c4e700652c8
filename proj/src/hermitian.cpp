#include "muchapro/hermitian.hpp"

#include <cmath>

namespace muchapro {

Index upper_pair_count(Index d) { return d * (d - 1) / 2; }

std::pair<Index, Index> upper_pair(Index d, Index t) {
  // row-major walk of the strict upper triangle: (0,1), (0,2), ..., (1,2), ...
  Index i = 0;
  Index remaining = t;
  while (remaining >= d - 1 - i) {
    remaining -= d - 1 - i;
    ++i;
  }
  return {i, i + 1 + remaining};
}

Index upper_pair_index(Index d, Index i, Index j) {
  // offset of row i's block, then position of j within it
  return i * d - i * (i + 1) / 2 + (j - i - 1);
}

double hermitian_asymmetry(const Eigen::MatrixXcd& c) {
  const double scale = c.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  const double asym = (c - c.adjoint()).cwiseAbs().maxCoeff();
  return asym / scale;
}

Eigen::VectorXd vectorize_hermitian(const Eigen::MatrixXcd& c, double tol) {
  const Index d = c.rows();
  require(c.cols() == d, "vectorize_hermitian: matrix must be square");
  const double asym = hermitian_asymmetry(c);
  if (asym > tol) {
    throw InvalidInput("vectorize_hermitian: matrix is not Hermitian, relative asymmetry " +
                       std::to_string(asym));
  }
  const Index t = upper_pair_count(d);
  Eigen::VectorXd v(d * d);
  for (Index i = 0; i < d; ++i) v(i) = c(i, i).real();
  for (Index k = 0; k < t; ++k) {
    const auto [i, j] = upper_pair(d, k);
    v(d + k) = c(i, j).real();
    v(d + t + k) = c(i, j).imag();
  }
  return v;
}

Eigen::MatrixXcd devectorize_hermitian(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const Index n = v.size();
  const Index d = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(n))));
  require(d * d == n, "devectorize_hermitian: length must be a perfect square");
  const Index t = upper_pair_count(d);
  Eigen::MatrixXcd c(d, d);
  for (Index i = 0; i < d; ++i) c(i, i) = Complex(v(i), 0.0);
  for (Index k = 0; k < t; ++k) {
    const auto [i, j] = upper_pair(d, k);
    c(i, j) = Complex(v(d + k), v(d + t + k));
    c(j, i) = std::conj(c(i, j));
  }
  return c;
}

double quadratic_form(const Eigen::MatrixXcd& c, const Eigen::VectorXcd& p) {
  require(c.rows() == c.cols(), "quadratic_form: matrix must be square");
  require(c.rows() == p.size(), "quadratic_form: dimension mismatch between matrix and vector");
  const Complex q = p.dot(c * p);  // Eigen's dot conjugates the left argument
  return q.real();
}

InsarProducts interferometric_products(const CovarianceField& field, Index i, Index j) {
  require(i != j, "interferometric_products: channels must differ");
  require(i >= 0 && j >= 0 && i < field.d && j < field.d,
          "interferometric_products: channel out of range");
  const Index h = field.height(), w = field.width();

  const Index lo = std::min(i, j), hi = std::max(i, j);
  const Index t = upper_pair_index(field.d, lo, hi);
  const RArray& re = field.re_plane(t);
  const RArray& im = field.im_plane(t);

  InsarProducts out;
  out.reflectivity_i = field.diag_plane(i);
  out.reflectivity_j = field.diag_plane(j);
  out.phase = RArray::Zero(h, w);
  out.coherence = RArray::Zero(h, w);

  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      const double di = field.diag_plane(i)(r, c);
      const double dj = field.diag_plane(j)(r, c);
      if (di <= 0.0 || dj <= 0.0) {
        throw InvalidInput("interferometric_products: nonpositive diagonal at pixel (" +
                           std::to_string(r) + "," + std::to_string(c) + ") channel " +
                           std::to_string(di <= 0.0 ? i : j));
      }
      // C_ij is stored for the ordered pair (lo, hi); swap means conjugation
      Complex cij(re(r, c), im(r, c));
      if (i > j) cij = std::conj(cij);
      double ph = std::arg(cij);
      if (ph == -M_PI) ph = M_PI;
      out.phase(r, c) = ph;
      const double coh = std::abs(cij) / std::sqrt(di * dj);
      out.coherence(r, c) = coh;
      if (coh > 1.0) ++out.coherence_above_one;
    }
  }
  return out;
}

Eigen::MatrixXcd CovarianceField::matrix_at(Index r, Index c) const {
  return devectorize_hermitian(params_at(r, c));
}

void CovarianceField::set_matrix_at(Index r, Index c, const Eigen::MatrixXcd& m) {
  set_params_at(r, c, vectorize_hermitian(m));
}

Eigen::VectorXd CovarianceField::params_at(Index r, Index c) const {
  Eigen::VectorXd v(d * d);
  for (Index p = 0; p < d * d; ++p) v(p) = planes[static_cast<size_t>(p)](r, c);
  return v;
}

void CovarianceField::set_params_at(Index r, Index c,
                                    const Eigen::Ref<const Eigen::VectorXd>& v) {
  require(v.size() == d * d, "set_params_at: parameter length mismatch");
  for (Index p = 0; p < d * d; ++p) planes[static_cast<size_t>(p)](r, c) = v(p);
}

CovarianceField CovarianceField::constant(const Eigen::MatrixXcd& c, Index height,
                                          Index width) {
  CovarianceField f = CovarianceField::zeros(c.rows(), height, width);
  const Eigen::VectorXd v = vectorize_hermitian(c);
  for (Index p = 0; p < f.d * f.d; ++p) f.planes[static_cast<size_t>(p)].setConstant(v(p));
  return f;
}

}  // namespace muchapro
