#include "muchapro/enforce_pd.hpp"

#include <algorithm>
#include <cmath>

#include "muchapro/hermitian.hpp"
#include "muchapro/parallel.hpp"

namespace muchapro {

Eigen::MatrixXcd enforce_pd(const Eigen::MatrixXcd& c, const PdParams& params) {
  params.validate();
  const Index d = c.rows();
  require(c.cols() == d, "enforce_pd: matrix must be square");

  Eigen::MatrixXcd out(d, d);
  for (Index i = 0; i < d; ++i)
    out(i, i) = Complex(std::max(params.r_thml, c(i, i).real()), 0.0);

  for (Index i = 0; i < d; ++i) {
    for (Index j = i + 1; j < d; ++j) {
      const double denom = std::sqrt(out(i, i).real() * out(j, j).real());
      const double coh = std::abs(c(i, j)) / denom;
      Complex v = c(i, j);
      if (coh > params.rho_max) {
        v *= params.rho_max / coh;
        // nudge below the ceiling if rounding left the rescaled coherence
        // a few ulps above it; keeps the bound exact and the map idempotent
        while (std::abs(v) / denom > params.rho_max) v *= 1.0 - 0x1p-50;
      }
      out(i, j) = v;
      out(j, i) = std::conj(v);
    }
  }
  return out;
}

CovarianceField enforce_pd_field(const CovarianceField& field, const PdParams& params,
                                 int jobs) {
  params.validate();
  CovarianceField out = CovarianceField::zeros(field.d, field.height(), field.width());
  const Index w = field.width();
  parallel_for(field.pixels(), jobs, [&](Index begin, Index end) {
    for (Index l = begin; l < end; ++l) {
      const Index r = l / w, c = l % w;
      out.set_matrix_at(r, c, enforce_pd(field.matrix_at(r, c), params));
    }
  });
  return out;
}

double default_r_thml(const CovarianceField& field) {
  std::vector<double> diag;
  diag.reserve(static_cast<size_t>(field.d * field.pixels()));
  for (Index i = 0; i < field.d; ++i) {
    const RArray& p = field.diag_plane(i);
    diag.insert(diag.end(), p.data(), p.data() + p.size());
  }
  const size_t mid = diag.size() / 2;
  std::nth_element(diag.begin(), diag.begin() + static_cast<std::ptrdiff_t>(mid), diag.end());
  const double median = diag[mid];
  return median > 0.0 ? 1e-3 * median : 1e-3;
}

}  // namespace muchapro
