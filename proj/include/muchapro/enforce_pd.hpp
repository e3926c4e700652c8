#pragma once

#include "muchapro/types.hpp"

namespace muchapro {

struct PdParams {
  double r_thml = 1e-3;  // reflectivity floor, intensity units
  double rho_max = 0.99;  // coherence ceiling, in (0, 1)

  void validate() const {
    require(r_thml > 0.0, "r_thml must be positive");
    require(rho_max > 0.0 && rho_max < 1.0, "rho_max must lie in (0, 1)");
  }
};

/// Clip diagonals to at least r_thml, then rescale off-diagonal entries whose
/// pairwise coherence (with the clipped diagonals) exceeds rho_max so that it
/// equals rho_max; entries already within the ceiling are untouched. The
/// result is exactly Hermitian and the operation is idempotent. For d = 2 the
/// output is positive definite; for d >= 3 pairwise coherence bounds do not
/// imply positive definiteness.
Eigen::MatrixXcd enforce_pd(const Eigen::MatrixXcd& c, const PdParams& params);

CovarianceField enforce_pd_field(const CovarianceField& field, const PdParams& params,
                                 int jobs = 0);

/// Scene-relative default floor: 1e-3 times the median estimated reflectivity.
double default_r_thml(const CovarianceField& field);

}  // namespace muchapro
