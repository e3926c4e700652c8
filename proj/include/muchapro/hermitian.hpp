#pragma once

#include "muchapro/types.hpp"

namespace muchapro {

/// Largest entry of |C - C^H| relative to the largest entry of |C|.
double hermitian_asymmetry(const Eigen::MatrixXcd& c);

/// Rearrange a Hermitian matrix into its D*D real parameters:
/// (C_11 .. C_DD, Re C_12 .. Re C_{D-1,D}, Im C_12 .. Im C_{D-1,D}),
/// upper-triangle pairs in row-major order. Rejects inputs whose relative
/// asymmetry exceeds `tol`.
Eigen::VectorXd vectorize_hermitian(const Eigen::MatrixXcd& c, double tol = 1e-9);

/// Exact inverse of vectorize_hermitian.
Eigen::MatrixXcd devectorize_hermitian(const Eigen::Ref<const Eigen::VectorXd>& v);

/// p^H C p for Hermitian C; the (tiny) imaginary residue is discarded.
double quadratic_form(const Eigen::MatrixXcd& c, const Eigen::VectorXcd& p);

struct InsarProducts {
  RArray reflectivity_i;
  RArray reflectivity_j;
  RArray phase;      // in (-pi, pi]
  RArray coherence;  // >= 0; may exceed 1 before positive-definiteness enforcement
  Index coherence_above_one = 0;
};

/// Per-pixel reflectivities, interferometric phase and coherence of the
/// (i, j) channel pair. Coherence is |C_ij| / sqrt(C_ii * C_jj); values
/// above 1 are possible for raw least-squares estimates and are counted.
InsarProducts interferometric_products(const CovarianceField& field, Index i, Index j);

}  // namespace muchapro
