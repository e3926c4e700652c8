#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "muchapro/despeckle.hpp"
#include "muchapro/enforce_pd.hpp"
#include "muchapro/types.hpp"

namespace muchapro {

/// K complex projection directions for D-channel images (columns of p).
struct DirectionSet {
  Eigen::MatrixXcd p;

  Index d() const { return p.rows(); }
  Index k() const { return p.cols(); }

  void validate() const {
    require(p.rows() >= 1 && p.cols() >= 1, "direction set must be non-empty");
    for (Index k = 0; k < p.cols(); ++k) {
      require(p.col(k).allFinite(), "direction has non-finite entries");
      require(p.col(k).norm() > 0.0, "direction has zero norm");
    }
  }
};

enum class OperatorMode { hermitian_real, complex_unconstrained };

std::string to_string(OperatorMode mode);
OperatorMode operator_mode_from_string(const std::string& s);

/// Column k maps the d*d real Hermitian parameters of C to p_k^H C p_k:
/// (|p_k1|^2 .. |p_kD|^2, 2 Re(conj(p_i) p_j), -2 Im(conj(p_i) p_j)) over the
/// row-major upper-triangle pairs.
Eigen::MatrixXd hermitian_design_matrix(const Eigen::MatrixXcd& p);

/// Column k is the row-major vec of p_k p_k^H, so that q_k^H vec(C) = p_k^H C p_k
/// for arbitrary (not necessarily Hermitian) C.
Eigen::MatrixXcd unconstrained_design_matrix(const Eigen::MatrixXcd& p);

/// Eigenvalues (ascending) of the Gram matrix of the design for this mode.
Eigen::VectorXd gram_eigenvalues(const Eigen::MatrixXcd& p, OperatorMode mode);

/// lambda_max / lambda_min of the Gram matrix; +infinity when the smallest
/// eigenvalue is nonpositive within tolerance.
double condition_number(const DirectionSet& dirs, OperatorMode mode);

/// Project a multi-channel image onto every direction: [s_k]_l = p_k^H [z]_l.
std::vector<CArray> project(const MultiChannelImage& img, const DirectionSet& dirs);

struct InversionResult {
  CovarianceField field;
  /// Largest |c_ij - conj(c_ji)| across pixels before Hermitian folding.
  /// Zero in hermitian_real mode. In complex_unconstrained mode the solution
  /// is provably Hermitian for real variance inputs (conjugate-transposing a
  /// candidate conjugates every residual, so the unique least-squares
  /// minimizer is its own adjoint); this diagnostic therefore reports the
  /// rounding-level skew of the solver.
  double max_asymmetry = 0.0;
  /// Per-pixel least-squares residual L2 norms (filled on request).
  std::optional<RArray> residual_norm;
};

/// The pixel-independent least-squares operator recovering covariance
/// parameters from the K despeckled projection variances. One orthogonal
/// decomposition is computed at build time and reused for every pixel.
class ProjectionOperator {
 public:
  static ProjectionOperator build(const DirectionSet& dirs, OperatorMode mode);

  OperatorMode mode() const { return mode_; }
  Index d() const { return d_; }
  Index k() const { return k_; }
  double gram_condition() const { return gram_condition_; }

  /// Noise-free variances p_k^H C p_k for one Hermitian matrix.
  Eigen::VectorXd project_covariance(const Eigen::MatrixXcd& c) const;

  /// Per-pixel least squares over the K variance planes.
  InversionResult invert(const std::vector<RArray>& variances,
                         bool want_residuals = false) const;

 private:
  ProjectionOperator() = default;

  OperatorMode mode_ = OperatorMode::hermitian_real;
  Index d_ = 0;
  Index k_ = 0;
  double gram_condition_ = 0.0;
  Eigen::MatrixXd design_real_;    // (d^2, k), hermitian_real
  Eigen::MatrixXcd design_cplx_;   // (d^2, k), complex_unconstrained
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_real_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr_cplx_;
};

struct PipelineOptions {
  OperatorMode mode = OperatorMode::hermitian_real;
  std::optional<PdParams> enforce;  // apply positive-definiteness enforcement
  bool substitute_reflectivities = false;  // despeckle channels, replace diagonals
  int jobs = 0;
};

struct PipelineResult {
  CovarianceField field;
  Index clipped_negative = 0;  // despeckled variances clipped to zero
  double max_asymmetry = 0.0;
};

/// Full chain: project -> despeckle each projection independently -> invert,
/// with optional positive-definiteness enforcement and per-channel
/// reflectivity substitution.
PipelineResult run_muchapro(const MultiChannelImage& img, const DirectionSet& dirs,
                            const Despeckler& despeckler,
                            const PipelineOptions& options = {});

}  // namespace muchapro
