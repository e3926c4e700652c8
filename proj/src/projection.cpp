#include "muchapro/projection.hpp"

#include <cmath>
#include <limits>
#include <mutex>

#include "muchapro/hermitian.hpp"
#include "muchapro/parallel.hpp"
#include "muchapro/rng.hpp"

namespace muchapro {

std::string to_string(OperatorMode mode) {
  return mode == OperatorMode::hermitian_real ? "hermitian" : "unconstrained";
}

OperatorMode operator_mode_from_string(const std::string& s) {
  if (s == "hermitian") return OperatorMode::hermitian_real;
  if (s == "unconstrained") return OperatorMode::complex_unconstrained;
  throw InvalidInput("unknown operator mode '" + s + "' (hermitian | unconstrained)");
}

Eigen::MatrixXd hermitian_design_matrix(const Eigen::MatrixXcd& p) {
  const Index d = p.rows(), k = p.cols();
  const Index t = upper_pair_count(d);
  Eigen::MatrixXd q(d * d, k);
  for (Index col = 0; col < k; ++col) {
    for (Index i = 0; i < d; ++i) q(i, col) = std::norm(p(i, col));
    for (Index pair = 0; pair < t; ++pair) {
      const auto [i, j] = upper_pair(d, pair);
      const Complex a = std::conj(p(i, col)) * p(j, col);
      q(d + pair, col) = 2.0 * a.real();
      q(d + t + pair, col) = -2.0 * a.imag();
    }
  }
  return q;
}

Eigen::MatrixXcd unconstrained_design_matrix(const Eigen::MatrixXcd& p) {
  const Index d = p.rows(), k = p.cols();
  Eigen::MatrixXcd q(d * d, k);
  for (Index col = 0; col < k; ++col)
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) q(i * d + j, col) = p(i, col) * std::conj(p(j, col));
  return q;
}

Eigen::VectorXd gram_eigenvalues(const Eigen::MatrixXcd& p, OperatorMode mode) {
  if (mode == OperatorMode::hermitian_real) {
    const Eigen::MatrixXd q = hermitian_design_matrix(p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q * q.transpose(),
                                                       Eigen::EigenvaluesOnly);
    return eig.eigenvalues();
  }
  const Eigen::MatrixXcd q = unconstrained_design_matrix(p);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(q * q.adjoint(),
                                                      Eigen::EigenvaluesOnly);
  return eig.eigenvalues();
}

double condition_number(const DirectionSet& dirs, OperatorMode mode) {
  dirs.validate();
  const Eigen::VectorXd ev = gram_eigenvalues(dirs.p, mode);
  const double lmax = ev(ev.size() - 1);
  const double lmin = ev(0);
  if (!(lmin > 1e-14 * std::max(lmax, 0.0)))
    return std::numeric_limits<double>::infinity();
  return lmax / lmin;
}

std::vector<CArray> project(const MultiChannelImage& img, const DirectionSet& dirs) {
  dirs.validate();
  require(dirs.d() == img.d(), "project: direction dimension " + std::to_string(dirs.d()) +
                                   " does not match image channel count " +
                                   std::to_string(img.d()));
  std::vector<CArray> out;
  out.reserve(static_cast<size_t>(dirs.k()));
  for (Index k = 0; k < dirs.k(); ++k) {
    CArray s = CArray::Zero(img.height(), img.width());
    for (Index d = 0; d < img.d(); ++d)
      s += std::conj(dirs.p(d, k)) * img.channels[static_cast<size_t>(d)];
    out.push_back(std::move(s));
  }
  return out;
}

ProjectionOperator ProjectionOperator::build(const DirectionSet& dirs, OperatorMode mode) {
  dirs.validate();
  const Index d = dirs.d(), k = dirs.k();
  if (k < d * d) {
    throw InvalidInput("build_operator: need at least d^2 = " + std::to_string(d * d) +
                       " linearly independent projection directions, got k = " +
                       std::to_string(k));
  }

  ProjectionOperator op;
  op.mode_ = mode;
  op.d_ = d;
  op.k_ = k;

  Eigen::VectorXd ev;
  if (mode == OperatorMode::hermitian_real) {
    op.design_real_ = hermitian_design_matrix(dirs.p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
        op.design_real_ * op.design_real_.transpose(), Eigen::EigenvaluesOnly);
    ev = eig.eigenvalues();
    op.qr_real_.compute(op.design_real_.transpose());
  } else {
    op.design_cplx_ = unconstrained_design_matrix(dirs.p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(
        op.design_cplx_ * op.design_cplx_.adjoint(), Eigen::EigenvaluesOnly);
    ev = eig.eigenvalues();
    op.qr_cplx_.compute(op.design_cplx_.adjoint());
  }

  const double lmax = ev(ev.size() - 1), lmin = ev(0);
  if (!(lmin > 1e-10 * lmax)) {
    throw InvalidInput(
        "build_operator: degenerate directions, the Gram matrix of the projection "
        "operator is numerically singular (smallest/largest eigenvalue " +
        std::to_string(lmin) + " / " + std::to_string(lmax) + ")");
  }
  op.gram_condition_ = lmax / lmin;

  // the defining identity: predicted variances equal the quadratic forms
  SubstreamRng rng(0x9a3c5e17u, 7);
  Eigen::MatrixXcd c(d, d);
  for (Index i = 0; i < d; ++i) {
    c(i, i) = Complex(rng.next_normal(), 0.0);
    for (Index j = i + 1; j < d; ++j) {
      c(i, j) = Complex(rng.next_normal(), rng.next_normal());
      c(j, i) = std::conj(c(i, j));
    }
  }
  const Eigen::VectorXd predicted = op.project_covariance(c);
  for (Index col = 0; col < k; ++col) {
    const double expected = quadratic_form(c, dirs.p.col(col));
    if (std::abs(predicted(col) - expected) > 1e-12 * std::abs(expected) + 1e-12) {
      throw InternalError("build_operator: design matrix violates the quadratic-form identity");
    }
  }
  return op;
}

Eigen::VectorXd ProjectionOperator::project_covariance(const Eigen::MatrixXcd& c) const {
  require(c.rows() == d_ && c.cols() == d_, "project_covariance: dimension mismatch");
  if (mode_ == OperatorMode::hermitian_real)
    return design_real_.transpose() * vectorize_hermitian(c);
  Eigen::VectorXcd vec(d_ * d_);
  for (Index i = 0; i < d_; ++i)
    for (Index j = 0; j < d_; ++j) vec(i * d_ + j) = c(i, j);
  return (design_cplx_.adjoint() * vec).real();
}

InversionResult ProjectionOperator::invert(const std::vector<RArray>& variances,
                                           bool want_residuals) const {
  require(static_cast<Index>(variances.size()) == k_,
          "invert: expected " + std::to_string(k_) + " variance planes, got " +
              std::to_string(variances.size()));
  const Index h = variances[0].rows(), w = variances[0].cols();
  const Index n = h * w;
  for (Index k = 0; k < k_; ++k) {
    const RArray& v = variances[static_cast<size_t>(k)];
    require(v.rows() == h && v.cols() == w, "invert: variance planes differ in size");
    if (!all_finite(v)) {
      for (Index l = 0; l < n; ++l) {
        if (!std::isfinite(v.data()[l])) {
          throw InvalidInput("invert: non-finite variance in plane " + std::to_string(k) +
                             " at pixel (" + std::to_string(l / w) + "," +
                             std::to_string(l % w) + ")");
        }
      }
    }
  }

  Eigen::MatrixXd vmat(k_, n);
  for (Index k = 0; k < k_; ++k)
    vmat.row(k) = Eigen::Map<const Eigen::VectorXd>(variances[static_cast<size_t>(k)].data(), n);

  InversionResult res;
  res.field = CovarianceField::zeros(d_, h, w);
  const Index t = upper_pair_count(d_);

  if (mode_ == OperatorMode::hermitian_real) {
    const Eigen::MatrixXd x = qr_real_.solve(vmat);
    for (Index p = 0; p < d_ * d_; ++p)
      Eigen::Map<Eigen::VectorXd>(res.field.planes[static_cast<size_t>(p)].data(), n) =
          x.row(p);
    if (want_residuals) {
      const Eigen::MatrixXd r = design_real_.transpose() * x - vmat;
      RArray rn(h, w);
      Eigen::Map<Eigen::VectorXd>(rn.data(), n) = r.colwise().norm();
      res.residual_norm = std::move(rn);
    }
  } else {
    const Eigen::MatrixXcd x = qr_cplx_.solve(vmat.cast<Complex>());
    double asym = 0.0;
    for (Index i = 0; i < d_; ++i)
      Eigen::Map<Eigen::VectorXd>(res.field.planes[static_cast<size_t>(i)].data(), n) =
          x.row(i * d_ + i).real();
    for (Index pair = 0; pair < t; ++pair) {
      const auto [i, j] = upper_pair(d_, pair);
      const auto upper = x.row(i * d_ + j);
      const auto lower = x.row(j * d_ + i);
      Eigen::Map<Eigen::VectorXd>(res.field.planes[static_cast<size_t>(d_ + pair)].data(), n) =
          0.5 * (upper.real() + lower.real());
      Eigen::Map<Eigen::VectorXd>(
          res.field.planes[static_cast<size_t>(d_ + t + pair)].data(), n) =
          0.5 * (upper.imag() - lower.imag());
      asym = std::max(asym, (upper - lower.conjugate()).cwiseAbs().maxCoeff());
    }
    for (Index i = 0; i < d_; ++i)
      asym = std::max(asym, x.row(i * d_ + i).imag().cwiseAbs().maxCoeff());
    res.max_asymmetry = asym;
    if (want_residuals) {
      const Eigen::MatrixXcd r = design_cplx_.adjoint() * x - vmat.cast<Complex>();
      RArray rn(h, w);
      Eigen::Map<Eigen::VectorXd>(rn.data(), n) = r.colwise().norm();
      res.residual_norm = std::move(rn);
    }
  }
  return res;
}

PipelineResult run_muchapro(const MultiChannelImage& img, const DirectionSet& dirs,
                            const Despeckler& despeckler, const PipelineOptions& options) {
  img.validate();

  ProjectionOperator op = ProjectionOperator::build(dirs, options.mode);

  std::vector<CArray> projections;
  try {
    projections = project(img, dirs);
  } catch (const InvalidInput& e) {
    throw InvalidInput(std::string("pipeline stage project: ") + e.what());
  }

  std::vector<RArray> variances(static_cast<size_t>(dirs.k()));
  Index clipped = 0;
  std::mutex m;
  parallel_for(dirs.k(), options.jobs, [&](Index begin, Index end) {
    for (Index k = begin; k < end; ++k) {
      RArray v;
      try {
        v = despeckler.despeckle(projections[static_cast<size_t>(k)]);
      } catch (const std::exception& e) {
        throw InvalidInput("pipeline stage despeckle (projection " + std::to_string(k) +
                           ", " + despeckler.name() + "): " + e.what());
      }
      if (v.rows() != img.height() || v.cols() != img.width()) {
        throw InvalidInput("pipeline stage despeckle (projection " + std::to_string(k) +
                           "): output shape mismatch");
      }
      const Index neg = (v < 0.0).count();
      if (neg > 0) v = v.cwiseMax(0.0);
      {
        std::lock_guard<std::mutex> lock(m);
        clipped += neg;
      }
      variances[static_cast<size_t>(k)] = std::move(v);
    }
  });

  InversionResult inv;
  try {
    inv = op.invert(variances);
  } catch (const InvalidInput& e) {
    throw InvalidInput(std::string("pipeline stage invert: ") + e.what());
  }

  PipelineResult out;
  out.clipped_negative = clipped;
  out.max_asymmetry = inv.max_asymmetry;
  out.field = std::move(inv.field);

  if (options.substitute_reflectivities) {
    for (Index d = 0; d < img.d(); ++d) {
      RArray v = despeckler.despeckle(img.channels[static_cast<size_t>(d)]);
      out.field.planes[static_cast<size_t>(d)] = v.cwiseMax(0.0);
    }
  }
  if (options.enforce) out.field = enforce_pd_field(out.field, *options.enforce, options.jobs);
  return out;
}

}  // namespace muchapro
