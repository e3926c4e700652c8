#include "muchapro/directions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "muchapro/hermitian.hpp"
#include "muchapro/parallel.hpp"
#include "muchapro/rng.hpp"

namespace muchapro {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

struct CondMu {
  double value = kInf;
  Eigen::VectorXd d_dlambda;  // w.r.t. the raw eigenvalues, mean chain included
};

// cond_mu of mean-normalized eigenvalues, with its gradient w.r.t. the raw
// (unnormalized) eigenvalues. Returns +inf near the pole of the denominator.
CondMu cond_mu_normalized(const Eigen::VectorXd& ev, double mu, bool with_gradient) {
  CondMu out;
  const Index n = ev.size();
  const double mean = ev.mean();
  if (!(mean > 0.0)) return out;
  const Eigen::VectorXd lam = ev / mean;

  const Eigen::VectorXd up = lam / mu;
  const double sp = log_sum_exp(up);
  const double sm = log_sum_exp(-up);
  if (std::abs(sm) < 1e-12) return out;
  out.value = -sp / sm;

  if (with_gradient) {
    const Eigen::VectorXd smax_p = (up.array() - up.maxCoeff()).exp().matrix();
    const Eigen::VectorXd smax_m = ((-up).array() + up.minCoeff()).exp().matrix();
    const Eigen::VectorXd wp = smax_p / smax_p.sum();
    const Eigen::VectorXd wm = smax_m / smax_m.sum();
    // d(-sp/sm)/dlam_i, then the mean-normalization chain rule
    const Eigen::VectorXd g_norm = -(wp * sm + sp * wm) / (mu * sm * sm);
    const double dot = g_norm.dot(lam);
    out.d_dlambda =
        (g_norm.array() / mean - dot / (mean * static_cast<double>(n))).matrix();
  }
  return out;
}

struct Evaluation {
  double f = kInf;
  double exact_cond = kInf;
  bool analytic_ok = false;  // gradient filled (spectrum gap large enough)
};

class CondObjective {
 public:
  CondObjective(Index d, Index k, OperatorMode mode) : d_(d), k_(k), mode_(mode) {}

  Index params() const { return 2 * d_ * k_; }

  Eigen::MatrixXcd unpack(const Eigen::VectorXd& x) const {
    Eigen::MatrixXcd p(d_, k_);
    for (Index col = 0; col < k_; ++col)
      for (Index i = 0; i < d_; ++i) {
        const Index base = 2 * (col * d_ + i);
        p(i, col) = Complex(x(base), x(base + 1));
      }
    return p;
  }

  Eigen::VectorXd pack(const Eigen::MatrixXcd& p) const {
    Eigen::VectorXd x(params());
    for (Index col = 0; col < k_; ++col)
      for (Index i = 0; i < d_; ++i) {
        const Index base = 2 * (col * d_ + i);
        x(base) = p(i, col).real();
        x(base + 1) = p(i, col).imag();
      }
    return x;
  }

  double value_only(const Eigen::VectorXd& x, double mu, double* exact_cond = nullptr) const {
    const Eigen::MatrixXcd p = unpack(x);
    Eigen::VectorXd ev;
    if (mode_ == OperatorMode::hermitian_real) {
      const Eigen::MatrixXd q = hermitian_design_matrix(p);
      ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(q * q.transpose(),
                                                          Eigen::EigenvaluesOnly)
               .eigenvalues();
    } else {
      const Eigen::MatrixXcd q = unconstrained_design_matrix(p);
      ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(q * q.adjoint(),
                                                           Eigen::EigenvaluesOnly)
               .eigenvalues();
    }
    const double lmin = ev(0), lmax = ev(ev.size() - 1);
    if (exact_cond != nullptr)
      *exact_cond = lmin > 0.0 ? lmax / lmin : kInf;
    if (!(lmin > 1e-300)) return kInf;
    return cond_mu_normalized(ev, mu, false).value;
  }

  /// Objective value and, when the spectrum is simple enough, the analytic
  /// gradient through the eigendecomposition.
  Evaluation evaluate(const Eigen::VectorXd& x, double mu, Eigen::VectorXd& grad) const {
    Evaluation res;
    const Eigen::MatrixXcd p = unpack(x);

    if (mode_ == OperatorMode::hermitian_real) {
      const Eigen::MatrixXd q = hermitian_design_matrix(p);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q * q.transpose());
      return finish(q, Eigen::MatrixXcd(), eig.eigenvalues(),
                    eig.eigenvectors().cast<Complex>(), p, mu, grad, res);
    }
    const Eigen::MatrixXcd q = unconstrained_design_matrix(p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(q * q.adjoint());
    return finish(Eigen::MatrixXd(), q, eig.eigenvalues(), eig.eigenvectors(), p, mu, grad,
                  res);
  }

 private:
  Evaluation finish(const Eigen::MatrixXd& q_real, const Eigen::MatrixXcd& q_cplx,
                    const Eigen::VectorXd& ev, const Eigen::MatrixXcd& u,
                    const Eigen::MatrixXcd& p, double mu, Eigen::VectorXd& grad,
                    Evaluation& res) const {
    const Index n = ev.size();
    const double lmin = ev(0), lmax = ev(n - 1);
    res.exact_cond = lmin > 0.0 ? lmax / lmin : kInf;
    if (!(lmin > 1e-300)) return res;

    CondMu cm = cond_mu_normalized(ev, mu, true);
    res.f = cm.value;
    if (!std::isfinite(cm.value)) return res;

    // the eigenvector outer-product gradient needs a sufficient spectral gap
    double min_gap = kInf;
    for (Index i = 0; i + 1 < n; ++i) min_gap = std::min(min_gap, ev(i + 1) - ev(i));
    if (n > 1 && min_gap < 1e-6 * lmax) return res;  // caller falls back to differences

    // dF/dA = U diag(dF/dlambda) U^H, then dF/dQ = 2 (dF/dA) Q
    const Eigen::MatrixXcd g_a = u * cm.d_dlambda.asDiagonal() * u.adjoint();
    if (mode_ == OperatorMode::hermitian_real) {
      const Eigen::MatrixXd w = 2.0 * g_a.real() * q_real;
      for (Index col = 0; col < p.cols(); ++col) {
        const Eigen::MatrixXcd m = devectorize_hermitian(w.col(col));
        const Eigen::VectorXcd gp = 2.0 * (m * p.col(col));
        store_complex_grad(gp, col, grad);
      }
    } else {
      const Eigen::MatrixXcd w = 2.0 * g_a * q_cplx;
      for (Index col = 0; col < p.cols(); ++col) {
        Eigen::MatrixXcd v(p.rows(), p.rows());
        for (Index i = 0; i < p.rows(); ++i)
          for (Index j = 0; j < p.rows(); ++j) v(i, j) = w(i * p.rows() + j, col);
        const Eigen::VectorXcd gp = (v + v.adjoint()) * p.col(col);
        store_complex_grad(gp, col, grad);
      }
    }
    res.analytic_ok = true;
    return res;
  }

  void store_complex_grad(const Eigen::VectorXcd& gp, Index col, Eigen::VectorXd& grad) const {
    for (Index i = 0; i < d_; ++i) {
      const Index base = 2 * (col * d_ + i);
      grad(base) = gp(i).real();
      grad(base + 1) = gp(i).imag();
    }
  }

  Index d_, k_;
  OperatorMode mode_;
};

struct RestartOutcome {
  Eigen::MatrixXcd best_p;
  double best_cond = kInf;
  bool any_converged = false;
};

RestartOutcome run_restart(const CondObjective& obj, Index d, Index k,
                           const SmoothedConditionParams& params, std::uint64_t restart) {
  SubstreamRng rng(params.seed, restart);
  Eigen::MatrixXcd p0(d, k);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (Index col = 0; col < k; ++col) {
    for (Index i = 0; i < d; ++i) {
      double re, im;
      rng.next_normal_pair(re, im);
      p0(i, col) = Complex(re * inv_sqrt2, im * inv_sqrt2);
    }
    p0.col(col) /= p0.col(col).norm();
  }

  RestartOutcome out;
  Eigen::VectorXd x = obj.pack(p0);

  for (const double mu : params.mu_schedule) {
    auto fg = [&](const Eigen::VectorXd& xx, Eigen::VectorXd* g) -> double {
      double exact = 0.0;
      if (g == nullptr) {
        const double f = obj.value_only(xx, mu, &exact);
        if (exact < out.best_cond) {
          out.best_cond = exact;
          out.best_p = obj.unpack(xx);
        }
        return f;
      }
      Evaluation ev = obj.evaluate(xx, mu, *g);
      if (ev.exact_cond < out.best_cond) {
        out.best_cond = ev.exact_cond;
        out.best_p = obj.unpack(xx);
      }
      if (!std::isfinite(ev.f)) {
        g->setZero();
      } else if (!ev.analytic_ok) {
        // spectral gap too small for the eigenvector formula: central differences
        Eigen::VectorXd xp = xx;
        for (Index j = 0; j < xx.size(); ++j) {
          const double h = 1e-6 * (1.0 + std::abs(xx(j)));
          const double orig = xx(j);
          xp(j) = orig + h;
          const double fp = obj.value_only(xp, mu);
          xp(j) = orig - h;
          const double fm = obj.value_only(xp, mu);
          xp(j) = orig;
          (*g)(j) = (std::isfinite(fp) && std::isfinite(fm)) ? (fp - fm) / (2.0 * h) : 0.0;
        }
      }
      return ev.f;
    };
    const LbfgsResult r = lbfgs_minimize(fg, x, params.lbfgs);
    out.any_converged = out.any_converged || r.converged;
    x = r.x;
  }
  return out;
}

}  // namespace

namespace detail {

double smoothed_condition_objective(const Eigen::VectorXd& x, Index d, Index k,
                                    OperatorMode mode, double mu,
                                    Eigen::VectorXd* gradient, bool* analytic) {
  require(x.size() == 2 * d * k, "smoothed_condition_objective: bad parameter length");
  const CondObjective obj(d, k, mode);
  if (gradient == nullptr) return obj.value_only(x, mu);
  gradient->resize(x.size());
  const Evaluation ev = obj.evaluate(x, mu, *gradient);
  if (analytic != nullptr) *analytic = ev.analytic_ok;
  return ev.f;
}

}  // namespace detail

double smoothed_condition(const Eigen::Ref<const Eigen::VectorXd>& ev, double mu) {
  require(mu > 0.0, "smoothed_condition: mu must be positive");
  require(ev.size() >= 1, "smoothed_condition: need at least one eigenvalue");
  require((ev.array() > 0.0).all(), "smoothed_condition: eigenvalues must be positive");
  const double sp = log_sum_exp(ev / mu);
  const double sm = log_sum_exp(-ev / mu);
  require(std::abs(sm) > 1e-300, "smoothed_condition: denominator underflow, decrease mu");
  return -sp / sm;
}

OptimizedDirections optimize_directions(Index d, Index k, OperatorMode mode,
                                        const SmoothedConditionParams& params) {
  params.validate();
  require(d >= 1, "optimize_directions: d must be >= 1");
  require(k >= d * d, "optimize_directions: need k >= d^2 directions for invertible recovery");

  const CondObjective obj(d, k, mode);
  std::vector<RestartOutcome> outcomes(static_cast<size_t>(params.restarts));
  parallel_for(params.restarts, params.jobs, [&](Index begin, Index end) {
    for (Index r = begin; r < end; ++r)
      outcomes[static_cast<size_t>(r)] =
          run_restart(obj, d, k, params, static_cast<std::uint64_t>(r));
  });

  // deterministic merge: best condition number, ties to the lowest restart
  int best = -1;
  for (int r = 0; r < params.restarts; ++r) {
    if (outcomes[static_cast<size_t>(r)].best_cond <
        (best < 0 ? kInf : outcomes[static_cast<size_t>(best)].best_cond)) {
      best = r;
    }
  }
  if (best < 0 || !std::isfinite(outcomes[static_cast<size_t>(best)].best_cond)) {
    throw InternalError("optimize_directions: no restart produced a usable direction set");
  }

  OptimizedDirections result;
  result.best_restart = best;
  Eigen::MatrixXcd p = outcomes[static_cast<size_t>(best)].best_p;

  // cosmetic canonicalization, both leave the condition number unchanged:
  // common rescale to unit mean norm, largest component of each direction
  // made real and positive
  double mean_norm = 0.0;
  for (Index col = 0; col < k; ++col) mean_norm += p.col(col).norm();
  mean_norm /= static_cast<double>(k);
  if (mean_norm > 0.0) p /= mean_norm;
  for (Index col = 0; col < k; ++col) {
    Index imax = 0;
    p.col(col).cwiseAbs().maxCoeff(&imax);
    const Complex v = p(imax, col);
    if (std::abs(v) > 0.0) p.col(col) *= std::conj(v) / std::abs(v);
  }

  result.dirs.p = std::move(p);
  result.condition = condition_number(result.dirs, mode);

  bool any_converged = false;
  for (const auto& o : outcomes) any_converged = any_converged || o.any_converged;
  if (!any_converged) {
    result.diagnostic =
        "no restart reached the gradient tolerance; returning the best iterate found";
  }
  return result;
}

RandomDirectionStudy random_direction_study(Index d, Index k, OperatorMode mode,
                                            Index trials, std::uint64_t seed, int jobs) {
  require(trials >= 1, "random_direction_study: trials must be >= 1");
  require(d >= 1 && k >= 1, "random_direction_study: bad dimensions");

  RandomDirectionStudy study;
  study.conditions.assign(static_cast<size_t>(trials), kInf);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  parallel_for(trials, jobs, [&](Index begin, Index end) {
    Eigen::MatrixXcd p(d, k);
    for (Index t = begin; t < end; ++t) {
      SubstreamRng rng(seed, static_cast<std::uint64_t>(t));
      for (Index col = 0; col < k; ++col)
        for (Index i = 0; i < d; ++i) {
          double re, im;
          rng.next_normal_pair(re, im);
          p(i, col) = Complex(re * inv_sqrt2, im * inv_sqrt2);
        }
      DirectionSet dirs{p};
      study.conditions[static_cast<size_t>(t)] = condition_number(dirs, mode);
    }
  });

  std::sort(study.conditions.begin(), study.conditions.end());
  study.min = study.conditions.front();
  const size_t mid = study.conditions.size() / 2;
  study.median = study.conditions.size() % 2 == 1
                     ? study.conditions[mid]
                     : 0.5 * (study.conditions[mid - 1] + study.conditions[mid]);
  return study;
}

}  // namespace muchapro
