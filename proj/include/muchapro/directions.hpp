#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "muchapro/lbfgs.hpp"
#include "muchapro/projection.hpp"

namespace muchapro {

/// Exponential smoothing of the condition number of a Hermitian matrix with
/// eigenvalues `ev` (any order, all positive):
///   cond_mu = -log(sum_i exp(+ev_i / mu)) / log(sum_i exp(-ev_i / mu)).
/// Converges to max(ev)/min(ev) as mu -> 0. Both log-sum-exp terms are
/// guarded against overflow by max subtraction.
double smoothed_condition(const Eigen::Ref<const Eigen::VectorXd>& ev, double mu);

struct SmoothedConditionParams {
  /// Annealing schedule for mu; each stage warm-starts from the previous one.
  std::vector<double> mu_schedule{1.0, 0.3, 0.1, 0.03, 0.01};
  int restarts = 100;
  std::uint64_t seed = 0;
  LbfgsOptions lbfgs{};  // memory 10, <= 500 iterations, |g| < 1e-8
  int jobs = 0;

  void validate() const {
    require(!mu_schedule.empty(), "annealing schedule must be non-empty");
    for (size_t i = 0; i < mu_schedule.size(); ++i) {
      require(mu_schedule[i] > 0.0, "smoothing parameter mu must be positive");
      require(i == 0 || mu_schedule[i] < mu_schedule[i - 1],
              "annealing schedule must be strictly decreasing");
    }
    require(restarts >= 1, "need at least one restart");
  }
};

struct OptimizedDirections {
  DirectionSet dirs;
  double condition = 0.0;  // exact condition number of the Gram matrix
  int best_restart = 0;
  std::string diagnostic;  // non-empty when every restart behaved badly
};

/// Multi-start quasi-Newton minimization of the smoothed condition number
/// over the direction entries. Each restart draws standard complex Gaussian
/// directions, normalizes them to unit norm and anneals mu down the schedule;
/// eigenvalues are normalized by their mean inside the objective so the
/// surrogate cannot exploit global scaling. The best iterate by exact
/// condition number ever seen is returned, so the result is never worse than
/// its best initialization.
OptimizedDirections optimize_directions(Index d, Index k, OperatorMode mode,
                                        const SmoothedConditionParams& params);

struct RandomDirectionStudy {
  std::vector<double> conditions;  // sorted ascending; +inf for singular draws
  double min = 0.0;
  double median = 0.0;
};

/// Condition numbers of `trials` i.i.d. standard-complex-Gaussian direction
/// sets, for comparison against the optimized value.
RandomDirectionStudy random_direction_study(Index d, Index k, OperatorMode mode,
                                            Index trials, std::uint64_t seed, int jobs = 0);

namespace detail {

/// The optimizer objective: cond_mu of the mean-normalized Gram spectrum as a
/// function of packed direction parameters (re/im interleaved, directions
/// consecutive). +infinity outside the domain. When `gradient` is given it is
/// filled analytically through the eigendecomposition; `analytic` reports
/// whether the spectral gap was large enough for that formula (callers fall
/// back to finite differences otherwise).
double smoothed_condition_objective(const Eigen::VectorXd& x, Index d, Index k,
                                    OperatorMode mode, double mu,
                                    Eigen::VectorXd* gradient = nullptr,
                                    bool* analytic = nullptr);

}  // namespace detail

}  // namespace muchapro
