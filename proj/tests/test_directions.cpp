#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "muchapro/directions.hpp"
#include "muchapro/rng.hpp"
#include "oracles.hpp"

using namespace muchapro;

namespace {

Eigen::VectorXd spectrum(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("smoothed condition: flat spectrum closed form, tends to 1") {
  const Eigen::VectorXd flat = spectrum({1.0, 1.0, 1.0, 1.0});
  for (double mu : {0.25, 0.1, 0.05}) {
    const double expected = -(std::log(4.0) + 1.0 / mu) / (std::log(4.0) - 1.0 / mu);
    CHECK(smoothed_condition(flat, mu) == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK(std::abs(smoothed_condition(flat, 1e-4) - 1.0) < 1e-3);
}

TEST_CASE("smoothed condition: {2,1} at mu=1e-3 equals the exact ratio") {
  CHECK(smoothed_condition(spectrum({2.0, 1.0}), 1e-3) ==
        doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("smoothed condition survives tiny mu via max subtraction") {
  const double v = smoothed_condition(spectrum({2.0, 1.0}), 1e-6);
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("smoothed condition rejects bad inputs") {
  CHECK_THROWS_AS(smoothed_condition(spectrum({1.0, 2.0}), 0.0), InvalidInput);
  CHECK_THROWS_AS(smoothed_condition(spectrum({1.0, 2.0}), -1.0), InvalidInput);
  CHECK_THROWS_AS(smoothed_condition(spectrum({0.0, 2.0}), 0.1), InvalidInput);
}

TEST_CASE("halving mu shrinks the gap to the exact condition number") {
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> unif(0.2, 3.0);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd ev(5);
    for (Index i = 0; i < 5; ++i) ev(i) = unif(gen);
    ev /= ev.mean();
    const double exact = ev.maxCoeff() / ev.minCoeff();
    double mu = 0.2 * ev.minCoeff();
    double prev = std::abs(smoothed_condition(ev, mu) - exact);
    for (int step = 0; step < 10; ++step) {
      mu *= 0.5;
      const double err = std::abs(smoothed_condition(ev, mu) - exact);
      CHECK(err <= prev + 1e-12);
      prev = err;
    }
  }
}

TEST_CASE("condition number is invariant under common rescaling and per-direction phases") {
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  for (const auto mode : {OperatorMode::hermitian_real, OperatorMode::complex_unconstrained}) {
    for (int rep = 0; rep < 10; ++rep) {
      DirectionSet dirs;
      dirs.p = Eigen::MatrixXcd(2, 5);
      for (Index c = 0; c < 5; ++c) dirs.p.col(c) = oracles::random_complex_vector(2, gen);
      const double base = condition_number(dirs, mode);

      DirectionSet scaled;
      scaled.p = scale(gen) * dirs.p;
      CHECK(condition_number(scaled, mode) == doctest::Approx(base).epsilon(1e-10));

      DirectionSet rotated = dirs;
      for (Index c = 0; c < 5; ++c) rotated.p.col(c) *= std::polar(1.0, angle(gen));
      CHECK(condition_number(rotated, mode) == doctest::Approx(base).epsilon(1e-10));
    }
  }
}

TEST_CASE("analytic gradient matches central finite differences on simple spectra") {
  std::mt19937 gen(7);
  std::normal_distribution<double> n(0.0, 1.0);
  for (const auto mode : {OperatorMode::hermitian_real, OperatorMode::complex_unconstrained}) {
    for (const double mu : {0.5, 0.1}) {
      int checked = 0;
      for (int rep = 0; rep < 40 && checked < 10; ++rep) {
        const Index d = 2, k = 5;
        Eigen::VectorXd x(2 * d * k);
        for (Index i = 0; i < x.size(); ++i) x(i) = n(gen);

        Eigen::VectorXd grad;
        bool analytic = false;
        const double f0 = detail::smoothed_condition_objective(x, d, k, mode, mu, &grad,
                                                               &analytic);
        if (!std::isfinite(f0) || !analytic) continue;  // near-degenerate: excluded
        ++checked;

        Eigen::VectorXd fd(x.size());
        for (Index j = 0; j < x.size(); ++j) {
          const double h = 1e-6 * (1.0 + std::abs(x(j)));
          Eigen::VectorXd xp = x, xm = x;
          xp(j) += h;
          xm(j) -= h;
          fd(j) = (detail::smoothed_condition_objective(xp, d, k, mode, mu) -
                   detail::smoothed_condition_objective(xm, d, k, mode, mu)) /
                  (2.0 * h);
        }
        CHECK((grad - fd).norm() <= 1e-5 * std::max(fd.norm(), 1e-12));
      }
      CHECK(checked >= 10);
    }
  }
}

TEST_CASE("optimizer: d=1, k=1 yields condition number exactly 1") {
  SmoothedConditionParams params;
  params.restarts = 2;
  const OptimizedDirections best = optimize_directions(1, 1, OperatorMode::hermitian_real,
                                                       params);
  CHECK(best.condition == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("optimizer rejects k < d^2 and bad schedules") {
  SmoothedConditionParams params;
  CHECK_THROWS_AS(optimize_directions(2, 3, OperatorMode::hermitian_real, params),
                  InvalidInput);
  params.mu_schedule = {0.1, 0.1};
  CHECK_THROWS_AS(optimize_directions(2, 4, OperatorMode::hermitian_real, params),
                  InvalidInput);
}

TEST_CASE("optimizer is never worse than its best (renormalized) initialization") {
  const Index d = 2, k = 4;
  SmoothedConditionParams params;
  params.restarts = 6;
  params.seed = 11;
  const OptimizedDirections best =
      optimize_directions(d, k, OperatorMode::hermitian_real, params);

  // replicate the documented initialization draw
  double best_init = std::numeric_limits<double>::infinity();
  for (std::uint64_t r = 0; r < 6; ++r) {
    SubstreamRng rng(params.seed, r);
    DirectionSet dirs;
    dirs.p = Eigen::MatrixXcd(d, k);
    for (Index col = 0; col < k; ++col) {
      for (Index i = 0; i < d; ++i) {
        double re, im;
        rng.next_normal_pair(re, im);
        dirs.p(i, col) = Complex(re, im) / std::sqrt(2.0);
      }
      dirs.p.col(col) /= dirs.p.col(col).norm();
    }
    best_init = std::min(best_init, condition_number(dirs, OperatorMode::hermitian_real));
  }
  CHECK(best.condition <= best_init * (1.0 + 1e-12));
}

TEST_CASE("optimizer reaches the known optima at small restart budgets") {
  SmoothedConditionParams params;
  params.restarts = 12;
  params.seed = 2024;
  const OptimizedDirections herm =
      optimize_directions(2, 4, OperatorMode::hermitian_real, params);
  CHECK(herm.condition <= 2.02);
  CHECK(herm.condition >= 1.98);

  const OptimizedDirections unc =
      optimize_directions(2, 4, OperatorMode::complex_unconstrained, params);
  CHECK(unc.condition <= 3.03);
  CHECK(unc.condition >= 2.97);
}

TEST_CASE("random study: optimized value lower bounds the samples; modes and k ordering") {
  const Index trials = 2000;
  const RandomDirectionStudy herm4 =
      random_direction_study(2, 4, OperatorMode::hermitian_real, trials, 3);
  const RandomDirectionStudy unc4 =
      random_direction_study(2, 4, OperatorMode::complex_unconstrained, trials, 3);
  const RandomDirectionStudy herm16 =
      random_direction_study(2, 16, OperatorMode::hermitian_real, trials, 3);

  CHECK(herm4.min >= 2.0);
  CHECK(herm16.median < herm4.median);
  CHECK(herm4.median < unc4.median);

  // determinism
  const RandomDirectionStudy again =
      random_direction_study(2, 4, OperatorMode::hermitian_real, trials, 3);
  CHECK(again.min == herm4.min);
  CHECK(again.median == herm4.median);
}
