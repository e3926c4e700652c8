#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace muchapro {

struct LbfgsOptions {
  int memory = 10;
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;
  double armijo_c1 = 1e-4;
  int max_line_search_steps = 30;
  /// Stop after this many consecutive iterations without meaningful progress.
  int stall_iterations = 10;
  double stall_tolerance = 1e-13;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;  // gradient tolerance reached
};

/// Limited-memory BFGS with two-loop recursion and Armijo backtracking.
/// The callback evaluates the objective and, only when `grad` is non-null,
/// the gradient; line-search probes are objective-only, which matters when
/// gradients are expensive (finite differences). It may return +infinity to
/// reject a point. Terminates on the gradient tolerance, the iteration cap,
/// a failed line search, or progress stall.
inline LbfgsResult lbfgs_minimize(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>& fg,
    Eigen::VectorXd x0, const LbfgsOptions& opt = {}) {
  const Eigen::Index n = x0.size();
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd g(n), g_new(n), x_new(n), direction(n);
  double f = fg(x, &g);

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  LbfgsResult res;
  int iter = 0;
  int stalled = 0;
  for (; iter < opt.max_iterations; ++iter) {
    if (!std::isfinite(f)) break;
    if (g.norm() < opt.gradient_tolerance) {
      res.converged = true;
      break;
    }

    // two-loop recursion
    direction = -g;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(direction);
      direction -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) {
      const auto& s = s_hist.back();
      const auto& y = y_hist.back();
      direction *= s.dot(y) / y.squaredNorm();
    }
    for (size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(direction);
      direction += (alpha[i] - beta) * s_hist[i];
    }

    double slope = g.dot(direction);
    if (!(slope < 0.0)) {  // not a descent direction; restart from steepest descent
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      direction = -g;
      slope = -g.squaredNorm();
      if (!(slope < 0.0)) break;
    }

    double step = s_hist.empty() ? std::min(1.0, 1.0 / std::max(g.norm(), 1e-12)) : 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < opt.max_line_search_steps; ++ls) {
      x_new = x + step * direction;
      f_new = fg(x_new, nullptr);
      if (std::isfinite(f_new) && f_new <= f + opt.armijo_c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no further progress possible at this scale

    if (f - f_new <= opt.stall_tolerance * (1.0 + std::abs(f))) {
      if (++stalled >= opt.stall_iterations) {
        x = x_new;
        f = f_new;
        ++iter;
        break;
      }
    } else {
      stalled = 0;
    }

    f_new = fg(x_new, &g_new);  // gradient only at the accepted point

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {  // keep the inverse Hessian positive definite
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x = x_new;
    g = g_new;
    f = f_new;
  }

  res.x = std::move(x);
  res.f = f;
  res.iterations = iter;
  return res;
}

}  // namespace muchapro
