#pragma once

// Limited-memory BFGS with a backtracking (sufficient decrease) line search.
// The initial inverse Hessian may be supplied by a preconditioner that is
// refreshed during the iteration.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

namespace lsi {

struct LbfgsOptions {
  int memory = 10;
  double tol = 1e-8;
  int max_iter = 5000;
  double armijo = 1e-4;
  int max_line_search = 60;
  /// Refresh the preconditioner every this many iterations (0: only at start).
  int refresh_every = 1;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
  /// Objective value at the start and after every accepted step.
  std::vector<double> history;
};

/// Objective: double(const VectorXd& x, VectorXd& grad).
using LbfgsObjective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// Approximate inverse Hessian action; `refresh` rebuilds it at x.
struct LbfgsPreconditioner {
  std::function<void(const Eigen::VectorXd&)> refresh;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> apply_inverse;
};

inline LbfgsResult lbfgs_minimize(const LbfgsObjective& objective, Eigen::VectorXd x0, const LbfgsOptions& opt,
                                  const LbfgsPreconditioner* precond = nullptr,
                                  const std::function<void(const Eigen::VectorXd&)>& on_iterate = {}) {
  using Eigen::VectorXd;
  LbfgsResult res;
  res.x = std::move(x0);
  VectorXd g(res.x.size());
  res.f = objective(res.x, g);
  res.grad_norm = g.norm();
  res.history.push_back(res.f);
  if (on_iterate) on_iterate(res.x);

  std::deque<VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  const bool have_pc = precond && precond->refresh && precond->apply_inverse;
  auto apply_h0 = [&](const VectorXd& v) -> VectorXd { return have_pc ? precond->apply_inverse(v) : v; };

  VectorXd x_new(res.x.size()), g_new(res.x.size());
  while (true) {
    if (res.grad_norm <= opt.tol) {
      res.converged = true;
      break;
    }
    if (res.iterations >= opt.max_iter) break;
    if (have_pc && (res.iterations == 0 || (opt.refresh_every > 0 && res.iterations % opt.refresh_every == 0)))
      precond->refresh(res.x);

    // Two-loop recursion.
    VectorXd q = g;
    const std::size_t m = s_hist.size();
    std::vector<double> a(m);
    for (std::size_t i = m; i-- > 0;) {
      a[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= a[i] * y_hist[i];
    }
    VectorXd r = apply_h0(q);
    if (m > 0) {
      const VectorXd hy = apply_h0(y_hist.back());
      const double yhy = y_hist.back().dot(hy);
      if (yhy > 0.0) r *= s_hist.back().dot(y_hist.back()) / yhy;
    }
    for (std::size_t i = 0; i < m; ++i) {
      const double b = rho_hist[i] * y_hist[i].dot(r);
      r += (a[i] - b) * s_hist[i];
    }
    VectorXd d = -r;
    double gtd = g.dot(d);
    if (!(gtd < 0.0)) {
      s_hist.clear(), y_hist.clear(), rho_hist.clear();
      d = -apply_h0(g);
      gtd = g.dot(d);
      if (!(gtd < 0.0)) {
        d = -g;
        gtd = -g.squaredNorm();
      }
    }

    // Backtracking with safeguarded quadratic interpolation.
    double t = 1.0;
    bool accepted = false;
    double f_new = 0.0;
    for (int ls = 0; ls < opt.max_line_search; ++ls) {
      x_new = res.x + t * d;
      f_new = objective(x_new, g_new);
      if (std::isfinite(f_new)) {
        if (f_new <= res.f + opt.armijo * t * gtd) {
          accepted = true;
          break;
        }
        // Predicted decrease below rounding level of f: accept a
        // non-increasing step that reduces the gradient.
        const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(res.f);
        if (-t * gtd <= noise && f_new <= res.f && g_new.norm() < res.grad_norm) {
          accepted = true;
          break;
        }
        const double denom = 2.0 * (f_new - res.f - t * gtd);
        double t_next = denom > 0.0 ? -gtd * t * t / denom : 0.5 * t;
        t = std::clamp(t_next, 0.1 * t, 0.5 * t);
      } else {
        t *= 0.1;
      }
    }
    if (!accepted) {
      if (m > 0) {
        // Retry once from a steepest-descent-like restart before giving up.
        s_hist.clear(), y_hist.clear(), rho_hist.clear();
        if (have_pc) precond->refresh(res.x);
        continue;
      }
      res.line_search_failed = true;
      break;
    }

    VectorXd s = x_new - res.x;
    VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * std::sqrt(s.squaredNorm() * y.squaredNorm()) && sy > 0.0) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front(), y_hist.pop_front(), rho_hist.pop_front();
      }
    }
    res.x.swap(x_new);
    g.swap(g_new);
    res.f = f_new;
    res.grad_norm = g.norm();
    ++res.iterations;
    res.history.push_back(res.f);
    if (on_iterate) on_iterate(res.x);
  }
  return res;
}

}  // namespace lsi
