#pragma once

// Minimisation of E_p for a fixed exponent and the warm-started continuation
// over an increasing exponent schedule.

#include "lsi/functional.hpp"
#include "lsi/lbfgs.hpp"

#include <Eigen/SparseCholesky>

#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsi {

struct SolveReport {
  GridFunction u;
  Exponent p;
  int iterations = 0;
  double grad_norm = 0.0;
  double E_value = 0.0;
  double tol = 0.0;
  bool converged = false;
  bool line_search_failed = false;
  /// E_p after every accepted iterate (first entry: the initial guess).
  std::vector<double> E_history;
  /// Largest total variations of the concentration measures over all iterates.
  double max_tv_nu = 0.0;
  double max_tv_mu = 0.0;
  double wall_ms = 0.0;
};

struct MinimizeOptions {
  int memory = 10;
  int max_iter = 5000;
  /// Rebuild the Gauss-Newton seed matrix every this many iterations.
  int refresh_every = 1;
  bool precondition = true;
};

namespace detail {

/// Free unknowns are the interior nodes; boundary nodes stay at g.
struct FreeNodes {
  std::vector<int> nodes;
  SparseMatrix embed;  // all nodes x free nodes

  explicit FreeNodes(const Grid& g) {
    for (int k = 0; k < g.size(); ++k)
      if (!g.on_boundary(k)) nodes.push_back(k);
    embed.resize(g.size(), static_cast<Eigen::Index>(nodes.size()));
    std::vector<Triplet> t;
    t.reserve(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) t.emplace_back(nodes[i], static_cast<int>(i), 1.0);
    embed.setFromTriplets(t.begin(), t.end());
  }

  [[nodiscard]] Vector gather(const Vector& full) const {
    Vector out(static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t i = 0; i < nodes.size(); ++i) out[static_cast<Eigen::Index>(i)] = full[nodes[i]];
    return out;
  }

  void scatter(const Vector& free, Vector& full) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) full[nodes[i]] = free[static_cast<Eigen::Index>(i)];
  }
};

/// Gauss-Newton matrix J^T C_data J + alpha L^T C_pde L on the free nodes,
/// with C the positive diagonal curvature of the regularised norms.
class GaussNewtonSeed {
 public:
  GaussNewtonSeed(const InverseProblem& prob, const FreeNodes& free, double alpha, double p)
      : prob_(prob), free_(free), alpha_(alpha), p_(p) {
    l_free_ = prob_.l_omega() * free_.embed;
  }

  void refresh(const Vector& u_full) {
    const EpTerms t = evaluate_terms(u_full, prob_, alpha_, p_, true);
    const Vector cp = alpha_ * t.pde.curvature;
    SparseMatrix h = SparseMatrix(l_free_.transpose() * cp.asDiagonal() * l_free_);
    if (!prob_.gamma().empty()) {
      const SparseMatrix j = prob_.observation_jacobian(u_full) * free_.embed;
      h += SparseMatrix(j.transpose() * t.data.curvature.asDiagonal() * j);
    }
    double dmax = 0.0;
    for (Eigen::Index k = 0; k < h.rows(); ++k) dmax = std::max(dmax, h.coeff(k, k));
    const double shift = 1e-10 * (dmax > 0.0 ? dmax : 1.0);
    for (Eigen::Index k = 0; k < h.rows(); ++k) h.coeffRef(k, k) += shift;
    const Eigen::SparseMatrix<double> hc = h;
    if (!analysed_) {
      llt_.analyzePattern(hc);
      analysed_ = true;
    }
    llt_.factorize(hc);
    ok_ = llt_.info() == Eigen::Success;
  }

  [[nodiscard]] Vector apply_inverse(const Vector& v) const { return ok_ ? Vector(llt_.solve(v)) : v; }

 private:
  const InverseProblem& prob_;
  const FreeNodes& free_;
  double alpha_;
  double p_;
  SparseMatrix l_free_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> llt_;
  bool analysed_ = false;
  bool ok_ = false;
};

}  // namespace detail

inline double default_tolerance(double e_init) { return 1e-8 * (1.0 + e_init); }

/// Line-search quasi-Newton minimisation of E_p over grid functions equal to
/// g on the boundary. tol <= 0 selects 1e-8 * (1 + E_p(init)). Returns with
/// converged = false (no exception) when max_iter is exhausted or the line
/// search fails.
inline SolveReport minimize_Ep(const InverseProblem& prob, const FunctionalParams& params, const GridFunction& init,
                               double tol = 0.0, const MinimizeOptions& options = {}) {
  require_same_grid(prob.grid(), init.grid, "minimize_Ep");
  const double p = params.finite_p();
  const Grid& grid = prob.grid();
  for (int k = 0; k < grid.size(); ++k) {
    if (grid.on_boundary(k) && init.values[k] != prob.g().values[k])
      throw std::invalid_argument("minimize_Ep: initial guess must equal g on the boundary");
  }
  if (!init.finite()) throw std::invalid_argument("minimize_Ep: initial guess must be finite");

  const auto start = std::chrono::steady_clock::now();
  const detail::FreeNodes free(grid);
  Vector full = init.values;
  auto objective = [&](const Vector& x, Vector& grad) {
    free.scatter(x, full);
    const EpTerms t = evaluate_terms(full, prob, params.alpha, p);
    grad = free.gather(full_gradient(full, prob, params.alpha, t));
    return t.value;
  };

  SolveReport rep;
  rep.p = params.p;
  const double e0 = evaluate_terms(init.values, prob, params.alpha, p).value;
  rep.tol = tol > 0.0 ? tol : default_tolerance(e0);

  LbfgsOptions lopt;
  lopt.memory = options.memory;
  lopt.tol = rep.tol;
  lopt.max_iter = options.max_iter;
  lopt.refresh_every = options.refresh_every;

  detail::GaussNewtonSeed seed(prob, free, params.alpha, p);
  LbfgsPreconditioner pc;
  pc.refresh = [&](const Vector& x) {
    Vector u = init.values;
    free.scatter(x, u);
    seed.refresh(u);
  };
  pc.apply_inverse = [&](const Vector& v) { return seed.apply_inverse(v); };

  auto track = [&](const Vector& x) {
    Vector u = init.values;
    free.scatter(x, u);
    const EpTerms t = evaluate_terms(u, prob, params.alpha, p);
    double tv_nu = 0.0, tv_mu = 0.0;
    for (Eigen::Index i = 0; i < t.data.grad.size(); ++i) tv_nu += std::abs(t.data.grad[i]);
    for (Eigen::Index i = 0; i < t.pde.grad.size(); ++i) tv_mu += std::abs(t.pde.grad[i]);
    rep.max_tv_nu = std::max(rep.max_tv_nu, tv_nu);
    rep.max_tv_mu = std::max(rep.max_tv_mu, tv_mu);
  };

  const LbfgsResult res =
      lbfgs_minimize(objective, free.gather(init.values), lopt, options.precondition ? &pc : nullptr, track);

  rep.u = GridFunction(grid, init.values);
  free.scatter(res.x, rep.u.values);
  rep.iterations = res.iterations;
  rep.grad_norm = res.grad_norm;
  rep.E_value = res.f;
  rep.converged = res.converged;
  rep.line_search_failed = res.line_search_failed;
  rep.E_history = res.history;
  rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

struct ContinuationOptions {
  MinimizeOptions minimize;
  /// Stop once two successive sup-differences fall below
  /// cauchy_rtol * ||u||_inf.
  bool cauchy_stop = true;
  double cauchy_rtol = 1e-4;
};

struct ContinuationReport {
  std::vector<SolveReport> stages;
  /// ||u_{k+1} - u_k||_inf between successive stages.
  std::vector<double> sup_diffs;
  /// Discrete C^1 distance: max of value and gradient sup-differences.
  std::vector<double> c1_diffs;
  /// Sup-difference of discrete Hessians (diagnostic only).
  std::vector<double> hessian_diffs;
  GridFunction u_final;
  std::optional<ConcentrationPair> final_measures;
  bool all_converged = true;
  bool stopped_early = false;
};

inline void validate_schedule(const std::vector<double>& schedule) {
  if (schedule.empty()) throw std::invalid_argument("exponent schedule must not be empty");
  if (schedule.front() < 2.0) throw std::invalid_argument("exponent schedule must start at p >= 2");
  if (schedule.back() > kMaxExponent) throw std::invalid_argument("exponent schedule exceeds the maximum exponent");
  for (std::size_t i = 1; i < schedule.size(); ++i)
    if (!(schedule[i] > schedule[i - 1])) throw std::invalid_argument("exponent schedule must be strictly increasing");
}

/// Doubling schedule 2, 4, ..., p_max.
inline std::vector<double> doubling_schedule(double p_max = 64.0) {
  std::vector<double> s;
  for (double p = 2.0; p <= p_max; p *= 2.0) s.push_back(p);
  return s;
}

/// Minimises E_p along the schedule, each stage warm-started from the
/// previous minimiser; the first stage starts at the L-harmonic extension of g.
/// tol <= 0 uses the per-stage default tolerance.
inline ContinuationReport p_continuation(const InverseProblem& prob, double alpha, double delta,
                                         const std::vector<double>& schedule, double tol = 0.0,
                                         const ContinuationOptions& options = {}) {
  validate_schedule(schedule);
  const Grid& grid = prob.grid();
  ContinuationReport rep;
  GridFunction current = solve_dirichlet(prob.coef(), GridFunction(grid), prob.g());
  int small_in_a_row = 0;
  for (double p : schedule) {
    FunctionalParams params{alpha, delta, Exponent(p)};
    params.validate();
    SolveReport stage = minimize_Ep(prob, params, current, tol, options.minimize);
    rep.all_converged = rep.all_converged && stage.converged;
    if (!rep.stages.empty()) {
      const GridFunction& prev = rep.stages.back().u;
      const double dsup = (stage.u.values - prev.values).cwiseAbs().maxCoeff();
      const VectorGridFunction gp = gradient(prev);
      const VectorGridFunction gn = gradient(stage.u);
      const double dgrad = std::max((gn.dx.values - gp.dx.values).cwiseAbs().maxCoeff(),
                                    (gn.dy.values - gp.dy.values).cwiseAbs().maxCoeff());
      const HessianField hp = hessian(prev);
      const HessianField hn = hessian(stage.u);
      const double dhess = std::max({(hn.dxx.values - hp.dxx.values).cwiseAbs().maxCoeff(),
                                     (hn.dxy.values - hp.dxy.values).cwiseAbs().maxCoeff(),
                                     (hn.dyy.values - hp.dyy.values).cwiseAbs().maxCoeff()});
      rep.sup_diffs.push_back(dsup);
      rep.c1_diffs.push_back(std::max(dsup, dgrad));
      rep.hessian_diffs.push_back(dhess);
      small_in_a_row = dsup < options.cauchy_rtol * stage.u.sup_norm() ? small_in_a_row + 1 : 0;
    }
    current = stage.u;
    rep.stages.push_back(std::move(stage));
    if (options.cauchy_stop && small_in_a_row >= 2) {
      rep.stopped_early = rep.stages.size() < schedule.size();
      break;
    }
  }
  rep.u_final = current;
  const SolveReport& last = rep.stages.back();
  rep.final_measures = concentration_measures(last.u, prob, FunctionalParams{alpha, delta, last.p});
  return rep;
}

/// max|phi| + max|Dphi| + max|D^2 phi| over the grid.
inline double c2_size(const GridFunction& phi) {
  const VectorGridFunction d1 = gradient(phi);
  const HessianField d2 = hessian(phi);
  const double g = std::max(d1.dx.sup_norm(), d1.dy.sup_norm());
  const double h = std::max({d2.dxx.sup_norm(), d2.dxy.sup_norm(), d2.dyy.sup_norm()});
  return phi.sup_norm() + g + h;
}

/// Weak-form residual of the Euler-Lagrange system: for each test function
/// phi (vanishing on the boundary),
///   int (K_r phi + K_p . Dphi) dnu + alpha int L[phi] dmu,
/// normalised by the C^2 size of phi; the maximum over the basis.
inline double el_residual(const GridFunction& u, const ConcentrationMeasure& nu, const ConcentrationMeasure& mu,
                          const InverseProblem& prob, const FunctionalParams& params,
                          const std::vector<GridFunction>& test_basis) {
  require_same_grid(prob.grid(), u.grid, "el_residual");
  params.validate();
  const Grid& grid = prob.grid();
  const std::vector<Linearisation> lin = observe_linearisation(prob.K(), u, prob.gamma());
  double worst = 0.0;
  for (const GridFunction& phi : test_basis) {
    require_same_grid(grid, phi.grid, "el_residual test function");
    for (int k = 0; k < grid.size(); ++k)
      if (grid.on_boundary(k) && phi.values[k] != 0.0)
        throw std::invalid_argument("el_residual: test function must vanish on the boundary");
    const double size = c2_size(phi);
    if (size == 0.0) continue;
    const VectorGridFunction dphi = gradient(phi);
    Vector q(grid.size());
    q.setZero();
    for (std::size_t s = 0; s < prob.gamma().size(); ++s) {
      const int k = prob.gamma().nodes[s];
      q[k] = lin[s].kr * phi.values[k] + lin[s].kp[0] * dphi.dx.values[k] + lin[s].kp[1] * dphi.dy.values[k];
    }
    const Vector lphi = apply_L(prob.coef(), phi).values;
    const double value = nu.integrate(q) + params.alpha * mu.integrate(lphi);
    worst = std::max(worst, std::abs(value) / size);
  }
  return worst;
}

}  // namespace lsi
