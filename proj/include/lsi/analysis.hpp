#pragma once

// Diagnostics for minimisers of E_p: essential limsup, localisation of the
// concentration measures, error bounds, dual residuals, the weak source
// error and the non-uniqueness construction for L = Laplacian.

#include "lsi/optimizer.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsi {

// ---------------------------------------------------------------------------
// Essential limsup

/// Radii (4h, 2h, 1.5h) with h = max(hx, hy).
inline std::vector<double> default_limsup_radii(const Grid& g) {
  const double h = std::max(g.hx(), g.hy());
  return {4.0 * h, 2.0 * h, 1.5 * h};
}

/// Discrete f*: at each node of the set, the max of f over set nodes inside
/// the closed ball of the smallest radius. f is indexed like base.nodes.
inline Vector essential_limsup(const Grid& g, const MeasurementSet& base, const Vector& f,
                               const std::vector<double>& radii) {
  if (static_cast<std::size_t>(f.size()) != base.size())
    throw std::invalid_argument("essential_limsup: f length does not match the measurement set");
  if (radii.empty()) throw std::invalid_argument("essential_limsup: no radii");
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (!(radii[i] < radii[i - 1])) throw std::invalid_argument("essential_limsup: radii must be decreasing");
  const double rmin = radii.back();
  if (!(rmin >= 1.01 * std::max(g.hx(), g.hy())))
    throw std::invalid_argument("essential_limsup: smallest radius below 1.01 * grid spacing");
  const std::size_t n = base.size();
  Vector out(static_cast<Eigen::Index>(n));
  const double r2 = rmin * rmin;
  for (std::size_t a = 0; a < n; ++a) {
    const Point pa = g.node(base.nodes[a]);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < n; ++b) {
      const Point pb = g.node(base.nodes[b]);
      const double dx = pa.x - pb.x, dy = pa.y - pb.y;
      if (dx * dx + dy * dy <= r2) best = std::max(best, f[static_cast<Eigen::Index>(b)]);
    }
    out[static_cast<Eigen::Index>(a)] = best;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Localisation

struct LocalizationReport {
  double p = 0.0;
  double eta = 0.0;
  double mass_fraction = 1.0;
  double max_residual = 0.0;
};

/// Fraction of TV(nu) carried by nodes with |res| >= (1 - eta) max|res|.
inline LocalizationReport support_localization(const ConcentrationMeasure& nu, const Vector& residual, double eta,
                                               double p = 0.0) {
  if (static_cast<std::size_t>(residual.size()) != nu.base.size())
    throw std::invalid_argument("support_localization: residual length does not match the measure");
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("support_localization: eta must lie in (0, 1)");
  LocalizationReport rep;
  rep.p = p;
  rep.eta = eta;
  rep.max_residual = residual.size() ? residual.cwiseAbs().maxCoeff() : 0.0;
  const double tv = nu.total_variation();
  if (tv == 0.0) return rep;
  const double level = (1.0 - eta) * rep.max_residual;
  double band = 0.0;
  for (std::size_t i = 0; i < nu.base.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    if (std::abs(residual[k]) >= level) band += nu.base.weights[i] * std::abs(nu.density[k]);
  }
  rep.mass_fraction = std::clamp(band / tv, 0.0, 1.0);
  return rep;
}

/// nu_k for f_k with respect to the base set, for each k, and the share of
/// its mass near the maximum of |f_inf|.
inline std::vector<LocalizationReport> concentration_limit_test(const std::vector<Vector>& f_sequence,
                                                                const Vector& f_inf, const MeasurementSet& base,
                                                                const std::vector<double>& k_schedule,
                                                                double eta = 0.05) {
  if (f_sequence.size() != k_schedule.size())
    throw std::invalid_argument("concentration_limit_test: one function per exponent required");
  if (static_cast<std::size_t>(f_inf.size()) != base.size())
    throw std::invalid_argument("concentration_limit_test: limit length does not match the base set");
  if (f_inf.cwiseAbs().maxCoeff() == 0.0)
    throw std::invalid_argument("concentration_limit_test: limit function must not vanish identically");
  std::vector<LocalizationReport> out;
  for (std::size_t s = 0; s < k_schedule.size(); ++s) {
    const double k = k_schedule[s];
    Exponent(k).validate();
    if (static_cast<std::size_t>(f_sequence[s].size()) != base.size())
      throw std::invalid_argument("concentration_limit_test: sequence element has the wrong length");
    const RegularisedNorm r = regularised_norm(f_sequence[s], base.weights, k);
    out.push_back(support_localization({base, r.density}, f_inf, eta, k));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Error bounds

enum class NormMode { Lp, Sup };

struct ErrorBoundReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool holds = false;
};

inline void require_boundary_match(const GridFunction& u, const GridFunction& g, const char* what) {
  for (int k = 0; k < u.grid.size(); ++k)
    if (u.grid.on_boundary(k) && u.values[k] != g.values[k])
      throw std::invalid_argument(std::string(what) + " must equal g on the boundary");
}

/// ||Q[u_sol] - Q[u0]|| on gamma against 2 delta + alpha ||L[u0]|| on the
/// domain, both normalised p-norms (mode Lp) or sup norms (mode Sup).
/// Throws if the data are farther than delta from Q[u0].
inline ErrorBoundReport check_error_bound(const GridFunction& u_sol, const GridFunction& u0,
                                          const InverseProblem& prob, const FunctionalParams& params,
                                          NormMode mode, double tolerance = 1e-6) {
  params.validate();
  require_same_grid(prob.grid(), u_sol.grid, "check_error_bound");
  require_same_grid(prob.grid(), u0.grid, "check_error_bound");
  require_boundary_match(u0, prob.g(), "exact solution");
  const Vector q0 = prob.observe(u0.values);
  if (q0.size() && (prob.q_delta() - q0).cwiseAbs().maxCoeff() > params.delta)
    throw std::invalid_argument("check_error_bound: data differ from Q[u0] by more than delta");
  const Exponent e = mode == NormMode::Sup ? Exponent::infinity() : params.p;
  const Vector d = prob.observe(u_sol.values) - q0;
  ErrorBoundReport rep;
  rep.lhs = normalized_lp_norm(d, prob.gamma().weights, e);
  rep.rhs = 2.0 * params.delta + params.alpha * normalized_lp_norm(prob.pde_residual(u0.values), prob.omega().weights, e);
  rep.slack = rep.rhs - rep.lhs;
  rep.holds = rep.lhs <= rep.rhs + tolerance;
  return rep;
}

// ---------------------------------------------------------------------------
// Test functions

/// (1 - s^2)^2 on |s| < 1, zero outside; C^1 across |s| = 1.
inline double quartic_bump_1d(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  const double t = 1.0 - s * s;
  return t * t;
}

inline GridFunction quartic_bump(const Grid& g, Point centre, double radius) {
  return GridFunction::sample(g, [=](double x, double y) {
    return quartic_bump_1d((x - centre.x) / radius) * quartic_bump_1d((y - centre.y) / radius);
  });
}

/// Tensor bumps centred at every (cx, cy) pair.
inline std::vector<GridFunction> bump_lattice(const Grid& g, const std::vector<double>& cx,
                                              const std::vector<double>& cy, double radius) {
  std::vector<GridFunction> out;
  for (double y : cy)
    for (double x : cx) out.push_back(quartic_bump(g, {x, y}, radius));
  return out;
}

/// Nine bumps on the (1/4, 1/2, 3/4) lattice of the rectangle.
inline std::vector<GridFunction> interior_test_basis(const Grid& g) {
  const Rect& r = g.rect();
  const double w = r.bx - r.ax, h = r.by - r.ay;
  return bump_lattice(g, {r.ax + 0.25 * w, r.ax + 0.5 * w, r.ax + 0.75 * w},
                      {r.ay + 0.25 * h, r.ay + 0.5 * h, r.ay + 0.75 * h}, 0.2 * std::min(w, h));
}

/// True when phi and its discrete gradient vanish at every node of `nodes`
/// and on the boundary.
inline bool vanishes_with_gradient(const GridFunction& phi, const std::vector<int>& nodes) {
  const VectorGridFunction d = gradient(phi);
  auto zero_at = [&](int k) { return phi.values[k] == 0.0 && d.dx.values[k] == 0.0 && d.dy.values[k] == 0.0; };
  for (int k : nodes)
    if (!zero_at(k)) return false;
  for (int k = 0; k < phi.grid.size(); ++k)
    if (phi.grid.on_boundary(k) && !zero_at(k)) return false;
  return true;
}

/// Candidate bumps (the interior lattice and a 3x3 lattice at relative
/// positions 0.14, 0.5, 0.86 with relative radius 0.07), keeping those that
/// vanish with their gradient on gamma and on the boundary.
inline std::vector<GridFunction> exterior_test_basis(const Grid& g, const MeasurementSet& gamma) {
  const Rect& r = g.rect();
  const double w = r.bx - r.ax, h = r.by - r.ay;
  std::vector<GridFunction> candidates = interior_test_basis(g);
  for (GridFunction& phi : bump_lattice(g, {r.ax + 0.14 * w, r.ax + 0.5 * w, r.ax + 0.86 * w},
                                        {r.ay + 0.14 * h, r.ay + 0.5 * h, r.ay + 0.86 * h}, 0.07 * std::min(w, h)))
    candidates.push_back(std::move(phi));
  std::vector<GridFunction> out;
  for (GridFunction& phi : candidates)
    if (vanishes_with_gradient(phi, gamma.nodes)) out.push_back(std::move(phi));
  return out;
}

/// Nine bumps inside a disc: lattice spacing and radius 0.32 * disc radius.
inline std::vector<GridFunction> disc_test_basis(const Grid& g, Point centre, double radius) {
  const double s = 0.32 * radius;
  return bump_lattice(g, {centre.x - s, centre.x, centre.x + s}, {centre.y - s, centre.y, centre.y + s}, s);
}

/// max|phi| + max|Dphi| + max|D^2 phi|.
inline double c2_norm(const GridFunction& phi) { return c2_size(phi); }

/// Area-weighted sum of |phi|, |Dphi| and |D^2 phi| (all four Hessian entries).
inline double w21_norm(const GridFunction& phi) {
  const MeasurementSet dm = domain_measure(phi.grid);
  const VectorGridFunction d1 = gradient(phi);
  const HessianField d2 = hessian(phi);
  double s = 0.0;
  for (std::size_t i = 0; i < dm.size(); ++i) {
    const int k = dm.nodes[i];
    s += dm.weights[i] * (std::abs(phi.values[k]) + std::abs(d1.dx.values[k]) + std::abs(d1.dy.values[k]) +
                          std::abs(d2.dxx.values[k]) + 2.0 * std::abs(d2.dxy.values[k]) + std::abs(d2.dyy.values[k]));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Dual equation and source error

/// max over the basis of |int L[phi] dmu| / C^2 size of phi. Every basis
/// element must vanish, with its discrete gradient, on gamma and on the
/// boundary.
inline double dual_residual(const ConcentrationMeasure& mu, const EllipticCoefficients& coef,
                            const MeasurementSet& gamma, const std::vector<GridFunction>& test_basis) {
  double worst = 0.0;
  for (std::size_t b = 0; b < test_basis.size(); ++b) {
    const GridFunction& phi = test_basis[b];
    require_same_grid(coef.grid(), phi.grid, "dual_residual");
    if (!vanishes_with_gradient(phi, gamma.nodes))
      throw std::invalid_argument("dual_residual: test function " + std::to_string(b) +
                                  " does not vanish with its gradient on gamma and the boundary");
    const double size = c2_size(phi);
    if (size == 0.0) continue;
    worst = std::max(worst, std::abs(mu.integrate(apply_L(coef, phi).values)) / size);
  }
  return worst;
}

/// max over the basis of |int (f_approx - f0) phi| / ||phi||_{W^{2,1}},
/// integrals with area weights. Basis elements must vanish off the region.
inline double source_weak_error(const GridFunction& f_approx, const GridFunction& f0, const MeasurementSet& region,
                                const std::vector<GridFunction>& test_basis) {
  require_same_grid(f_approx.grid, f0.grid, "source_weak_error");
  if (test_basis.empty()) throw std::invalid_argument("source_weak_error: empty test basis");
  const Grid& g = f0.grid;
  std::vector<char> inside(static_cast<std::size_t>(g.size()), 0);
  for (int k : region.nodes) inside[static_cast<std::size_t>(k)] = 1;
  const MeasurementSet dm = domain_measure(g);
  const Vector diff = f_approx.values - f0.values;
  double worst = 0.0;
  for (std::size_t b = 0; b < test_basis.size(); ++b) {
    const GridFunction& phi = test_basis[b];
    require_same_grid(g, phi.grid, "source_weak_error");
    for (int k = 0; k < g.size(); ++k)
      if (!inside[static_cast<std::size_t>(k)] && phi.values[k] != 0.0)
        throw std::invalid_argument("source_weak_error: test function " + std::to_string(b) +
                                    " is not supported in the region");
    const double norm = w21_norm(phi);
    if (norm == 0.0) continue;
    double s = 0.0;
    for (std::size_t i = 0; i < dm.size(); ++i) s += dm.weights[i] * diff[dm.nodes[i]] * phi.values[dm.nodes[i]];
    worst = std::max(worst, std::abs(s / dm.total()) / norm);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Non-uniqueness for L = Laplacian, Q = normal derivative on the boundary

struct SourcePair {
  GridFunction f;
  GridFunction u;
};

struct NonuniquenessResult {
  SourcePair first;
  SourcePair second;
  /// max |u1 - u2| over boundary nodes.
  double trace_gap = 0.0;
  /// max |d_n u1 - d_n u2| over boundary nodes (discrete one-sided normal
  /// derivative), and the same divided by h^2.
  double normal_gap = 0.0;
  double normal_constant = 0.0;
  /// max |f1 - f2| over interior nodes, next to max |h|.
  double source_gap = 0.0;
  double h_sup = 0.0;
};

namespace detail {

inline Vector normal_derivatives(const GridFunction& u) {
  const Grid& g = u.grid;
  const VectorGridFunction d = gradient(u);
  Vector out = Vector::Zero(g.size());
  for (int k = 0; k < g.size(); ++k) {
    if (!g.on_boundary(k)) continue;
    const Point n = g.outward_normal(k);
    out[k] = n.x * d.dx.values[k] + n.y * d.dy.values[k];
  }
  return out;
}

/// Sparse rows of the discrete normal derivative at every boundary node.
inline SparseMatrix normal_derivative_matrix(const Grid& g) {
  const DifferenceOperators ops(g);
  std::vector<double> nx(static_cast<std::size_t>(g.size()), 0.0), ny(nx);
  for (int k = 0; k < g.size(); ++k) {
    if (!g.on_boundary(k)) continue;
    const Point n = g.outward_normal(k);
    nx[static_cast<std::size_t>(k)] = n.x;
    ny[static_cast<std::size_t>(k)] = n.y;
  }
  const Vector vx = Eigen::Map<const Vector>(nx.data(), g.size());
  const Vector vy = Eigen::Map<const Vector>(ny.data(), g.size());
  SparseMatrix m = vx.asDiagonal() * ops.dx;
  m += SparseMatrix(vy.asDiagonal() * ops.dy);
  return m;
}

}  // namespace detail

/// Two sources with matching boundary trace and normal derivative:
/// (f1, u1) with f1 = L_h u1, and u2 = u1 + w + z where L_h w = h, w = 0 on
/// the boundary, and z minimises ||L_h z||^2 over interior nodes subject to
/// z = 0 and d_n z = -d_n w on the boundary; f2 = L_h u2.
inline NonuniquenessResult nonuniqueness_pair(const EllipticCoefficients& coef, const GridFunction& u1,
                                              const GridFunction& h, double harmonic_tol = 1e-10) {
  const Grid& g = coef.grid();
  require_same_grid(g, u1.grid, "nonuniqueness_pair");
  require_same_grid(g, h.grid, "nonuniqueness_pair");
  const GridFunction lh = apply_L(coef, h);
  double lh_max = 0.0;
  for (int k = 0; k < g.size(); ++k)
    if (!g.on_boundary(k)) lh_max = std::max(lh_max, std::abs(lh.values[k]));
  if (lh_max > harmonic_tol * (1.0 + h.sup_norm()))
    throw std::invalid_argument("nonuniqueness_pair: h is not discretely harmonic");

  NonuniquenessResult res;
  const GridFunction zero(g);
  auto interior_only = [&](GridFunction f) {
    for (int k = 0; k < g.size(); ++k)
      if (g.on_boundary(k)) f.values[k] = 0.0;
    return f;
  };
  res.first = {interior_only(apply_L(coef, u1)), u1};

  const GridFunction w = solve_dirichlet(coef, h, zero);

  // Equality-constrained least squares for z on the interior unknowns.
  std::vector<int> free_nodes, bnodes;
  std::vector<int> col(static_cast<std::size_t>(g.size()), -1);
  for (int k = 0; k < g.size(); ++k) {
    if (g.on_boundary(k)) {
      bnodes.push_back(k);
    } else {
      col[static_cast<std::size_t>(k)] = static_cast<int>(free_nodes.size());
      free_nodes.push_back(k);
    }
  }
  const int nf = static_cast<int>(free_nodes.size());
  const SparseMatrix lfull = assemble_L_matrix(coef, g, false).matrix;
  const SparseMatrix dn = detail::normal_derivative_matrix(g);
  auto restrict_rows_cols = [&](const SparseMatrix& m, const std::vector<int>& rows) {
    std::vector<Triplet> t;
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (SparseMatrix::InnerIterator it(m, rows[r]); it; ++it) {
        const int c = col[static_cast<std::size_t>(it.col())];
        if (c >= 0) t.emplace_back(static_cast<int>(r), c, it.value());
      }
    SparseMatrix out(static_cast<Eigen::Index>(rows.size()), nf);
    out.setFromTriplets(t.begin(), t.end());
    return out;
  };
  const SparseMatrix a = restrict_rows_cols(lfull, free_nodes);
  // Corner rows involve boundary values only and are dropped.
  std::vector<int> crow;
  for (int k : bnodes) {
    bool touches = false;
    for (SparseMatrix::InnerIterator it(dn, k); it; ++it)
      if (col[static_cast<std::size_t>(it.col())] >= 0 && it.value() != 0.0) touches = true;
    if (touches) crow.push_back(k);
  }
  const SparseMatrix c = restrict_rows_cols(dn, crow);
  const Vector dn_w = detail::normal_derivatives(w);
  Vector rhs_c(static_cast<Eigen::Index>(crow.size()));
  for (std::size_t r = 0; r < crow.size(); ++r) rhs_c[static_cast<Eigen::Index>(r)] = -dn_w[crow[r]];

  // Near each corner the one-sided normal-derivative rows are linearly
  // dependent, so the constraints are imposed by a heavily weighted
  // least-squares penalty instead of exactly.
  const SparseMatrix ata = SparseMatrix(a.transpose() * a);
  const SparseMatrix ctc = SparseMatrix(c.transpose() * c);
  auto max_diag = [](const SparseMatrix& m) {
    double d = 0.0;
    for (Eigen::Index k = 0; k < m.rows(); ++k) d = std::max(d, m.coeff(k, k));
    return d;
  };
  const double rho = 1e8 * max_diag(ata) / max_diag(ctc);
  const Eigen::SparseMatrix<double> normal = SparseMatrix(ata + rho * ctc);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(normal);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("nonuniqueness_pair: constrained solve failed");
  const Vector sol = ldlt.solve(Vector(rho * (c.transpose() * rhs_c)));
  GridFunction z(g);
  for (int i = 0; i < nf; ++i) z.values[free_nodes[static_cast<std::size_t>(i)]] = sol[i];

  GridFunction u2(g, u1.values + w.values + z.values);
  res.second = {interior_only(apply_L(coef, u2)), u2};

  const Vector n1 = detail::normal_derivatives(u1);
  const Vector n2 = detail::normal_derivatives(u2);
  const double hh = std::max(g.hx(), g.hy());
  for (int k : bnodes) {
    res.trace_gap = std::max(res.trace_gap, std::abs(u1.values[k] - u2.values[k]));
    res.normal_gap = std::max(res.normal_gap, std::abs(n1[k] - n2[k]));
  }
  res.normal_constant = res.normal_gap / (hh * hh);
  for (int k = 0; k < g.size(); ++k) {
    if (g.on_boundary(k)) continue;
    res.source_gap = std::max(res.source_gap, std::abs(res.first.f.values[k] - res.second.f.values[k]));
  }
  res.h_sup = h.sup_norm();
  return res;
}

}  // namespace lsi
