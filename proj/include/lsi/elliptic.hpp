#pragma once

// The non-divergence operator L[u] = A:D^2u + b.Du + cu on a grid: nodewise
// application, sparse assembly, its discrete adjoint and the forward
// Dirichlet solver.

#include "lsi/grid.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

namespace lsi {

class EllipticCoefficients {
 public:
  /// Validates ellipticity (min eigenvalue of A >= a0 > 0 at every node),
  /// c <= 0, finiteness and a common grid.
  EllipticCoefficients(GridFunction a11, GridFunction a12, GridFunction a22, GridFunction b1,
                       GridFunction b2, GridFunction c, double a0)
      : a11_(std::move(a11)),
        a12_(std::move(a12)),
        a22_(std::move(a22)),
        b1_(std::move(b1)),
        b2_(std::move(b2)),
        c_(std::move(c)),
        a0_(a0) {
    const Grid& g = a11_.grid;
    for (const GridFunction* f : {&a12_, &a22_, &b1_, &b2_, &c_}) require_same_grid(g, f->grid, "elliptic coefficients");
    if (!(a0_ > 0.0)) throw std::invalid_argument("ellipticity constant a0 must be positive");
    for (const GridFunction* f : {&a11_, &a12_, &a22_, &b1_, &b2_, &c_})
      if (!f->finite()) throw std::invalid_argument("elliptic coefficients must be finite");
    for (int k = 0; k < g.size(); ++k) {
      const double lmin = min_eigenvalue(k);
      if (lmin < a0_) {
        std::ostringstream os;
        os << "ellipticity violated at node " << k << ": min eigenvalue " << lmin << " < a0 = " << a0_;
        throw std::invalid_argument(os.str());
      }
      if (c_.values[k] > 0.0) {
        std::ostringstream os;
        os << "zeroth-order coefficient must satisfy c <= 0; c = " << c_.values[k] << " at node " << k;
        throw std::invalid_argument(os.str());
      }
    }
  }

  /// A = I, b = 0, c = 0.
  static EllipticCoefficients laplacian(const Grid& g) {
    return {GridFunction::constant(g, 1.0), GridFunction(g), GridFunction::constant(g, 1.0),
            GridFunction(g),                GridFunction(g), GridFunction(g),
            1.0};
  }

  [[nodiscard]] const Grid& grid() const { return a11_.grid; }
  [[nodiscard]] const GridFunction& a11() const { return a11_; }
  [[nodiscard]] const GridFunction& a12() const { return a12_; }
  [[nodiscard]] const GridFunction& a22() const { return a22_; }
  [[nodiscard]] const GridFunction& b1() const { return b1_; }
  [[nodiscard]] const GridFunction& b2() const { return b2_; }
  [[nodiscard]] const GridFunction& c() const { return c_; }
  [[nodiscard]] double a0() const { return a0_; }

  [[nodiscard]] double min_eigenvalue(int k) const {
    const double p = a11_.values[k];
    const double q = a12_.values[k];
    const double r = a22_.values[k];
    return 0.5 * (p + r) - std::sqrt(0.25 * (p - r) * (p - r) + q * q);
  }

 private:
  GridFunction a11_, a12_, a22_, b1_, b2_, c_;
  double a0_;
};

/// Converts div(A Du) + b.Du + cu to non-divergence form by moving the
/// discrete divergence of A into the drift.
inline EllipticCoefficients from_divergence_form(const GridFunction& a11, const GridFunction& a12,
                                                 const GridFunction& a22, const GridFunction& b1,
                                                 const GridFunction& b2, const GridFunction& c,
                                                 double a0) {
  const VectorGridFunction d11 = gradient(a11);
  const VectorGridFunction d12 = gradient(a12);
  const VectorGridFunction d22 = gradient(a22);
  GridFunction nb1(a11.grid, b1.values + d11.dx.values + d12.dy.values);
  GridFunction nb2(a11.grid, b2.values + d12.dx.values + d22.dy.values);
  return {a11, a12, a22, nb1, nb2, c, a0};
}

inline GridFunction apply_L(const EllipticCoefficients& coef, const GridFunction& u) {
  require_same_grid(coef.grid(), u.grid, "apply_L");
  const HessianField d2 = hessian(u);
  const VectorGridFunction d1 = gradient(u);
  GridFunction out(u.grid);
  out.values = coef.a11().values.cwiseProduct(d2.dxx.values) +
               2.0 * coef.a12().values.cwiseProduct(d2.dxy.values) +
               coef.a22().values.cwiseProduct(d2.dyy.values) +
               coef.b1().values.cwiseProduct(d1.dx.values) +
               coef.b2().values.cwiseProduct(d1.dy.values) + coef.c().values.cwiseProduct(u.values);
  return out;
}

struct LinearOperatorMatrix {
  SparseMatrix matrix;
  bool dirichlet = false;
};

/// Sparse matrix of L on all nodes; with `dirichlet` the boundary rows are
/// replaced by identity rows.
inline LinearOperatorMatrix assemble_L_matrix(const EllipticCoefficients& coef, const Grid& grid,
                                              bool dirichlet) {
  require_same_grid(coef.grid(), grid, "assemble_L_matrix");
  const DifferenceOperators ops(grid);
  auto diag = [](const GridFunction& f) { return f.values.asDiagonal(); };
  SparseMatrix m = diag(coef.a11()) * ops.dxx;
  const Vector a12x2 = 2.0 * coef.a12().values;
  m += SparseMatrix(a12x2.asDiagonal() * ops.dxy);
  m += SparseMatrix(diag(coef.a22()) * ops.dyy);
  m += SparseMatrix(diag(coef.b1()) * ops.dx);
  m += SparseMatrix(diag(coef.b2()) * ops.dy);
  SparseMatrix cm(grid.size(), grid.size());
  {
    std::vector<Triplet> t;
    t.reserve(grid.size());
    for (int k = 0; k < grid.size(); ++k) t.emplace_back(k, k, coef.c().values[k]);
    cm.setFromTriplets(t.begin(), t.end());
  }
  m += cm;
  if (dirichlet) {
    for (int k = 0; k < grid.size(); ++k) {
      if (!grid.on_boundary(k)) continue;
      for (SparseMatrix::InnerIterator it(m, k); it; ++it) it.valueRef() = (it.col() == k) ? 1.0 : 0.0;
    }
    // The identity diagonal entry must exist for every boundary row.
    for (int k = 0; k < grid.size(); ++k)
      if (grid.on_boundary(k)) m.coeffRef(k, k) = 1.0;
  }
  m.prune(0.0);
  m.makeCompressed();
  return {std::move(m), dirichlet};
}

/// Transpose of the interior block of L applied to v; zero on the boundary.
/// Satisfies sum(L[u] * v) = sum(u * L*[v]) for u, v vanishing on the
/// boundary layer.
inline GridFunction apply_L_adjoint(const EllipticCoefficients& coef, const GridFunction& v) {
  require_same_grid(coef.grid(), v.grid, "apply_L_adjoint");
  const Grid& g = v.grid;
  const SparseMatrix m = assemble_L_matrix(coef, g, false).matrix;
  Vector vi = v.values;
  for (int k = 0; k < g.size(); ++k)
    if (g.on_boundary(k)) vi[k] = 0.0;
  GridFunction out(g, m.transpose() * vi);
  for (int k = 0; k < g.size(); ++k)
    if (g.on_boundary(k)) out.values[k] = 0.0;
  return out;
}

/// Factorised Dirichlet problem L[u] = f (interior), u = g (boundary).
/// Immutable after construction.
class DirichletSolver {
 public:
  explicit DirichletSolver(const EllipticCoefficients& coef)
      : grid_(coef.grid()), op_(assemble_L_matrix(coef, coef.grid(), true)) {
    const Eigen::SparseMatrix<double> cm = op_.matrix;
    lu_.compute(cm);
    if (lu_.info() != Eigen::Success) {
      throw std::runtime_error("Dirichlet factorisation failed (singular operator): " + lu_.lastErrorMessage());
    }
  }

  [[nodiscard]] GridFunction solve(const GridFunction& f, const GridFunction& g) const {
    require_same_grid(grid_, f.grid, "solve_dirichlet (source)");
    require_same_grid(grid_, g.grid, "solve_dirichlet (boundary data)");
    Vector rhs = f.values;
    for (int k = 0; k < grid_.size(); ++k)
      if (grid_.on_boundary(k)) rhs[k] = g.values[k];
    GridFunction u(grid_, lu_.solve(rhs));
    for (int k = 0; k < grid_.size(); ++k)
      if (grid_.on_boundary(k)) u.values[k] = g.values[k];
    const double res = (op_.matrix * u.values - rhs).cwiseAbs().maxCoeff();
    const double scale = 1.0 + rhs.cwiseAbs().maxCoeff() + max_row_sum() * u.sup_norm();
    if (!(res <= 1e-10 * scale)) {
      std::ostringstream os;
      os << "Dirichlet solve inaccurate: residual " << res << ", condition estimate "
         << condition_estimate();
      throw std::runtime_error(os.str());
    }
    return u;
  }

  /// Hager-style 1-norm condition estimate.
  [[nodiscard]] double condition_estimate() const {
    const int n = grid_.size();
    Vector x = Vector::Constant(n, 1.0 / n);
    double est = 0.0;
    const Eigen::SparseMatrix<double> at = op_.matrix.transpose();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lut(at);
    for (int it = 0; it < 5; ++it) {
      const Vector y = lu_.solve(x);
      est = y.lpNorm<1>();
      Vector xi = y.unaryExpr([](double a) { return a >= 0.0 ? 1.0 : -1.0; });
      const Vector z = lut.solve(xi);
      Eigen::Index jmax = 0;
      if (z.cwiseAbs().maxCoeff(&jmax) <= z.dot(x)) break;
      x.setZero();
      x[jmax] = 1.0;
    }
    double norm1 = 0.0;
    for (int k = 0; k < at.outerSize(); ++k) {
      double s = 0.0;
      for (Eigen::SparseMatrix<double>::InnerIterator it(at, k); it; ++it) s += std::abs(it.value());
      norm1 = std::max(norm1, s);
    }
    return norm1 * est;
  }

  [[nodiscard]] const Grid& grid() const { return grid_; }

 private:
  [[nodiscard]] double max_row_sum() const {
    double best = 0.0;
    for (int k = 0; k < op_.matrix.outerSize(); ++k) {
      double s = 0.0;
      for (SparseMatrix::InnerIterator it(op_.matrix, k); it; ++it) s += std::abs(it.value());
      best = std::max(best, s);
    }
    return best;
  }

  Grid grid_;
  LinearOperatorMatrix op_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

inline GridFunction solve_dirichlet(const EllipticCoefficients& coef, const GridFunction& f,
                                    const GridFunction& g) {
  return DirichletSolver(coef).solve(f, g);
}

/// Amount by which u undershoots min(0, min g) on any node; 0 when the
/// discrete maximum principle holds for data f <= 0, g >= 0.
inline double maximum_principle_violation(const GridFunction& u, const GridFunction& g) {
  double gmin = 0.0;
  for (int k = 0; k < g.grid.size(); ++k)
    if (g.grid.on_boundary(k)) gmin = std::min(gmin, g.values[k]);
  return std::max(0.0, gmin - u.values.minCoeff());
}

}  // namespace lsi
