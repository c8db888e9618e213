#pragma once

// The regularised error functionals E_p and E_inf, normalised L^p norms in
// max-factored form, the Gateaux gradient of E_p and the concentration
// measures built from the p-th power residuals.

#include "lsi/elliptic.hpp"
#include "lsi/grid.hpp"
#include "lsi/observation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace lsi {

/// Largest finite exponent accepted anywhere in the library.
inline constexpr double kMaxExponent = 512.0;

/// Either a finite exponent or infinity.
class Exponent {
 public:
  constexpr Exponent() = default;
  constexpr explicit Exponent(double p) : value_(p) {}
  static constexpr Exponent infinity() { return Exponent(std::numeric_limits<double>::infinity()); }

  [[nodiscard]] constexpr bool is_infinite() const { return value_ == std::numeric_limits<double>::infinity(); }
  [[nodiscard]] constexpr double value() const { return value_; }

  void validate() const {
    if (is_infinite()) return;
    if (!(value_ > 1.0) || !(value_ <= kMaxExponent)) {
      std::ostringstream os;
      os << "exponent p must lie in (1, " << kMaxExponent << "] or be infinite, got " << value_;
      throw std::invalid_argument(os.str());
    }
  }

 private:
  double value_ = 2.0;
};

struct FunctionalParams {
  double alpha = 1e-2;
  double delta = 0.0;
  Exponent p{2.0};

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be positive");
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw std::invalid_argument("delta must be non-negative");
    p.validate();
  }

  [[nodiscard]] double finite_p() const {
    validate();
    if (p.is_infinite()) throw std::invalid_argument("operation requires a finite exponent");
    return p.value();
  }
};

/// |a|_(p) = sqrt(a^2 + p^-2).
inline double reg_abs(double a, double p) { return std::hypot(a, 1.0 / p); }

/// (weighted average of |f|^p)^(1/p), computed as M * (avg (|f|/M)^p)^(1/p)
/// with M = max |f|. Infinite p gives the max over positive-weight nodes.
/// An empty weight set gives 0.
inline double normalized_lp_norm(const Vector& f, const std::vector<double>& w, Exponent p) {
  if (static_cast<std::size_t>(f.size()) != w.size()) throw std::invalid_argument("normalized_lp_norm: length mismatch");
  if (w.empty()) return 0.0;
  double m = 0.0;
  double wsum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] > 0.0)) throw std::invalid_argument("normalized_lp_norm: weights must be positive");
    m = std::max(m, std::abs(f[static_cast<Eigen::Index>(i)]));
    wsum += w[i];
  }
  if (p.is_infinite() || m == 0.0) return m;
  const double pv = p.value();
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * std::pow(std::abs(f[static_cast<Eigen::Index>(i)]) / m, pv);
  return m * std::pow(s / wsum, 1.0 / pv);
}

/// Normalised p-norm of |a|_(p) together with its derivatives.
struct RegularisedNorm {
  double value = 0.0;
  /// d value / d a_i.
  Vector grad;
  /// |a|_(p)^(p-2) a / (W * value^(p-1)): density w.r.t. the base weights,
  /// so that grad_i = w_i * density_i.
  Vector density;
  /// Diagonal of the Hessian without the rank-one correction; positive.
  Vector curvature;
};

inline RegularisedNorm regularised_norm(const Vector& a, const std::vector<double>& w, double p,
                                        bool with_curvature = false) {
  RegularisedNorm out;
  const Eigen::Index n = a.size();
  out.grad = Vector::Zero(n);
  out.density = Vector::Zero(n);
  if (with_curvature) out.curvature = Vector::Zero(n);
  if (n == 0) return out;
  const double floor = 1.0 / p;
  double wsum = 0.0;
  double m = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    wsum += w[static_cast<std::size_t>(i)];
    m = std::max(m, std::hypot(a[i], floor));
  }
  Vector t(n);
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    t[i] = std::hypot(a[i], floor) / m;
    s += w[static_cast<std::size_t>(i)] / wsum * std::pow(t[i], p);
  }
  out.value = m * std::pow(s, 1.0 / p);
  const double sp = std::pow(s, (p - 1.0) / p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double wi = w[static_cast<std::size_t>(i)];
    out.density[i] = std::pow(t[i], p - 2.0) * (a[i] / m) / (wsum * sp);
    out.grad[i] = wi * out.density[i];
    if (with_curvature) {
      const double am = a[i] / m;
      const double fm = floor / m;
      out.curvature[i] = wi / wsum * std::pow(t[i], p - 4.0) * ((p - 1.0) * am * am + fm * fm) / (m * sp);
    }
  }
  return out;
}

/// Data of the inverse problem L[u] = f, u = g on the boundary, Q[u] = q on
/// gamma, with precomputed sparse operators. Immutable.
class InverseProblem {
 public:
  InverseProblem(EllipticCoefficients coef, GridFunction g, ObservationOperator K, MeasurementSet gamma,
                 Vector q_delta, std::optional<MeasurementSet> omega = std::nullopt)
      : coef_(std::move(coef)),
        g_(std::move(g)),
        K_(std::move(K)),
        gamma_(std::move(gamma)),
        q_(std::move(q_delta)),
        omega_(omega ? std::move(*omega) : domain_measure(coef_.grid())) {
    const Grid& grid = coef_.grid();
    require_same_grid(grid, g_.grid, "inverse problem boundary data");
    if (!g_.finite()) throw std::invalid_argument("boundary data must be finite");
    gamma_.validate(grid);
    omega_.validate(grid);
    if (omega_.empty()) throw std::invalid_argument("domain measure must not be empty");
    if (static_cast<std::size_t>(q_.size()) != gamma_.size())
      throw std::invalid_argument("q_delta length does not match the measurement set");
    if (!q_.allFinite()) throw std::invalid_argument("q_delta must be finite");
    K_.check_sites(grid, gamma_);

    const DifferenceOperators ops(grid);
    const SparseMatrix l = assemble_L_matrix(coef_, grid, false).matrix;
    l_omega_ = selector(omega_) * l;
    select_gamma_ = selector(gamma_);
    gamma_dx_ = select_gamma_ * ops.dx;
    gamma_dy_ = select_gamma_ * ops.dy;
    sites_.reserve(gamma_.size());
    for (int k : gamma_.nodes) sites_.push_back(site_of(grid, k));
  }

  [[nodiscard]] const Grid& grid() const { return coef_.grid(); }
  [[nodiscard]] const EllipticCoefficients& coef() const { return coef_; }
  [[nodiscard]] const GridFunction& g() const { return g_; }
  [[nodiscard]] const ObservationOperator& K() const { return K_; }
  [[nodiscard]] const MeasurementSet& gamma() const { return gamma_; }
  [[nodiscard]] const MeasurementSet& omega() const { return omega_; }
  [[nodiscard]] const Vector& q_delta() const { return q_; }

  /// L restricted to the rows of the domain measure.
  [[nodiscard]] const SparseMatrix& l_omega() const { return l_omega_; }

  /// Observation Q[u] at gamma nodes.
  [[nodiscard]] Vector observe(const Vector& u) const {
    const Vector r = select_gamma_ * u;
    const Vector px = gamma_dx_ * u;
    const Vector py = gamma_dy_ * u;
    Vector out(r.size());
    for (Eigen::Index s = 0; s < r.size(); ++s) out[s] = K_.eval(sites_[static_cast<std::size_t>(s)], r[s], Vec2{px[s], py[s]});
    return out;
  }

  /// Q[u] - q_delta.
  [[nodiscard]] Vector data_residual(const Vector& u) const { return observe(u) - q_; }

  /// L[u] at the domain-measure nodes.
  [[nodiscard]] Vector pde_residual(const Vector& u) const { return l_omega_ * u; }

  /// Sparse Jacobian of Q at u (rows: gamma nodes, columns: all nodes).
  [[nodiscard]] SparseMatrix observation_jacobian(const Vector& u) const {
    const Vector r = select_gamma_ * u;
    const Vector px = gamma_dx_ * u;
    const Vector py = gamma_dy_ * u;
    const Eigen::Index m = r.size();
    Vector kr(m), kpx(m), kpy(m);
    for (Eigen::Index s = 0; s < m; ++s) {
      const auto& site = sites_[static_cast<std::size_t>(s)];
      const Vec2 p{px[s], py[s]};
      kr[s] = K_.dr(site, r[s], p);
      const Vec2 dp = K_.dp(site, r[s], p);
      kpx[s] = dp[0];
      kpy[s] = dp[1];
    }
    SparseMatrix j = kr.asDiagonal() * select_gamma_;
    j += SparseMatrix(kpx.asDiagonal() * gamma_dx_);
    j += SparseMatrix(kpy.asDiagonal() * gamma_dy_);
    j.prune(0.0);
    return j;
  }

  /// Transpose of the observation Jacobian applied to v.
  [[nodiscard]] Vector observation_jacobian_transpose(const Vector& u, const Vector& v) const {
    const Vector r = select_gamma_ * u;
    const Vector px = gamma_dx_ * u;
    const Vector py = gamma_dy_ * u;
    const Eigen::Index m = r.size();
    Vector a(m), bx(m), by(m);
    for (Eigen::Index s = 0; s < m; ++s) {
      const auto& site = sites_[static_cast<std::size_t>(s)];
      const Vec2 p{px[s], py[s]};
      a[s] = K_.dr(site, r[s], p) * v[s];
      const Vec2 dp = K_.dp(site, r[s], p);
      bx[s] = dp[0] * v[s];
      by[s] = dp[1] * v[s];
    }
    return select_gamma_.transpose() * a + gamma_dx_.transpose() * bx + gamma_dy_.transpose() * by;
  }

  /// Copy with different measured data.
  [[nodiscard]] InverseProblem with_data(Vector q) const {
    InverseProblem copy = *this;
    if (q.size() != q_.size()) throw std::invalid_argument("with_data: length mismatch");
    copy.q_ = std::move(q);
    return copy;
  }

 private:
  [[nodiscard]] SparseMatrix selector(const MeasurementSet& m) const {
    SparseMatrix s(static_cast<Eigen::Index>(m.size()), grid().size());
    std::vector<Triplet> t;
    t.reserve(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) t.emplace_back(static_cast<int>(i), m.nodes[i], 1.0);
    s.setFromTriplets(t.begin(), t.end());
    return s;
  }

  EllipticCoefficients coef_;
  GridFunction g_;
  ObservationOperator K_;
  MeasurementSet gamma_;
  Vector q_;
  MeasurementSet omega_;
  SparseMatrix l_omega_;
  SparseMatrix select_gamma_;
  SparseMatrix gamma_dx_;
  SparseMatrix gamma_dy_;
  std::vector<ObservationSite> sites_;
};

struct EpTerms {
  RegularisedNorm data;
  RegularisedNorm pde;
  double value = 0.0;
};

inline EpTerms evaluate_terms(const Vector& u, const InverseProblem& prob, double alpha, double p,
                              bool with_curvature = false) {
  EpTerms t;
  t.data = regularised_norm(prob.data_residual(u), prob.gamma().weights, p, with_curvature);
  t.pde = regularised_norm(prob.pde_residual(u), prob.omega().weights, p, with_curvature);
  t.value = t.data.value + alpha * t.pde.value;
  return t;
}

/// E_p(u) = || |Q[u]-q|_(p) ||_p on gamma + alpha || |L[u]|_(p) ||_p on the domain.
inline double eval_Ep(const GridFunction& u, const InverseProblem& prob, const FunctionalParams& params) {
  require_same_grid(prob.grid(), u.grid, "eval_Ep");
  const double p = params.finite_p();
  return evaluate_terms(u.values, prob, params.alpha, p).value;
}

/// E_inf(u) = sup |Q[u]-q| on gamma + alpha sup |L[u]| on the domain.
inline double eval_Einf(const GridFunction& u, const InverseProblem& prob, const FunctionalParams& params) {
  require_same_grid(prob.grid(), u.grid, "eval_Einf");
  params.validate();
  const Vector r = prob.data_residual(u.values);
  const Vector l = prob.pde_residual(u.values);
  const double data = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
  return data + params.alpha * l.cwiseAbs().maxCoeff();
}

/// Gradient of E_p with respect to all nodal values, zeroed on boundary
/// nodes (frozen to g).
inline Vector full_gradient(const Vector& u, const InverseProblem& prob, double alpha, const EpTerms& t) {
  Vector grad = prob.l_omega().transpose() * (alpha * t.pde.grad);
  if (!prob.gamma().empty()) grad += prob.observation_jacobian_transpose(u, t.data.grad);
  return grad;
}

inline GridFunction grad_Ep(const GridFunction& u, const InverseProblem& prob, const FunctionalParams& params) {
  require_same_grid(prob.grid(), u.grid, "grad_Ep");
  const double p = params.finite_p();
  const EpTerms t = evaluate_terms(u.values, prob, params.alpha, p);
  GridFunction out(u.grid, full_gradient(u.values, prob, params.alpha, t));
  for (int k = 0; k < u.grid.size(); ++k)
    if (u.grid.on_boundary(k)) out.values[k] = 0.0;
  return out;
}

/// Signed density with respect to a discrete base measure.
struct ConcentrationMeasure {
  MeasurementSet base;
  Vector density;

  [[nodiscard]] double total_variation() const {
    double tv = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) tv += base.weights[i] * std::abs(density[static_cast<Eigen::Index>(i)]);
    return tv;
  }

  /// Integral of a nodal function (indexed by grid node) against the measure.
  [[nodiscard]] double integrate(const Vector& nodal) const {
    double s = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i)
      s += base.weights[i] * density[static_cast<Eigen::Index>(i)] * nodal[base.nodes[i]];
    return s;
  }
};

struct ConcentrationPair {
  ConcentrationMeasure nu;  // on gamma
  ConcentrationMeasure mu;  // on the domain
};

inline ConcentrationPair concentration_measures(const GridFunction& u, const InverseProblem& prob,
                                                const FunctionalParams& params) {
  require_same_grid(prob.grid(), u.grid, "concentration_measures");
  const double p = params.finite_p();
  const EpTerms t = evaluate_terms(u.values, prob, params.alpha, p);
  return {{prob.gamma(), t.data.density}, {prob.omega(), t.pde.density}};
}

inline void write_csv(std::ostream& os, const ConcentrationMeasure& m, const Grid& g) {
  os << "x,y,weight,density\n";
  char buf[128];
  for (std::size_t i = 0; i < m.base.size(); ++i) {
    const Point pt = g.node(m.base.nodes[i]);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", pt.x, pt.y, m.base.weights[i],
                  m.density[static_cast<Eigen::Index>(i)]);
    os << buf;
  }
}

}  // namespace lsi
