#pragma once

// Observation operators Q[u] = K(x, u, Du) restricted to a measurement set,
// and their linearisation (K_r, K_p).

#include "lsi/grid.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lsi {

using Vec2 = std::array<double, 2>;

/// Where K is evaluated: node coordinates plus the outward normal when the
/// node lies on the boundary.
struct ObservationSite {
  Point x;
  std::optional<Point> normal;
};

inline ObservationSite site_of(const Grid& g, int k) {
  ObservationSite s{g.node(k), std::nullopt};
  if (g.on_boundary(k)) s.normal = g.outward_normal(k);
  return s;
}

class ObservationOperator {
 public:
  using Eval = std::function<double(const ObservationSite&, double, const Vec2&)>;
  using DerivR = std::function<double(const ObservationSite&, double, const Vec2&)>;
  using DerivP = std::function<Vec2(const ObservationSite&, double, const Vec2&)>;
  using Admits = std::function<bool(const Grid&, int)>;

  /// Throws if dr/dp disagree with central differences of eval.
  ObservationOperator(std::string label, Eval eval, DerivR dr, DerivP dp, Admits admits = {})
      : label_(std::move(label)),
        eval_(std::move(eval)),
        dr_(std::move(dr)),
        dp_(std::move(dp)),
        admits_(std::move(admits)) {
    validate_derivatives();
  }

  [[nodiscard]] const std::string& label() const { return label_; }
  [[nodiscard]] double eval(const ObservationSite& s, double r, const Vec2& p) const { return eval_(s, r, p); }
  [[nodiscard]] double dr(const ObservationSite& s, double r, const Vec2& p) const { return dr_(s, r, p); }
  [[nodiscard]] Vec2 dp(const ObservationSite& s, double r, const Vec2& p) const { return dp_(s, r, p); }

  [[nodiscard]] bool admits(const Grid& g, int k) const { return !admits_ || admits_(g, k); }

  /// Throws unless every node of the set is admissible for this operator.
  void check_sites(const Grid& g, const MeasurementSet& gamma) const {
    for (int k : gamma.nodes) {
      if (!admits(g, k)) {
        std::ostringstream os;
        os << "observation operator '" << label_ << "' is not defined at node " << k;
        throw std::invalid_argument(os.str());
      }
    }
  }

 private:
  void validate_derivatives() const {
    std::mt19937_64 rng(0x5eed0b5e);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double eps = 1e-6;
    for (int s = 0; s < 100; ++s) {
      const double theta = 3.14159265358979 * unit(rng);
      ObservationSite site{{0.5 + 0.5 * unit(rng), 0.5 + 0.5 * unit(rng)}, Point{std::cos(theta), std::sin(theta)}};
      const double r = 2.0 * unit(rng);
      const Vec2 p{2.0 * unit(rng), 2.0 * unit(rng)};
      const double fd_r = (eval_(site, r + eps, p) - eval_(site, r - eps, p)) / (2.0 * eps);
      const double an_r = dr_(site, r, p);
      if (std::abs(an_r - fd_r) > 1e-5 * (1.0 + std::abs(an_r))) fail("K_r", an_r, fd_r);
      const Vec2 an_p = dp_(site, r, p);
      for (int c = 0; c < 2; ++c) {
        Vec2 pp = p, pm = p;
        pp[c] += eps, pm[c] -= eps;
        const double fd_p = (eval_(site, r, pp) - eval_(site, r, pm)) / (2.0 * eps);
        if (std::abs(an_p[c] - fd_p) > 1e-5 * (1.0 + std::abs(an_p[c]))) fail("K_p", an_p[c], fd_p);
      }
    }
  }

  [[noreturn]] void fail(const char* which, double analytic, double fd) const {
    std::ostringstream os;
    os << "observation operator '" << label_ << "': " << which << " = " << analytic
       << " disagrees with finite difference " << fd;
    throw std::invalid_argument(os.str());
  }

  std::string label_;
  Eval eval_;
  DerivR dr_;
  DerivP dp_;
  Admits admits_;
};

inline ObservationOperator identity_observation() {
  return {"identity", [](const ObservationSite&, double r, const Vec2&) { return r; },
          [](const ObservationSite&, double, const Vec2&) { return 1.0; },
          [](const ObservationSite&, double, const Vec2&) { return Vec2{0.0, 0.0}; }};
}

inline Point require_normal(const ObservationSite& s) {
  if (!s.normal) throw std::invalid_argument("normal derivative observed at an interior node");
  return *s.normal;
}

/// K = p . n with n the outward normal (corner convention in Grid).
inline ObservationOperator normal_derivative_observation() {
  return {"normal_derivative",
          [](const ObservationSite& s, double, const Vec2& p) {
            const Point n = require_normal(s);
            return p[0] * n.x + p[1] * n.y;
          },
          [](const ObservationSite&, double, const Vec2&) { return 0.0; },
          [](const ObservationSite& s, double, const Vec2&) {
            const Point n = require_normal(s);
            return Vec2{n.x, n.y};
          },
          [](const Grid& g, int k) { return g.on_boundary(k); }};
}

/// Identity restricted to the horizontal grid line j.
inline ObservationOperator trace_on_line_observation(int j) {
  return {"trace_on_line", [](const ObservationSite&, double r, const Vec2&) { return r; },
          [](const ObservationSite&, double, const Vec2&) { return 1.0; },
          [](const ObservationSite&, double, const Vec2&) { return Vec2{0.0, 0.0}; },
          [j](const Grid& g, int k) { return g.row(k) == j; }};
}

/// K = r^2; a simple nonlinear operator used in tests and configs.
inline ObservationOperator square_observation() {
  return {"square", [](const ObservationSite&, double r, const Vec2&) { return r * r; },
          [](const ObservationSite&, double r, const Vec2&) { return 2.0 * r; },
          [](const ObservationSite&, double, const Vec2&) { return Vec2{0.0, 0.0}; }};
}

/// Named operators: identity, normal_derivative, trace_on_line (line j), square.
inline ObservationOperator builtin_observation(const std::string& label, int line = 0) {
  if (label == "identity") return identity_observation();
  if (label == "normal_derivative") return normal_derivative_observation();
  if (label == "trace_on_line") return trace_on_line_observation(line);
  if (label == "square") return square_observation();
  throw std::invalid_argument("unknown observation operator '" + label + "'");
}

/// K(x_i, u(x_i), Du(x_i)) per node of gamma, in gamma's order.
inline Vector observe(const ObservationOperator& K, const GridFunction& u, const MeasurementSet& gamma) {
  K.check_sites(u.grid, gamma);
  const VectorGridFunction du = gradient(u);
  Vector out(static_cast<Eigen::Index>(gamma.size()));
  for (std::size_t s = 0; s < gamma.size(); ++s) {
    const int k = gamma.nodes[s];
    out[static_cast<Eigen::Index>(s)] =
        K.eval(site_of(u.grid, k), u.values[k], Vec2{du.dx.values[k], du.dy.values[k]});
  }
  return out;
}

struct Linearisation {
  double kr = 0.0;
  Vec2 kp{0.0, 0.0};
};

/// (K_r, K_p) at each node of gamma: the directional derivative of observe at
/// u in direction phi is kr * phi + kp . Dphi nodewise.
inline std::vector<Linearisation> observe_linearisation(const ObservationOperator& K, const GridFunction& u,
                                                        const MeasurementSet& gamma) {
  K.check_sites(u.grid, gamma);
  const VectorGridFunction du = gradient(u);
  std::vector<Linearisation> out;
  out.reserve(gamma.size());
  for (int k : gamma.nodes) {
    const ObservationSite site = site_of(u.grid, k);
    const Vec2 p{du.dx.values[k], du.dy.values[k]};
    out.push_back({K.dr(site, u.values[k], p), K.dp(site, u.values[k], p)});
  }
  return out;
}

}  // namespace lsi
