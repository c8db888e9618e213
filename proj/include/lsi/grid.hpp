#pragma once

// Uniform rectangular grids, nodal grid functions, finite-difference
// calculus and the discrete measures standing in for Lebesgue measure on the
// domain and Hausdorff measure on the measurement set.

#include <Eigen/Sparse>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsi {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Rect {
  double ax = 0.0;
  double bx = 1.0;
  double ay = 0.0;
  double by = 1.0;

  [[nodiscard]] double area() const { return (bx - ax) * (by - ay); }
  [[nodiscard]] double perimeter() const { return 2.0 * ((bx - ax) + (by - ay)); }
  bool operator==(const Rect&) const = default;
};

inline constexpr Rect unit_square{0.0, 1.0, 0.0, 1.0};

/// Uniform tensor grid on an axis-aligned rectangle. Node (i, j) has flat
/// index j * nx + i (row-major, j outer).
class Grid {
 public:
  Grid() = default;

  Grid(int nx, int ny, Rect rect) : nx_(nx), ny_(ny), rect_(rect) {
    if (nx < 3 || ny < 3) {
      throw std::invalid_argument("grid too small: need at least 3 nodes per axis, got " +
                                  std::to_string(nx) + "x" + std::to_string(ny));
    }
    if (!(rect.bx > rect.ax) || !(rect.by > rect.ay) || !std::isfinite(rect.area())) {
      throw std::invalid_argument("degenerate rectangle");
    }
    hx_ = (rect.bx - rect.ax) / (nx - 1);
    hy_ = (rect.by - rect.ay) / (ny - 1);
  }

  [[nodiscard]] int nx() const { return nx_; }
  [[nodiscard]] int ny() const { return ny_; }
  [[nodiscard]] const Rect& rect() const { return rect_; }
  [[nodiscard]] double hx() const { return hx_; }
  [[nodiscard]] double hy() const { return hy_; }
  [[nodiscard]] double h() const { return std::max(hx_, hy_); }
  [[nodiscard]] int size() const { return nx_ * ny_; }

  [[nodiscard]] int index(int i, int j) const { return j * nx_ + i; }
  [[nodiscard]] int col(int k) const { return k % nx_; }
  [[nodiscard]] int row(int k) const { return k / nx_; }

  [[nodiscard]] double x(int i) const { return rect_.ax + i * hx_; }
  [[nodiscard]] double y(int j) const { return rect_.ay + j * hy_; }
  [[nodiscard]] Point node(int k) const { return {x(col(k)), y(row(k))}; }

  [[nodiscard]] bool on_boundary(int k) const {
    const int i = col(k);
    const int j = row(k);
    return i == 0 || j == 0 || i == nx_ - 1 || j == ny_ - 1;
  }

  [[nodiscard]] bool valid(int k) const { return k >= 0 && k < size(); }

  /// Outward unit normal at a boundary node. Corners use the normalised sum
  /// of the two adjacent face normals.
  [[nodiscard]] Point outward_normal(int k) const {
    const int i = col(k);
    const int j = row(k);
    double nx = 0.0;
    double ny = 0.0;
    if (i == 0) nx -= 1.0;
    if (i == nx_ - 1) nx += 1.0;
    if (j == 0) ny -= 1.0;
    if (j == ny_ - 1) ny += 1.0;
    const double len = std::hypot(nx, ny);
    if (len == 0.0) throw std::invalid_argument("outward normal requested at an interior node");
    return {nx / len, ny / len};
  }

  bool operator==(const Grid&) const = default;

 private:
  int nx_ = 0;
  int ny_ = 0;
  Rect rect_{};
  double hx_ = 0.0;
  double hy_ = 0.0;
};

inline Grid make_grid(int nx, int ny, Rect rect = unit_square) { return Grid(nx, ny, rect); }

/// Nodal scalar field.
struct GridFunction {
  Grid grid;
  Vector values;

  GridFunction() = default;
  explicit GridFunction(const Grid& g) : grid(g), values(Vector::Zero(g.size())) {}
  GridFunction(const Grid& g, Vector v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size()) {
      throw std::invalid_argument("grid function length " + std::to_string(values.size()) +
                                  " does not match grid size " + std::to_string(grid.size()));
    }
  }

  static GridFunction sample(const Grid& g, const std::function<double(double, double)>& fn) {
    GridFunction out(g);
    for (int k = 0; k < g.size(); ++k) {
      const Point p = g.node(k);
      out.values[k] = fn(p.x, p.y);
    }
    return out;
  }

  static GridFunction constant(const Grid& g, double c) {
    return GridFunction(g, Vector::Constant(g.size(), c));
  }

  [[nodiscard]] double operator()(int i, int j) const { return values[grid.index(i, j)]; }
  double& operator()(int i, int j) { return values[grid.index(i, j)]; }

  [[nodiscard]] bool finite() const { return values.allFinite(); }
  [[nodiscard]] double sup_norm() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }
};

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) throw std::invalid_argument(std::string("grid mismatch in ") + what);
}

struct VectorGridFunction {
  GridFunction dx;
  GridFunction dy;
};

/// Second derivatives; the mixed entry is stored once.
struct HessianField {
  GridFunction dxx;
  GridFunction dxy;
  GridFunction dyy;
};

namespace detail {

// First derivative weights along one axis at position i of n nodes:
// central in the interior, one-sided second order at the ends.
inline void first_derivative_stencil(int i, int n, double h, int (&idx)[3], double (&w)[3]) {
  if (i == 0) {
    idx[0] = 0, idx[1] = 1, idx[2] = 2;
    w[0] = -1.5 / h, w[1] = 2.0 / h, w[2] = -0.5 / h;
  } else if (i == n - 1) {
    idx[0] = n - 3, idx[1] = n - 2, idx[2] = n - 1;
    w[0] = 0.5 / h, w[1] = -2.0 / h, w[2] = 1.5 / h;
  } else {
    idx[0] = i - 1, idx[1] = i, idx[2] = i + 1;
    w[0] = -0.5 / h, w[1] = 0.0, w[2] = 0.5 / h;
  }
}

// Second derivative: 3-point stencil, centre shifted inward at the ends.
inline void second_derivative_stencil(int i, int n, double h, int (&idx)[3], double (&w)[3]) {
  const int c = std::clamp(i, 1, n - 2);
  idx[0] = c - 1, idx[1] = c, idx[2] = c + 1;
  const double s = 1.0 / (h * h);
  w[0] = s, w[1] = -2.0 * s, w[2] = s;
}

}  // namespace detail

/// Sparse matrices of the discrete derivative operators on a grid.
struct DifferenceOperators {
  SparseMatrix dx, dy, dxx, dxy, dyy;

  explicit DifferenceOperators(const Grid& g) {
    const int n = g.size();
    std::vector<Triplet> tx, ty, txx, txy, tyy;
    tx.reserve(3 * n), ty.reserve(3 * n), txx.reserve(3 * n), tyy.reserve(3 * n), txy.reserve(4 * n);
    int idx[3];
    double w[3];
    for (int j = 0; j < g.ny(); ++j) {
      for (int i = 0; i < g.nx(); ++i) {
        const int k = g.index(i, j);
        detail::first_derivative_stencil(i, g.nx(), g.hx(), idx, w);
        for (int s = 0; s < 3; ++s)
          if (w[s] != 0.0) tx.emplace_back(k, g.index(idx[s], j), w[s]);
        detail::first_derivative_stencil(j, g.ny(), g.hy(), idx, w);
        for (int s = 0; s < 3; ++s)
          if (w[s] != 0.0) ty.emplace_back(k, g.index(i, idx[s]), w[s]);
        detail::second_derivative_stencil(i, g.nx(), g.hx(), idx, w);
        for (int s = 0; s < 3; ++s) txx.emplace_back(k, g.index(idx[s], j), w[s]);
        detail::second_derivative_stencil(j, g.ny(), g.hy(), idx, w);
        for (int s = 0; s < 3; ++s) tyy.emplace_back(k, g.index(i, idx[s]), w[s]);
        const int ci = std::clamp(i, 1, g.nx() - 2);
        const int cj = std::clamp(j, 1, g.ny() - 2);
        const double q = 1.0 / (4.0 * g.hx() * g.hy());
        txy.emplace_back(k, g.index(ci + 1, cj + 1), q);
        txy.emplace_back(k, g.index(ci + 1, cj - 1), -q);
        txy.emplace_back(k, g.index(ci - 1, cj + 1), -q);
        txy.emplace_back(k, g.index(ci - 1, cj - 1), q);
      }
    }
    auto build = [n](SparseMatrix& m, const std::vector<Triplet>& t) {
      m.resize(n, n);
      m.setFromTriplets(t.begin(), t.end());
    };
    build(dx, tx), build(dy, ty), build(dxx, txx), build(dxy, txy), build(dyy, tyy);
  }
};

inline VectorGridFunction gradient(const GridFunction& u) {
  const Grid& g = u.grid;
  VectorGridFunction out{GridFunction(g), GridFunction(g)};
  int idx[3];
  double w[3];
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      detail::first_derivative_stencil(i, g.nx(), g.hx(), idx, w);
      out.dx(i, j) = w[0] * u(idx[0], j) + w[1] * u(idx[1], j) + w[2] * u(idx[2], j);
      detail::first_derivative_stencil(j, g.ny(), g.hy(), idx, w);
      out.dy(i, j) = w[0] * u(i, idx[0]) + w[1] * u(i, idx[1]) + w[2] * u(i, idx[2]);
    }
  }
  return out;
}

inline HessianField hessian(const GridFunction& u) {
  const Grid& g = u.grid;
  HessianField out{GridFunction(g), GridFunction(g), GridFunction(g)};
  int idx[3];
  double w[3];
  const double q = 1.0 / (4.0 * g.hx() * g.hy());
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      detail::second_derivative_stencil(i, g.nx(), g.hx(), idx, w);
      out.dxx(i, j) = w[0] * u(idx[0], j) + w[1] * u(idx[1], j) + w[2] * u(idx[2], j);
      detail::second_derivative_stencil(j, g.ny(), g.hy(), idx, w);
      out.dyy(i, j) = w[0] * u(i, idx[0]) + w[1] * u(i, idx[1]) + w[2] * u(i, idx[2]);
      const int ci = std::clamp(i, 1, g.nx() - 2);
      const int cj = std::clamp(j, 1, g.ny() - 2);
      out.dxy(i, j) =
          q * ((u(ci + 1, cj + 1) - u(ci + 1, cj - 1)) - (u(ci - 1, cj + 1) - u(ci - 1, cj - 1)));
    }
  }
  return out;
}

/// Discrete surrogate for a measure on a node subset: node list plus
/// positive quadrature weights. `gamma` records the nominal dimension.
struct MeasurementSet {
  std::vector<int> nodes;
  std::vector<double> weights;
  double gamma = 0.0;

  [[nodiscard]] std::size_t size() const { return nodes.size(); }
  [[nodiscard]] bool empty() const { return nodes.empty(); }
  [[nodiscard]] double total() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }

  /// Checks the structural invariants against a grid; throws on violation.
  void validate(const Grid& g) const {
    if (nodes.size() != weights.size()) throw std::invalid_argument("measurement set: nodes/weights length mismatch");
    std::vector<int> sorted = nodes;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw std::invalid_argument("measurement set: duplicate node");
    for (std::size_t s = 0; s < nodes.size(); ++s) {
      if (!g.valid(nodes[s])) throw std::invalid_argument("measurement set: node index out of range");
      if (!(weights[s] > 0.0) || !std::isfinite(weights[s]))
        throw std::invalid_argument("measurement set: weights must be strictly positive");
    }
    if (gamma < 0.0 || gamma > 2.0) throw std::invalid_argument("measurement set: gamma outside [0, 2]");
  }

  /// Values of a grid function at the member nodes, in member order.
  [[nodiscard]] Vector restrict(const GridFunction& u) const {
    Vector out(static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t s = 0; s < nodes.size(); ++s) out[static_cast<Eigen::Index>(s)] = u.values[nodes[s]];
    return out;
  }
};

/// Trapezoidal arc-length weights on the closed boundary polyline (gamma = 1).
inline MeasurementSet boundary_measure(const Grid& g) {
  MeasurementSet m;
  m.gamma = 1.0;
  for (int k = 0; k < g.size(); ++k) {
    if (!g.on_boundary(k)) continue;
    const int i = g.col(k);
    const int j = g.row(k);
    const bool xend = (i == 0 || i == g.nx() - 1);
    const bool yend = (j == 0 || j == g.ny() - 1);
    double w = 0.0;
    if (xend && yend) {
      w = 0.5 * (g.hx() + g.hy());
    } else if (xend) {
      w = g.hy();
    } else {
      w = g.hx();
    }
    m.nodes.push_back(k);
    m.weights.push_back(w);
  }
  return m;
}

/// Cell-area weights hx*hy, halved on each boundary layer the node lies on
/// (gamma = 2). An empty mask gives the empty set.
inline MeasurementSet interior_measure(const Grid& g, const std::function<bool(int)>& mask) {
  MeasurementSet m;
  m.gamma = 2.0;
  for (int k = 0; k < g.size(); ++k) {
    if (!mask(k)) continue;
    const int i = g.col(k);
    const int j = g.row(k);
    double w = g.hx() * g.hy();
    if (i == 0 || i == g.nx() - 1) w *= 0.5;
    if (j == 0 || j == g.ny() - 1) w *= 0.5;
    m.nodes.push_back(k);
    m.weights.push_back(w);
  }
  return m;
}

inline MeasurementSet domain_measure(const Grid& g) {
  return interior_measure(g, [](int) { return true; });
}

/// Nodes whose coordinates lie in the closed disc.
inline MeasurementSet disc_measure(const Grid& g, Point centre, double radius) {
  return interior_measure(g, [&](int k) {
    const Point p = g.node(k);
    return std::hypot(p.x - centre.x, p.y - centre.y) <= radius;
  });
}

/// Counting measure on the given nodes (gamma = 0).
inline MeasurementSet point_measure(const Grid& g, const std::vector<int>& nodes) {
  MeasurementSet m;
  m.gamma = 0.0;
  m.nodes = nodes;
  m.weights.assign(nodes.size(), 1.0);
  m.validate(g);
  return m;
}

/// Counting measure restricted to the horizontal grid line j.
inline MeasurementSet line_measure(const Grid& g, int j) {
  if (j < 0 || j >= g.ny()) throw std::invalid_argument("line index out of range");
  MeasurementSet m;
  m.gamma = 1.0;
  for (int i = 0; i < g.nx(); ++i) {
    m.nodes.push_back(g.index(i, j));
    m.weights.push_back((i == 0 || i == g.nx() - 1) ? 0.5 * g.hx() : g.hx());
  }
  return m;
}

/// CSV with header `x,y,value`, row-major node order, 17 significant digits.
inline void write_csv(std::ostream& os, const GridFunction& u) {
  os << "x,y,value\n";
  char buf[96];
  for (int k = 0; k < u.grid.size(); ++k) {
    const Point pt = u.grid.node(k);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", pt.x, pt.y, u.values[k]);
    os << buf;
  }
}

/// Reads the format written by write_csv; node coordinates must match the grid.
inline GridFunction read_csv(std::istream& is, const Grid& g) {
  std::string line;
  if (!std::getline(is, line) || line != "x,y,value") throw std::runtime_error("grid CSV: bad header");
  GridFunction u(g);
  const double tol = 1e-9 * std::max(g.hx(), g.hy());
  for (int k = 0; k < g.size(); ++k) {
    if (!std::getline(is, line)) throw std::runtime_error("grid CSV: too few rows");
    std::istringstream row(line);
    double x = 0.0, y = 0.0, v = 0.0;
    char c1 = 0, c2 = 0;
    if (!(row >> x >> c1 >> y >> c2 >> v) || c1 != ',' || c2 != ',') throw std::runtime_error("grid CSV: malformed row " + line);
    const Point pt = g.node(k);
    if (std::abs(pt.x - x) > tol || std::abs(pt.y - y) > tol) throw std::runtime_error("grid CSV: node coordinates do not match grid");
    u.values[k] = v;
  }
  return u;
}

}  // namespace lsi
