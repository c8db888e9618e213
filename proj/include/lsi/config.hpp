#pragma once

// Flat "key = value" files with [section] headers, and the experiment
// description built from them.

#include "lsi/elliptic.hpp"
#include "lsi/expression.hpp"
#include "lsi/grid.hpp"
#include "lsi/observation.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsi {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parsed file: "section.key" -> raw value. '#' starts a comment.
class ConfigFile {
 public:
  static ConfigFile parse(std::istream& in) {
    ConfigFile cf;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') fail(lineno, "unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        if (section.empty()) fail(lineno, "empty section name");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(lineno, "expected 'key = value'");
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) fail(lineno, "missing key");
      const std::string full = section.empty() ? key : section + "." + key;
      if (cf.values_.count(full)) fail(lineno, "duplicate key '" + full + "'");
      cf.values_[full] = trim(line.substr(eq + 1));
    }
    return cf;
  }

  static ConfigFile parse_string(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
  }

  static ConfigFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse(in);
  }

  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }
  [[nodiscard]] std::optional<std::string> get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }
  [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

  /// Sorted "key=value" lines with collapsed whitespace; independent of the
  /// order of sections and keys in the file.
  [[nodiscard]] std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) {
      std::istringstream is(v);
      std::string tok, norm;
      while (is >> tok) norm += (norm.empty() ? "" : " ") + tok;
      out += k + "=" + norm + "\n";
    }
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }
  [[noreturn]] static void fail(int line, const std::string& msg) {
    throw ConfigError("config line " + std::to_string(line) + ": " + msg);
  }

  std::map<std::string, std::string> values_;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct GammaSpec {
  enum class Kind { Boundary, Disc, Line, Points, Domain, Empty } kind = Kind::Boundary;
  Point centre{0.5, 0.5};
  double radius = 0.25;
  int line = 0;
  std::vector<int> points;

  [[nodiscard]] MeasurementSet build(const Grid& g) const {
    switch (kind) {
      case Kind::Boundary: return boundary_measure(g);
      case Kind::Disc: return disc_measure(g, centre, radius);
      case Kind::Line: return line_measure(g, line);
      case Kind::Points: return point_measure(g, points);
      case Kind::Domain: return domain_measure(g);
      default: return {};
    }
  }
};

struct ExperimentConfig {
  int nx = 33, ny = 33;
  Rect rect = unit_square;

  std::string operator_preset = "laplacian";  // laplacian | nondivergence | divergence
  std::string a11 = "1", a12 = "0", a22 = "1", b1 = "0", b2 = "0", c = "0";
  double a0 = 1.0;

  std::optional<std::string> u0;  // manufactured solution
  std::optional<std::string> f;   // or a source, with u0 from a forward solve
  std::optional<std::string> g;   // Dirichlet data (default: trace of u0)

  GammaSpec gamma;
  std::string observation = "identity";

  std::vector<double> alpha{1e-2};
  std::vector<double> delta{0.0};
  std::vector<double> schedule{2, 4, 8, 16, 32, 64};
  std::uint64_t seed = 1;
  double tol = 0.0;  // 0: default per stage
  int max_iter = 5000;
  double cauchy_rtol = 1e-4;
  bool cauchy_stop = true;
  double eta = 0.05;

  std::vector<std::string> harmonic{"x - 0.5"};

  std::string hash;

  [[nodiscard]] Grid grid() const { return make_grid(nx, ny, rect); }

  [[nodiscard]] EllipticCoefficients coefficients() const {
    const Grid gr = grid();
    if (operator_preset == "laplacian") return EllipticCoefficients::laplacian(gr);
    auto field = [&](const std::string& name, const std::string& text) {
      try {
        const Expression e = Expression::parse(text);
        return GridFunction::sample(gr, [&](double x, double y) { return e(x, y); });
      } catch (const ExpressionError& err) {
        throw ConfigError("operator." + name + ": " + err.what());
      }
    };
    const GridFunction fa11 = field("a11", a11), fa12 = field("a12", a12), fa22 = field("a22", a22);
    const GridFunction fb1 = field("b1", b1), fb2 = field("b2", b2), fc = field("c", c);
    try {
      if (operator_preset == "divergence") return from_divergence_form(fa11, fa12, fa22, fb1, fb2, fc, a0);
      return {fa11, fa12, fa22, fb1, fb2, fc, a0};
    } catch (const std::invalid_argument& err) {
      throw ConfigError(std::string("operator: ") + err.what());
    }
  }

  [[nodiscard]] ObservationOperator observation_operator() const {
    return builtin_observation(observation, gamma.kind == GammaSpec::Kind::Line ? gamma.line : 0);
  }

  static ExperimentConfig from_file(const ConfigFile& cf);
  static ExperimentConfig load(const std::string& path) { return from_file(ConfigFile::load(path)); }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',' || ch == ' ' || ch == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline double to_double(const std::string& field, const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError(field + ": '" + s + "' is not a number");
  }
  if (used != s.size()) throw ConfigError(field + ": '" + s + "' is not a number");
  return v;
}

inline long long to_int(const std::string& field, const std::string& s) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw ConfigError(field + ": '" + s + "' is not an integer");
  }
  if (used != s.size()) throw ConfigError(field + ": '" + s + "' is not an integer");
  return v;
}

inline std::vector<double> to_doubles(const std::string& field, const std::string& s) {
  std::vector<double> out;
  for (const auto& t : split_list(s)) out.push_back(to_double(field, t));
  if (out.empty()) throw ConfigError(field + ": list must not be empty");
  return out;
}

}  // namespace detail

inline ExperimentConfig ExperimentConfig::from_file(const ConfigFile& cf) {
  using detail::to_double;
  using detail::to_doubles;
  using detail::to_int;
  static const std::vector<std::string> known = {
      "grid.nx",       "grid.ny",       "grid.rect",        "operator.preset",   "operator.a11",
      "operator.a12",  "operator.a22",  "operator.b1",      "operator.b2",       "operator.c",
      "operator.a0",   "problem.u0",    "problem.f",        "problem.g",         "problem.gamma",
      "problem.observation",            "sweep.alpha",      "sweep.delta",       "sweep.schedule",
      "sweep.seed",    "sweep.tol",     "sweep.max_iter",   "sweep.cauchy_rtol", "sweep.cauchy_stop",
      "sweep.eta",     "nonuniqueness.harmonic"};
  for (const auto& [k, v] : cf.values())
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError(k + ": unknown field");

  ExperimentConfig c;
  if (auto v = cf.get("grid.nx")) c.nx = static_cast<int>(to_int("grid.nx", *v));
  if (auto v = cf.get("grid.ny")) c.ny = static_cast<int>(to_int("grid.ny", *v));
  if (c.nx < 3) throw ConfigError("grid.nx: grid too small (need at least 3 nodes)");
  if (c.ny < 3) throw ConfigError("grid.ny: grid too small (need at least 3 nodes)");
  if (auto v = cf.get("grid.rect")) {
    const auto r = to_doubles("grid.rect", *v);
    if (r.size() != 4) throw ConfigError("grid.rect: expected four numbers ax bx ay by");
    c.rect = {r[0], r[1], r[2], r[3]};
    if (!(c.rect.bx > c.rect.ax) || !(c.rect.by > c.rect.ay)) throw ConfigError("grid.rect: degenerate rectangle");
  }

  if (auto v = cf.get("operator.preset")) c.operator_preset = *v;
  if (c.operator_preset != "laplacian" && c.operator_preset != "nondivergence" && c.operator_preset != "divergence")
    throw ConfigError("operator.preset: expected laplacian, nondivergence or divergence");
  for (auto [key, dst] : {std::pair{"operator.a11", &c.a11}, std::pair{"operator.a12", &c.a12},
                          std::pair{"operator.a22", &c.a22}, std::pair{"operator.b1", &c.b1},
                          std::pair{"operator.b2", &c.b2}, std::pair{"operator.c", &c.c}}) {
    if (auto v = cf.get(key)) {
      if (c.operator_preset == "laplacian") throw ConfigError(std::string(key) + ": not used by preset laplacian");
      *dst = *v;
    }
  }
  if (auto v = cf.get("operator.a0")) c.a0 = to_double("operator.a0", *v);
  if (!(c.a0 > 0.0)) throw ConfigError("operator.a0: must be positive");

  c.u0 = cf.get("problem.u0");
  c.f = cf.get("problem.f");
  c.g = cf.get("problem.g");
  if (c.u0 && c.f) throw ConfigError("problem.f: give either problem.u0 or problem.f, not both");
  if (!c.u0 && !c.f) throw ConfigError("problem.u0: missing (or give problem.f and problem.g)");
  if (c.f && !c.g) throw ConfigError("problem.g: required when the source problem.f is given");
  for (const auto& [key, val] : {std::pair{"problem.u0", c.u0}, std::pair{"problem.f", c.f}, std::pair{"problem.g", c.g}}) {
    if (!val) continue;
    try {
      (void)Expression::parse(*val);
    } catch (const ExpressionError& e) {
      throw ConfigError(std::string(key) + ": " + e.what());
    }
  }

  if (auto v = cf.get("problem.gamma")) {
    const auto t = detail::split_list(*v);
    if (t.empty()) throw ConfigError("problem.gamma: empty");
    const std::string& kind = t[0];
    if (kind == "boundary" && t.size() == 1) {
      c.gamma.kind = GammaSpec::Kind::Boundary;
    } else if (kind == "domain" && t.size() == 1) {
      c.gamma.kind = GammaSpec::Kind::Domain;
    } else if (kind == "empty" && t.size() == 1) {
      c.gamma.kind = GammaSpec::Kind::Empty;
    } else if (kind == "disc" && t.size() == 4) {
      c.gamma.kind = GammaSpec::Kind::Disc;
      c.gamma.centre = {to_double("problem.gamma", t[1]), to_double("problem.gamma", t[2])};
      c.gamma.radius = to_double("problem.gamma", t[3]);
      if (!(c.gamma.radius > 0.0)) throw ConfigError("problem.gamma: disc radius must be positive");
    } else if (kind == "line" && t.size() == 2) {
      c.gamma.kind = GammaSpec::Kind::Line;
      c.gamma.line = static_cast<int>(to_int("problem.gamma", t[1]));
      if (c.gamma.line < 0 || c.gamma.line >= c.ny) throw ConfigError("problem.gamma: line index outside the grid");
    } else if (kind == "points" && t.size() >= 2) {
      c.gamma.kind = GammaSpec::Kind::Points;
      for (std::size_t i = 1; i < t.size(); ++i) c.gamma.points.push_back(static_cast<int>(to_int("problem.gamma", t[i])));
    } else {
      throw ConfigError("problem.gamma: expected boundary | domain | empty | disc cx cy r | line j | points k...");
    }
  }
  if (auto v = cf.get("problem.observation")) c.observation = *v;
  try {
    (void)builtin_observation(c.observation);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("problem.observation: ") + e.what());
  }

  if (auto v = cf.get("sweep.alpha")) c.alpha = to_doubles("sweep.alpha", *v);
  for (double a : c.alpha)
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("sweep.alpha: entries must be positive");
  if (auto v = cf.get("sweep.delta")) c.delta = to_doubles("sweep.delta", *v);
  for (double d : c.delta)
    if (!(d >= 0.0) || !std::isfinite(d)) throw ConfigError("sweep.delta: entries must be non-negative");
  if (auto v = cf.get("sweep.schedule")) c.schedule = to_doubles("sweep.schedule", *v);
  if (c.schedule.front() < 2.0) throw ConfigError("sweep.schedule: first exponent must be at least 2");
  if (c.schedule.back() > 512.0) throw ConfigError("sweep.schedule: exponents above 512 are not supported");
  for (std::size_t i = 1; i < c.schedule.size(); ++i)
    if (!(c.schedule[i] > c.schedule[i - 1])) throw ConfigError("sweep.schedule: must be strictly increasing");
  if (auto v = cf.get("sweep.seed")) {
    try {
      std::size_t used = 0;
      c.seed = std::stoull(*v, &used, 0);
      if (used != v->size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError("sweep.seed: '" + *v + "' is not an unsigned 64-bit integer");
    }
  }
  if (auto v = cf.get("sweep.tol")) c.tol = to_double("sweep.tol", *v);
  if (c.tol < 0.0) throw ConfigError("sweep.tol: must be non-negative (0 selects the default)");
  if (auto v = cf.get("sweep.max_iter")) c.max_iter = static_cast<int>(to_int("sweep.max_iter", *v));
  if (c.max_iter < 1) throw ConfigError("sweep.max_iter: must be positive");
  if (auto v = cf.get("sweep.cauchy_rtol")) c.cauchy_rtol = to_double("sweep.cauchy_rtol", *v);
  if (auto v = cf.get("sweep.cauchy_stop")) {
    if (*v == "true") c.cauchy_stop = true;
    else if (*v == "false") c.cauchy_stop = false;
    else throw ConfigError("sweep.cauchy_stop: expected true or false");
  }
  if (auto v = cf.get("sweep.eta")) c.eta = to_double("sweep.eta", *v);
  if (!(c.eta > 0.0 && c.eta < 1.0)) throw ConfigError("sweep.eta: must lie in (0, 1)");

  if (auto v = cf.get("nonuniqueness.harmonic")) {
    c.harmonic.clear();
    std::string item;
    std::istringstream is(*v);
    while (std::getline(is, item, ';')) {
      std::istringstream ws(item);
      std::string tok, norm;
      while (ws >> tok) norm += (norm.empty() ? "" : " ") + tok;
      if (norm.empty()) continue;
      try {
        (void)Expression::parse(norm);
      } catch (const ExpressionError& e) {
        throw ConfigError(std::string("nonuniqueness.harmonic: ") + e.what());
      }
      c.harmonic.push_back(norm);
    }
    if (c.harmonic.empty()) throw ConfigError("nonuniqueness.harmonic: list must not be empty");
  }

  c.hash = hex64(fnv1a64(cf.canonical()));
  return c;
}

}  // namespace lsi
