#pragma once

// Acceptance criteria A1-A12 on the desk problem: 33x33 grid on the unit
// square, L = Laplacian, u0 = x(1-x)y(1-y)(1 + sin(pi x)/2), K = identity on
// the interior disc centred at (0.5, 0.5) with radius 0.25, schedule
// p = 2, 4, ..., 64. Two extra cells exercise a variable-coefficient operator
// and the normal-derivative observation on the boundary.

#include "lsi/experiment.hpp"

#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <tuple>
#include <string>
#include <vector>

namespace lsi {

inline constexpr const char* kDeskConfig = R"(
[grid]
nx = 33
ny = 33
rect = 0 1 0 1

[operator]
preset = laplacian

[problem]
u0 = x*(1-x)*y*(1-y)*(1 + 0.5*sin(pi*x))
gamma = disc 0.5 0.5 0.25
observation = identity

[sweep]
alpha = 1e-1, 1e-2, 1e-3
delta = 0, 1e-3, 1e-2
schedule = 2, 4, 8, 16, 32, 64
seed = 42
)";

inline constexpr const char* kVariableCoefficientConfig = R"(
[grid]
nx = 33
ny = 33

[operator]
preset = nondivergence
a11 = 1 + 0.25*x
a12 = 0.1*x*y
a22 = 1 + 0.25*y
b1 = 0.5
b2 = -0.25
c = -1

[problem]
u0 = x*(1-x)*y*(1-y)*(1 + 0.5*sin(pi*x))
gamma = disc 0.5 0.5 0.25
observation = identity

[sweep]
alpha = 1e-2
delta = 1e-3
seed = 42
)";

inline constexpr const char* kNormalDerivativeConfig = R"(
[grid]
nx = 33
ny = 33

[problem]
u0 = x*(1-x)*y*(1-y)*(1 + 0.5*sin(pi*x))
gamma = boundary
observation = normal_derivative

[sweep]
alpha = 1e-2
delta = 1e-3
seed = 42
)";

struct CriterionResult {
  std::string id;
  bool pass = false;
  std::string detail;
};

struct AcceptanceOptions {
  int threads = 1;
  /// Negative control: adds 1 to every A3 left-hand side.
  bool inject_a3_violation = false;
};

class AcceptanceSuite {
 public:
  explicit AcceptanceSuite(AcceptanceOptions opt = {}) : opt_(opt) {}

  static std::vector<std::string> ids() {
    return {"A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10", "A11", "A12"};
  }

  CriterionResult run(const std::string& id) {
    static const std::map<std::string, CriterionResult (AcceptanceSuite::*)()> table = {
        {"A1", &AcceptanceSuite::a1},   {"A2", &AcceptanceSuite::a2},   {"A3", &AcceptanceSuite::a3},
        {"A4", &AcceptanceSuite::a4},   {"A5", &AcceptanceSuite::a5},   {"A6", &AcceptanceSuite::a6},
        {"A7", &AcceptanceSuite::a7},   {"A8", &AcceptanceSuite::a8},   {"A9", &AcceptanceSuite::a9},
        {"A10", &AcceptanceSuite::a10}, {"A11", &AcceptanceSuite::a11}, {"A12", &AcceptanceSuite::a12}};
    const auto it = table.find(id);
    if (it == table.end()) throw std::invalid_argument("unknown criterion '" + id + "'");
    try {
      return (this->*(it->second))();
    } catch (const std::exception& e) {
      return {id, false, std::string("error: ") + e.what()};
    }
  }

  /// Prints one line per criterion; returns true iff all pass.
  bool run_all(std::ostream& os) {
    bool all = true;
    for (const std::string& id : ids()) {
      const CriterionResult r = run(id);
      os << (r.pass ? "PASS " : "FAIL ") << r.id << ": " << r.detail << "\n" << std::flush;
      all = all && r.pass;
    }
    return all;
  }

  // -------------------------------------------------------------------------
  // Criteria

  /// grad_Ep against central differences along 20 random interior directions.
  CriterionResult a1() {
    const ProblemSetup& s = desk_setup();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    double worst = 0.0;
    int checks = 0;
    const std::vector<std::pair<const ProblemSetup*, double>> problems = {{&s, 1e-2}, {&normal_setup(), 1e-2}};
    for (const auto& [setup, alpha] : problems) {
      const InverseProblem prob = setup->problem(1e-2, 7);
      GridFunction u = setup->u0;
      for (int k = 0; k < u.grid.size(); ++k)
        if (!u.grid.on_boundary(k)) u.values[k] += 0.02 * unit(rng);
      for (double p : {2.0, 4.0, 8.0, 16.0}) {
        const FunctionalParams params{alpha, 1e-2, Exponent(p)};
        const GridFunction grad = grad_Ep(u, prob, params);
        for (int d = 0; d < 20; ++d) {
          GridFunction dir(u.grid);
          for (int k = 0; k < u.grid.size(); ++k)
            if (!u.grid.on_boundary(k)) dir.values[k] = unit(rng);
          dir.values /= dir.values.norm();
          const double analytic = grad.values.dot(dir.values);
          const double eps = 1e-5 * std::max(1.0, u.sup_norm());
          auto at = [&](double t) {
            GridFunction v = u;
            v.values += t * dir.values;
            return eval_Ep(v, prob, params);
          };
          // fourth-order central difference
          const double fd = (8.0 * (at(eps) - at(-eps)) - (at(2.0 * eps) - at(-2.0 * eps))) / (12.0 * eps);
          const double rel = std::abs(fd - analytic) / std::max({std::abs(analytic), std::abs(fd), 1e-300});
          worst = std::max(worst, rel);
          ++checks;
        }
      }
    }
    return {"A1", worst <= 1e-5, "max relative error " + num(worst) + " over " + std::to_string(checks) +
                                     " directional derivatives (limit 1e-5)"};
  }

  /// TV(nu_p), TV(mu_p) <= 1 + 1e-12 at every iterate of every cell.
  CriterionResult a2() {
    double worst = 0.0;
    for (const CellResult* c : all_cells())
      for (const StageRecord& r : c->stages) worst = std::max({worst, r.max_tv_nu, r.max_tv_mu});
    return {"A2", worst <= 1.0 + 1e-12, "max total variation " + num(worst) + " (limit 1 + 1e-12)"};
  }

  /// Lp error bound and minimality certificate on the desk sweep, p > 2.
  CriterionResult a3() {
    double worst_slack = std::numeric_limits<double>::infinity();
    double worst_cert = -std::numeric_limits<double>::infinity();
    std::string where;
    int rows = 0;
    for (const CellResult& c : desk_cells()) {
      for (const StageRecord& r : c.stages) {
        if (!r.converged || r.p <= 2.0) continue;
        ++rows;
        const double lhs = r.err_lhs + (opt_.inject_a3_violation ? 1.0 : 0.0);
        const double slack = r.err_rhs + 1e-6 - lhs;
        if (slack < worst_slack) {
          worst_slack = slack;
          where = "alpha=" + num(r.alpha) + " delta=" + num(r.delta) + " p=" + num(r.p);
        }
        worst_cert = std::max(worst_cert, r.E_p - r.E_u0);
      }
    }
    const bool pass = rows > 0 && worst_slack >= 0.0 && worst_cert <= 1e-8;
    return {"A3", pass,
            "min (rhs + 1e-6 - lhs) " + num(worst_slack) + " at " + where + "; max E_p(u_p) - E_p(u0) " +
                num(worst_cert) + " (limit 1e-8); " + std::to_string(rows) + " converged rows with p > 2"};
  }

  /// Sup-norm bound at p = 64 and the linear rate in alpha for delta = 0.
  CriterionResult a4() {
    const double lu0 = desk_setup().f0.sup_norm();
    double worst_excess = -std::numeric_limits<double>::infinity();
    double worst_rate = 0.0;
    std::string rate_at;
    bool found = true;
    for (const CellResult& c : desk_cells()) {
      const StageRecord* last = stage_at(c, 64.0);
      if (!last) {
        found = false;
        continue;
      }
      worst_excess = std::max(worst_excess, last->sup_lhs - last->sup_rhs - ((1.0 + c.alpha) / 64.0 + 1e-6));
      if (c.delta == 0.0) {
        const double rate = last->sup_lhs / c.alpha;
        if (rate > worst_rate) {
          worst_rate = rate;
          rate_at = num(c.alpha);
        }
      }
    }
    const bool pass = found && worst_excess <= 0.0 && worst_rate <= lu0 + 0.05;
    return {"A4", pass,
            "max (sup lhs - rhs - (1+alpha)/64 - 1e-6) " + num(worst_excess) + "; max sup error / alpha " +
                num(worst_rate) + " at alpha=" + rate_at + " (limit ||L[u0]||_inf + 0.05 = " + num(lu0 + 0.05) + ")"};
  }

  /// Euler-Lagrange residual at converged minimisers.
  CriterionResult a5() {
    double worst_ratio = 0.0, worst_gain = std::numeric_limits<double>::infinity();
    int rows = 0;
    for (const CellResult* c : all_cells()) {
      for (const StageRecord& r : c->stages) {
        if (!r.converged) continue;
        ++rows;
        worst_ratio = std::max(worst_ratio, r.el_residual / r.tol);
        worst_gain = std::min(worst_gain, r.el_residual_init / std::max(r.el_residual, 1e-300));
      }
    }
    const bool pass = rows > 0 && worst_ratio <= 10.0 && worst_gain >= 10.0;
    return {"A5", pass,
            "max el_residual / tol " + num(worst_ratio) + " (limit 10); min initial / converged " + num(worst_gain) +
                " (limit 10)"};
  }

  /// Mass fraction trend and level on the noisy cells.
  CriterionResult a6() {
    bool monotone = true, found = true;
    double min_final = 1.0;
    std::string detail;
    for (const CellResult& c : desk_cells()) {
      if (c.delta != 1e-2) continue;
      double prev = -1.0;
      std::string trend;
      for (double p : {8.0, 16.0, 32.0, 64.0}) {
        const StageRecord* r = stage_at(c, p);
        if (!r) {
          found = false;
          break;
        }
        if (r->mass_fraction < prev - 1e-6) monotone = false;
        prev = r->mass_fraction;
        trend += (trend.empty() ? "" : " ") + num(r->mass_fraction);
      }
      min_final = std::min(min_final, prev);
      detail += (detail.empty() ? "" : "; ") + std::string("alpha=") + num(c.alpha) + ": " + trend;
    }
    const bool pass = found && monotone && min_final >= 0.90;
    return {"A6", pass,
            std::string(monotone ? "non-decreasing" : "not monotone") + ", min at p=64 " + num(min_final) +
                " (limit 0.90); " + detail};
  }

  /// Sup-differences along the schedule.
  CriterionResult a7() {
    bool monotone = true;
    double worst = 0.0;
    for (const CellResult& c : desk_cells()) {
      const auto& d = c.continuation.sup_diffs;
      if (d.size() < 3) {
        monotone = false;
        continue;
      }
      for (std::size_t i = d.size() - 2; i < d.size(); ++i)
        if (d[i] > d[i - 1]) monotone = false;
      worst = std::max(worst, d.back() / c.continuation.u_final.sup_norm());
    }
    return {"A7", monotone && worst <= 1e-3,
            std::string(monotone ? "tail non-increasing" : "tail not monotone") +
                ", max final difference / ||u_final||_inf " + num(worst) + " (limit 1e-3)"};
  }

  /// Dual equation residual over bumps supported away from Gamma.
  CriterionResult a8() {
    double worst = 0.0;
    int rows = 0;
    for (const CellResult* c : all_cells()) {
      for (const StageRecord& r : c->stages) {
        if (!r.converged || std::isnan(r.dual_residual)) continue;
        ++rows;
        worst = std::max(worst, r.dual_residual / r.tol);
      }
    }
    return {"A8", rows > 0 && worst <= 10.0,
            "max dual_residual / tol " + num(worst) + " (limit 10) over " + std::to_string(rows) + " rows"};
  }

  /// Two sources with identical Cauchy data for h = x - 1/2.
  CriterionResult a9() {
    const ProblemSetup& s = desk_setup();
    const GridFunction h = GridFunction::sample(s.grid, [](double x, double) { return x - 0.5; });
    const NonuniquenessResult r = nonuniqueness_pair(s.coef, s.u0, h);
    const bool pass = r.trace_gap == 0.0 && r.normal_constant <= 10.0 && r.source_gap == 0.5;
    return {"A9", pass,
            "trace gap " + num(r.trace_gap) + ", normal gap " + num(r.normal_gap) + " (C = " +
                num(r.normal_constant) + ", limit 10), ||f1 - f2||_inf " + num(r.source_gap) + " (required 0.5)"};
  }

  /// Axioms of the discrete essential limsup.
  CriterionResult a10() {
    const Grid g = make_grid(33, 33);
    const MeasurementSet base = domain_measure(g);
    const std::vector<double> radii = default_limsup_radii(g);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    int bad_upper = 0, bad_max = 0, bad_mono = 0;
    for (int t = 0; t < 50; ++t) {
      Vector f(static_cast<Eigen::Index>(base.size()));
      for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = unit(rng);
      const Vector star = essential_limsup(g, base, f, radii);
      for (Eigen::Index i = 0; i < f.size(); ++i)
        if (!(f[i] <= star[i])) ++bad_upper;
      if (star.maxCoeff() != f.maxCoeff()) ++bad_max;
      for (std::size_t r = 1; r < radii.size(); ++r) {
        const Vector big = essential_limsup(g, base, f, {radii[r - 1]});
        const Vector small = essential_limsup(g, base, f, {radii[r]});
        for (Eigen::Index i = 0; i < f.size(); ++i)
          if (small[i] > big[i]) ++bad_mono;
      }
    }
    return {"A10", bad_upper == 0 && bad_max == 0 && bad_mono == 0,
            "50 random functions: " + std::to_string(bad_upper) + " nodes with f > f*, " + std::to_string(bad_max) +
                " max mismatches, " + std::to_string(bad_mono) + " radius-monotonicity violations"};
  }

  /// Concentration of nu_k for a bump with a unique maximum.
  CriterionResult a11() {
    const Grid g = make_grid(33, 33);
    const MeasurementSet base = domain_measure(g);
    const GridFunction bump = quartic_bump(g, {0.5, 0.5}, 0.3);
    const Vector f = base.restrict(bump);
    const std::vector<double> ks = doubling_schedule(64.0);
    const std::vector<Vector> seq(ks.size(), f);
    const std::vector<LocalizationReport> reps = concentration_limit_test(seq, f, base, ks, 0.05);
    bool monotone = true;
    std::string trend;
    for (std::size_t i = 0; i < reps.size(); ++i) {
      if (i > 0 && reps[i].mass_fraction < reps[i - 1].mass_fraction - 1e-6) monotone = false;
      trend += (trend.empty() ? "" : " ") + num(reps[i].mass_fraction);
    }
    const double last = reps.back().mass_fraction;
    return {"A11", monotone && last >= 0.95,
            "mass fractions k=2..64: " + trend + " (final limit 0.95" + (monotone ? ", non-decreasing)" : ", NOT monotone)")};
  }

  /// Source weak error along delta = alpha.
  CriterionResult a12() {
    const ProblemSetup& s = desk_setup();
    const double lu0 = s.f0.sup_norm();
    std::vector<double> values, ratios;
    for (double a : {1e-1, 1e-2, 1e-3}) {
      const CellResult& c = cell(s, a, a);
      if (!c.error.empty()) throw std::runtime_error(c.error);
      const double v = c.stages.back().source_weak_error;
      values.push_back(v);
      ratios.push_back(v / (2.0 * a + a * lu0));
    }
    bool monotone = true;
    for (std::size_t i = 1; i < values.size(); ++i)
      if (!(values[i] < values[i - 1])) monotone = false;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    bool finite = true;
    for (double r : ratios) {
      finite = finite && std::isfinite(r) && r > 0.0;
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    const double spread = hi / lo;
    return {"A12", monotone && finite && spread <= 3.0,
            "source_weak_error " + num(values[0]) + " " + num(values[1]) + " " + num(values[2]) +
                (monotone ? " (decreasing)" : " (NOT decreasing)") + "; ratios " + num(ratios[0]) + " " +
                num(ratios[1]) + " " + num(ratios[2]) + ", constant " + num(hi) + ", spread " + num(spread) +
                " (limit 3)"};
  }

  // -------------------------------------------------------------------------
  // Shared runs

  const ProblemSetup& desk_setup() { return setup_for(kDeskConfig); }
  const ProblemSetup& normal_setup() { return setup_for(kNormalDerivativeConfig); }
  const ProblemSetup& variable_setup() { return setup_for(kVariableCoefficientConfig); }

  /// The nine desk cells, in (alpha, delta) config order.
  const std::vector<CellResult>& desk_cells() {
    if (!desk_cells_) {
      const ExperimentConfig& cfg = config_for(kDeskConfig);
      desk_cells_ = run_cells(desk_setup(), cfg.alpha, cfg.delta, RunOptions::from(cfg), opt_.threads);
      for (const CellResult& c : *desk_cells_)
        if (!c.error.empty()) throw std::runtime_error("desk cell failed: " + c.error);
    }
    return *desk_cells_;
  }

 private:
  static std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
  }

  static const StageRecord* stage_at(const CellResult& c, double p) {
    for (const StageRecord& r : c.stages)
      if (r.p == p) return &r;
    return nullptr;
  }

  const ExperimentConfig& config_for(const char* text) {
    auto it = configs_.find(text);
    if (it == configs_.end()) it = configs_.emplace(text, ExperimentConfig::from_file(ConfigFile::parse_string(text))).first;
    return it->second;
  }

  const ProblemSetup& setup_for(const char* text) {
    auto it = setups_.find(text);
    if (it == setups_.end())
      it = setups_.emplace(text, std::make_unique<ProblemSetup>(ProblemSetup::build(config_for(text)))).first;
    return *it->second;
  }

  /// A single cell of a setup, reusing the desk sweep where it overlaps.
  const CellResult& cell(const ProblemSetup& s, double alpha, double delta) {
    if (&s == &desk_setup())
      for (const CellResult& c : desk_cells())
        if (c.alpha == alpha && c.delta == delta) return c;
    const auto key = std::make_tuple(&s, alpha, delta);
    auto it = extra_.find(key);
    if (it == extra_.end()) {
      const char* text = &s == &desk_setup() ? kDeskConfig : &s == &normal_setup() ? kNormalDerivativeConfig
                                                                                    : kVariableCoefficientConfig;
      it = extra_.emplace(key, run_cell(s, alpha, delta, RunOptions::from(config_for(text)))).first;
    }
    return it->second;
  }

  std::vector<const CellResult*> all_cells() {
    std::vector<const CellResult*> out;
    for (const CellResult& c : desk_cells()) out.push_back(&c);
    out.push_back(&cell(variable_setup(), 1e-2, 1e-3));
    out.push_back(&cell(normal_setup(), 1e-2, 1e-3));
    for (const CellResult* c : out)
      if (!c->error.empty()) throw std::runtime_error(c->error);
    return out;
  }

  AcceptanceOptions opt_;
  std::map<const char*, ExperimentConfig> configs_;
  std::map<const char*, std::unique_ptr<ProblemSetup>> setups_;
  std::optional<std::vector<CellResult>> desk_cells_;
  std::map<std::tuple<const ProblemSetup*, double, double>, CellResult> extra_;
};

}  // namespace lsi
