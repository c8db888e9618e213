#pragma once

// Experiment orchestration: problem setup from a config, seeded noise,
// (alpha, delta) cells run through the p-continuation and the analysis
// instruments, and CSV / JSON emission.

#include "lsi/analysis.hpp"
#include "lsi/config.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#ifndef LSI_VERSION
#define LSI_VERSION "0.1.0"
#endif

namespace lsi {

inline constexpr const char* kToolVersion = LSI_VERSION;

/// q0 + delta * r with r uniform in [-1, 1] from a 64-bit Mersenne twister;
/// |q_delta - q0| <= delta holds exactly.
inline Vector make_noise(const Vector& q0, double delta, std::uint64_t seed) {
  if (!(delta >= 0.0)) throw std::invalid_argument("make_noise: delta must be non-negative");
  std::mt19937_64 rng(seed);
  Vector q = q0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
    const double r = 2.0 * unit - 1.0;
    double v = q0[i] + delta * r;
    while (std::abs(v - q0[i]) > delta) v = std::nextafter(v, q0[i]);
    q[i] = v;
  }
  return q;
}

/// Everything derived from the config that does not depend on (alpha, delta).
struct ProblemSetup {
  Grid grid;
  EllipticCoefficients coef;
  GridFunction g;
  GridFunction u0;  // exact discrete solution (forward solve)
  GridFunction f0;  // its source, zero on boundary nodes
  MeasurementSet gamma;
  ObservationOperator K;
  Vector q0;
  std::optional<std::pair<Point, double>> disc;  // Gamma as a disc, when it is one

  static ProblemSetup build(const ExperimentConfig& cfg) {
    const Grid grid = cfg.grid();
    EllipticCoefficients coef = cfg.coefficients();
    auto sample = [&](const std::string& field, const std::string& text) {
      const Expression e = Expression::parse(text);
      GridFunction out = GridFunction::sample(grid, [&](double x, double y) { return e(x, y); });
      if (!out.finite()) throw ConfigError(field + ": expression is not finite on the grid");
      return out;
    };
    GridFunction g(grid);
    GridFunction f0(grid);
    if (cfg.u0) {
      const GridFunction u0s = sample("problem.u0", *cfg.u0);
      if (cfg.g) {
        const GridFunction gs = sample("problem.g", *cfg.g);
        for (int k = 0; k < grid.size(); ++k)
          if (grid.on_boundary(k) && std::abs(gs.values[k] - u0s.values[k]) > 1e-12 * (1.0 + std::abs(gs.values[k])))
            throw ConfigError("problem.g: does not match problem.u0 on the boundary");
      }
      for (int k = 0; k < grid.size(); ++k)
        if (grid.on_boundary(k)) g.values[k] = u0s.values[k];
      f0 = apply_L(coef, u0s);
    } else {
      const GridFunction gs = sample("problem.g", *cfg.g);
      for (int k = 0; k < grid.size(); ++k)
        if (grid.on_boundary(k)) g.values[k] = gs.values[k];
      f0 = sample("problem.f", *cfg.f);
    }
    for (int k = 0; k < grid.size(); ++k)
      if (grid.on_boundary(k)) f0.values[k] = 0.0;
    GridFunction u0 = solve_dirichlet(coef, f0, g);
    MeasurementSet gamma = cfg.gamma.build(grid);
    ObservationOperator K = cfg.observation_operator();
    try {
      K.check_sites(grid, gamma);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("problem.observation: ") + e.what());
    }
    Vector q0 = observe(K, u0, gamma);
    std::optional<std::pair<Point, double>> disc;
    if (cfg.gamma.kind == GammaSpec::Kind::Disc) disc = std::make_pair(cfg.gamma.centre, cfg.gamma.radius);
    return {grid,          std::move(coef), std::move(g),  std::move(u0), std::move(f0),
            std::move(gamma), std::move(K), std::move(q0), disc};
  }

  [[nodiscard]] InverseProblem problem(double delta, std::uint64_t seed) const {
    return {coef, g, K, gamma, make_noise(q0, delta, seed)};
  }
};

/// One row of summary.csv plus diagnostics used by the acceptance suite.
struct StageRecord {
  double alpha = 0.0, delta = 0.0, p = 0.0;
  double E_p = 0.0, grad_norm = 0.0;
  int iters = 0;
  bool converged = false;
  double tol = 0.0;
  double err_lhs = 0.0, err_rhs = 0.0;
  bool bound_holds = false;
  double sup_lhs = 0.0, sup_rhs = 0.0;
  double E_u0 = 0.0;  // E_p at the exact solution (minimality certificate)
  double mass_fraction = 0.0;
  double cauchy_diff = std::numeric_limits<double>::quiet_NaN();
  double dual_residual = std::numeric_limits<double>::quiet_NaN();
  double el_residual = 0.0;
  double el_residual_init = 0.0;
  double max_tv_nu = 0.0, max_tv_mu = 0.0;
  double source_weak_error = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
};

struct CellResult {
  double alpha = 0.0, delta = 0.0;
  std::vector<StageRecord> stages;
  ContinuationReport continuation;
  std::string error;  // non-empty when the cell failed
};

struct RunOptions {
  std::uint64_t seed = 1;
  double tol = 0.0;
  int max_iter = 5000;
  bool cauchy_stop = true;
  double cauchy_rtol = 1e-4;
  double eta = 0.05;
  std::vector<double> schedule{2, 4, 8, 16, 32, 64};

  static RunOptions from(const ExperimentConfig& c) {
    RunOptions o;
    o.seed = c.seed;
    o.tol = c.tol;
    o.max_iter = c.max_iter;
    o.cauchy_stop = c.cauchy_stop;
    o.cauchy_rtol = c.cauchy_rtol;
    o.eta = c.eta;
    o.schedule = c.schedule;
    return o;
  }
};

inline GridFunction interior_source(const EllipticCoefficients& coef, const GridFunction& u) {
  GridFunction f = apply_L(coef, u);
  for (int k = 0; k < u.grid.size(); ++k)
    if (u.grid.on_boundary(k)) f.values[k] = 0.0;
  return f;
}

inline CellResult run_cell(const ProblemSetup& setup, double alpha, double delta, const RunOptions& opt) {
  CellResult cell;
  cell.alpha = alpha;
  cell.delta = delta;
  const InverseProblem prob = setup.problem(delta, opt.seed);
  ContinuationOptions copt;
  copt.minimize.max_iter = opt.max_iter;
  copt.cauchy_stop = opt.cauchy_stop;
  copt.cauchy_rtol = opt.cauchy_rtol;
  cell.continuation = p_continuation(prob, alpha, delta, opt.schedule, opt.tol, copt);

  const std::vector<GridFunction> el_basis = interior_test_basis(setup.grid);
  const std::vector<GridFunction> dual_basis = exterior_test_basis(setup.grid, setup.gamma);
  std::vector<GridFunction> source_basis;
  if (setup.disc && setup.K.label() == "identity") {
    std::vector<char> inside(static_cast<std::size_t>(setup.grid.size()), 0);
    for (int k : setup.gamma.nodes) inside[static_cast<std::size_t>(k)] = 1;
    for (GridFunction& phi : disc_test_basis(setup.grid, setup.disc->first, setup.disc->second)) {
      bool ok = true;
      for (int k = 0; k < setup.grid.size() && ok; ++k)
        if (!inside[static_cast<std::size_t>(k)] && phi.values[k] != 0.0) ok = false;
      if (ok) source_basis.push_back(std::move(phi));
    }
  }
  const GridFunction init = solve_dirichlet(setup.coef, GridFunction(setup.grid), setup.g);

  for (std::size_t s = 0; s < cell.continuation.stages.size(); ++s) {
    const SolveReport& st = cell.continuation.stages[s];
    const FunctionalParams params{alpha, delta, st.p};
    StageRecord r;
    r.alpha = alpha;
    r.delta = delta;
    r.p = st.p.value();
    r.E_p = st.E_value;
    r.grad_norm = st.grad_norm;
    r.iters = st.iterations;
    r.converged = st.converged;
    r.tol = st.tol;
    r.wall_ms = st.wall_ms;
    r.max_tv_nu = st.max_tv_nu;
    r.max_tv_mu = st.max_tv_mu;
    const ErrorBoundReport lp = check_error_bound(st.u, setup.u0, prob, params, NormMode::Lp);
    const ErrorBoundReport sup = check_error_bound(st.u, setup.u0, prob, params, NormMode::Sup);
    r.err_lhs = lp.lhs;
    r.err_rhs = lp.rhs;
    r.bound_holds = lp.holds;
    r.sup_lhs = sup.lhs;
    r.sup_rhs = sup.rhs;
    r.E_u0 = eval_Ep(setup.u0, prob, params);
    const ConcentrationPair m = concentration_measures(st.u, prob, params);
    r.mass_fraction =
        support_localization(m.nu, prob.data_residual(st.u.values), opt.eta, r.p).mass_fraction;
    if (s > 0) r.cauchy_diff = cell.continuation.sup_diffs[s - 1];
    if (!dual_basis.empty()) r.dual_residual = dual_residual(m.mu, setup.coef, setup.gamma, dual_basis);
    r.el_residual = el_residual(st.u, m.nu, m.mu, prob, params, el_basis);
    const ConcentrationPair mi = concentration_measures(init, prob, params);
    r.el_residual_init = el_residual(init, mi.nu, mi.mu, prob, params, el_basis);
    if (!source_basis.empty())
      r.source_weak_error =
          source_weak_error(interior_source(setup.coef, st.u), setup.f0, setup.gamma, source_basis);
    cell.stages.push_back(r);
  }
  return cell;
}

/// Runs every (alpha, delta) cell on a pool of `threads` workers. Results
/// come back in (alpha, delta) order of the config regardless of scheduling.
inline std::vector<CellResult> run_cells(const ProblemSetup& setup, const std::vector<double>& alphas,
                                         const std::vector<double>& deltas, const RunOptions& opt, int threads = 1) {
  std::vector<std::pair<double, double>> jobs;
  for (double a : alphas)
    for (double d : deltas) jobs.emplace_back(a, d);
  std::vector<CellResult> out(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      try {
        out[j] = run_cell(setup, jobs[j].first, jobs[j].second, opt);
      } catch (const std::exception& e) {
        out[j].alpha = jobs[j].first;
        out[j].delta = jobs[j].second;
        out[j].error = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Emission

inline std::string fmt_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string p_tag(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", p);
  return buf;
}

inline constexpr const char* kSummaryHeader =
    "alpha,delta,p,E_p,grad_norm,iters,err_lhs,err_rhs,bound_holds,mass_fraction,cauchy_diff,dual_residual,wall_ms";

/// Rows sorted by (alpha, delta, p).
inline void write_summary(std::ostream& os, const std::vector<CellResult>& cells) {
  std::vector<StageRecord> rows;
  for (const auto& c : cells) rows.insert(rows.end(), c.stages.begin(), c.stages.end());
  std::stable_sort(rows.begin(), rows.end(), [](const StageRecord& a, const StageRecord& b) {
    if (a.alpha != b.alpha) return a.alpha < b.alpha;
    if (a.delta != b.delta) return a.delta < b.delta;
    return a.p < b.p;
  });
  os << kSummaryHeader << "\n";
  for (const auto& r : rows) {
    os << fmt_real(r.alpha) << ',' << fmt_real(r.delta) << ',' << fmt_real(r.p) << ',' << fmt_real(r.E_p) << ','
       << fmt_real(r.grad_norm) << ',' << r.iters << ',' << fmt_real(r.err_lhs) << ',' << fmt_real(r.err_rhs) << ','
       << (r.bound_holds ? "true" : "false") << ',' << fmt_real(r.mass_fraction) << ',' << fmt_real(r.cauchy_diff)
       << ',' << fmt_real(r.dual_residual) << ',' << fmt_real(r.wall_ms) << "\n";
  }
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os << content;
}

/// solution_p<k>.csv, nu_p<k>.csv and mu_p<k>.csv for every stage.
inline void write_cell_files(const std::filesystem::path& dir, const ProblemSetup& setup, const CellResult& cell,
                             std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  const InverseProblem prob = setup.problem(cell.delta, seed);
  for (const SolveReport& st : cell.continuation.stages) {
    const std::string tag = p_tag(st.p.value());
    std::ostringstream sol, nu, mu;
    write_csv(sol, st.u);
    const ConcentrationPair m = concentration_measures(st.u, prob, {cell.alpha, cell.delta, st.p});
    write_csv(nu, m.nu, setup.grid);
    write_csv(mu, m.mu, setup.grid);
    write_file(dir / ("solution_p" + tag + ".csv"), sol.str());
    write_file(dir / ("nu_p" + tag + ".csv"), nu.str());
    write_file(dir / ("mu_p" + tag + ".csv"), mu.str());
  }
}

inline void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& cfg, std::uint64_t seed,
                           const std::vector<CellResult>& cells = {}) {
  nlohmann::ordered_json j;
  j["config_hash"] = cfg.hash;
  j["seed"] = seed;
  j["grid"] = {{"nx", cfg.nx}, {"ny", cfg.ny}, {"rect", {cfg.rect.ax, cfg.rect.bx, cfg.rect.ay, cfg.rect.by}}};
  j["schedule"] = cfg.schedule;
  j["tool_version"] = kToolVersion;
  if (!cells.empty()) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& c : cells) {
      nlohmann::ordered_json e;
      e["alpha"] = c.alpha;
      e["delta"] = c.delta;
      e["status"] = c.error.empty() ? "ok" : "error";
      if (!c.error.empty()) e["error"] = c.error;
      else e["all_converged"] = c.continuation.all_converged;
      arr.push_back(e);
    }
    j["cells"] = arr;
  }
  write_file(dir / "manifest.json", j.dump(2) + "\n");
}

/// Cell subdirectory name inside a sweep output directory.
inline std::string cell_dir_name(std::size_t ia, std::size_t id) {
  return "cell_a" + std::to_string(ia) + "_d" + std::to_string(id);
}

// ---------------------------------------------------------------------------
// Non-uniqueness table

struct NonuniquenessRow {
  std::string h;
  NonuniquenessResult result;
};

inline std::vector<NonuniquenessRow> run_nonuniqueness(const ProblemSetup& setup, const ExperimentConfig& cfg) {
  std::vector<NonuniquenessRow> rows;
  for (const std::string& text : cfg.harmonic) {
    const Expression e = Expression::parse(text);
    const GridFunction h = GridFunction::sample(setup.grid, [&](double x, double y) { return e(x, y); });
    rows.push_back({text, nonuniqueness_pair(setup.coef, setup.u0, h)});
  }
  return rows;
}

inline void write_nonuniqueness_table(std::ostream& os, const std::vector<NonuniquenessRow>& rows) {
  os << "h,trace_gap,normal_gap,normal_constant,source_gap,h_sup\n";
  for (const auto& r : rows)
    os << '"' << r.h << '"' << ',' << fmt_real(r.result.trace_gap) << ',' << fmt_real(r.result.normal_gap) << ','
       << fmt_real(r.result.normal_constant) << ',' << fmt_real(r.result.source_gap) << ','
       << fmt_real(r.result.h_sup) << "\n";
}

}  // namespace lsi
