// Command-line driver: forward, invert, sweep, demo-nonuniqueness, verify.

#include "lsi/acceptance.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

fs::path out_dir(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("LSI_OUT_DIR"); env && *env) return env;
  return "lsi_out";
}

lsi::ExperimentConfig load(const std::string& path, const Common& c) {
  lsi::ExperimentConfig cfg = lsi::ExperimentConfig::load(path);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

int cmd_forward(const std::string& path, const Common& c) {
  const lsi::ExperimentConfig cfg = load(path, c);
  const lsi::ProblemSetup s = lsi::ProblemSetup::build(cfg);
  const fs::path dir = out_dir(c);
  fs::create_directories(dir);
  std::ostringstream sol, src, data;
  lsi::write_csv(sol, s.u0);
  lsi::write_csv(src, s.f0);
  data << "node,x,y,q0";
  for (double d : cfg.delta) data << ",q_delta_" << lsi::fmt_real(d);
  data << "\n";
  std::vector<lsi::Vector> noisy;
  for (double d : cfg.delta) noisy.push_back(lsi::make_noise(s.q0, d, cfg.seed));
  for (std::size_t i = 0; i < s.gamma.size(); ++i) {
    const int k = s.gamma.nodes[i];
    const auto e = static_cast<Eigen::Index>(i);
    data << k << ',' << lsi::fmt_real(s.grid.node(k).x) << ',' << lsi::fmt_real(s.grid.node(k).y) << ','
         << lsi::fmt_real(s.q0[e]);
    for (const auto& q : noisy) data << ',' << lsi::fmt_real(q[e]);
    data << "\n";
  }
  lsi::write_file(dir / "solution.csv", sol.str());
  lsi::write_file(dir / "source.csv", src.str());
  lsi::write_file(dir / "data.csv", data.str());
  lsi::write_manifest(dir, cfg, cfg.seed);
  std::cout << "forward: " << s.grid.nx() << "x" << s.grid.ny() << " grid, ||u0||_inf = " << s.u0.sup_norm()
            << ", ||L[u0]||_inf = " << s.f0.sup_norm() << ", " << s.gamma.size() << " observation nodes\n"
            << "wrote " << dir.string() << "\n";
  return 0;
}

void print_cell(const lsi::CellResult& c) {
  if (!c.error.empty()) {
    std::cout << "alpha=" << c.alpha << " delta=" << c.delta << ": error: " << c.error << "\n";
    return;
  }
  for (const auto& r : c.stages)
    std::cout << "alpha=" << r.alpha << " delta=" << r.delta << " p=" << r.p << " E_p=" << r.E_p
              << " iters=" << r.iters << " err=" << r.err_lhs << " bound=" << r.err_rhs
              << (r.bound_holds ? " holds" : " violated") << "\n";
}

int finish(const std::vector<lsi::CellResult>& cells, const fs::path& dir, const lsi::ExperimentConfig& cfg) {
  std::ostringstream summary;
  lsi::write_summary(summary, cells);
  lsi::write_file(dir / "summary.csv", summary.str());
  lsi::write_manifest(dir, cfg, cfg.seed, cells);
  for (const auto& c : cells) print_cell(c);
  std::cout << "wrote " << dir.string() << "\n";
  for (const auto& c : cells)
    if (!c.error.empty()) return 1;
  return 0;
}

int cmd_invert(const std::string& path, const Common& c) {
  const lsi::ExperimentConfig cfg = load(path, c);
  const lsi::ProblemSetup s = lsi::ProblemSetup::build(cfg);
  const fs::path dir = out_dir(c);
  fs::create_directories(dir);
  const auto cells =
      lsi::run_cells(s, {cfg.alpha.front()}, {cfg.delta.front()}, lsi::RunOptions::from(cfg), 1);
  if (cells.front().error.empty()) lsi::write_cell_files(dir, s, cells.front(), cfg.seed);
  return finish(cells, dir, cfg);
}

int cmd_sweep(const std::string& path, const Common& c) {
  const lsi::ExperimentConfig cfg = load(path, c);
  const lsi::ProblemSetup s = lsi::ProblemSetup::build(cfg);
  const fs::path dir = out_dir(c);
  fs::create_directories(dir);
  const auto cells = lsi::run_cells(s, cfg.alpha, cfg.delta, lsi::RunOptions::from(cfg), c.threads);
  for (std::size_t ia = 0; ia < cfg.alpha.size(); ++ia)
    for (std::size_t id = 0; id < cfg.delta.size(); ++id) {
      const auto& cell = cells[ia * cfg.delta.size() + id];
      if (cell.error.empty()) lsi::write_cell_files(dir / lsi::cell_dir_name(ia, id), s, cell, cfg.seed);
    }
  return finish(cells, dir, cfg);
}

int cmd_nonuniqueness(const std::string& path, const Common& c) {
  const lsi::ExperimentConfig cfg = load(path, c);
  const lsi::ProblemSetup s = lsi::ProblemSetup::build(cfg);
  const fs::path dir = out_dir(c);
  fs::create_directories(dir);
  const auto rows = lsi::run_nonuniqueness(s, cfg);
  std::ostringstream table;
  lsi::write_nonuniqueness_table(table, rows);
  lsi::write_file(dir / "nonuniqueness.csv", table.str());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i].result;
    const std::string tag = std::to_string(i);
    for (const auto& [name, fn] : {std::pair{"u1_", &r.first.u}, std::pair{"u2_", &r.second.u},
                                   std::pair{"f1_", &r.first.f}, std::pair{"f2_", &r.second.f}}) {
      std::ostringstream os;
      lsi::write_csv(os, *fn);
      lsi::write_file(dir / (std::string(name) + tag + ".csv"), os.str());
    }
  }
  lsi::write_manifest(dir, cfg, cfg.seed);
  std::cout << table.str() << "wrote " << dir.string() << "\n";
  return 0;
}

int cmd_verify(const Common& c, bool inject) {
  lsi::AcceptanceSuite suite({c.threads, inject});
  const bool ok = suite.run_all(std::cout);
  std::cout << (ok ? "verify: all criteria passed" : "verify: some criteria failed") << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse source identification by L^p / L^inf regularisation"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--out", common.out, "Output directory (default: $LSI_OUT_DIR, else ./lsi_out)");
  app.add_option("--seed", common.seed, "Noise seed, overrides the config");
  app.add_option("--threads", common.threads, "Worker threads for sweeps")->check(CLI::Range(1, 256));
  app.set_version_flag("--version", std::string(lsi::kToolVersion));

  std::string cfg_path;
  auto* forward = app.add_subcommand("forward", "Forward solve: exact solution, source and data");
  auto* invert = app.add_subcommand("invert", "p-continuation for the first (alpha, delta) of the config");
  auto* sweep = app.add_subcommand("sweep", "All (alpha, delta) cells of the config");
  auto* demo = app.add_subcommand("demo-nonuniqueness", "Two sources with identical Cauchy data");
  for (auto* sc : {forward, invert, sweep, demo})
    sc->add_option("config", cfg_path, "Config file")->required()->check(CLI::ExistingFile);
  auto* verify = app.add_subcommand("verify", "Run the acceptance criteria");
  bool inject = false;
  verify->add_flag("--inject-a3-violation", inject, "Negative control for the error-bound check")
      ->group("");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*forward) return cmd_forward(cfg_path, common);
    if (*invert) return cmd_invert(cfg_path, common);
    if (*sweep) return cmd_sweep(cfg_path, common);
    if (*demo) return cmd_nonuniqueness(cfg_path, common);
    if (*verify) return cmd_verify(common, inject);
  } catch (const lsi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
