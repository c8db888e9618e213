#include "lsi/experiment.hpp"

#include <gtest/gtest.h>

#include <cstring>

using namespace lsi;

namespace {

constexpr const char* kSmall = R"(
[grid]
nx = 13
ny = 13
[problem]
u0 = x*(1-x)*y*(1-y)*(1 + 0.5*sin(pi*x))
gamma = disc 0.5 0.5 0.3
[sweep]
alpha = 1e-2, 1e-1
delta = 0, 1e-2
schedule = 2, 4, 8
seed = 7
)";

ExperimentConfig small() { return ExperimentConfig::from_file(ConfigFile::parse_string(kSmall)); }

std::string drop_last_column(const std::string& csv) {
  std::istringstream is(csv);
  std::string line, out;
  while (std::getline(is, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

}  // namespace

TEST(Noise, WithinBoundAndDeterministic) {
  const Vector q0 = Vector::LinSpaced(500, -3, 3);
  for (double delta : {0.0, 1e-3, 0.5}) {
    const Vector a = make_noise(q0, delta, 99);
    const Vector b = make_noise(q0, delta, 99);
    EXPECT_LE((a - q0).cwiseAbs().maxCoeff(), delta);
    EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * 500), 0);
  }
  EXPECT_EQ(make_noise(q0, 0.0, 5), q0);
  EXPECT_NE(make_noise(q0, 1e-2, 1), make_noise(q0, 1e-2, 2));
  EXPECT_THROW(make_noise(q0, -1.0, 1), std::invalid_argument);
}

TEST(Noise, UsesTheWholeInterval) {
  const Vector q0 = Vector::Zero(20000);
  const Vector q = make_noise(q0, 1.0, 3);
  EXPECT_GT(q.maxCoeff(), 0.99);
  EXPECT_LT(q.minCoeff(), -0.99);
  EXPECT_NEAR(q.mean(), 0.0, 0.02);
}

TEST(Setup, ForwardSolveAndBoundaryCheck) {
  const ProblemSetup s = ProblemSetup::build(small());
  EXPECT_EQ(s.q0.size(), static_cast<Eigen::Index>(s.gamma.size()));
  for (int k = 0; k < s.grid.size(); ++k)
    if (s.grid.on_boundary(k)) EXPECT_EQ(s.u0.values[k], s.g.values[k]);
  ExperimentConfig c = small();
  c.g = "x + 1";
  EXPECT_THROW(ProblemSetup::build(c), ConfigError);
}

TEST(Run, SummaryRowsSortedAndReproducible) {
  const ExperimentConfig cfg = small();
  const ProblemSetup s = ProblemSetup::build(cfg);
  const RunOptions opt = RunOptions::from(cfg);
  const auto one = run_cells(s, cfg.alpha, cfg.delta, opt, 1);
  const auto two = run_cells(s, cfg.alpha, cfg.delta, opt, 2);
  std::ostringstream a, b;
  write_summary(a, one);
  write_summary(b, two);
  EXPECT_EQ(drop_last_column(a.str()), drop_last_column(b.str()));
  std::istringstream is(a.str());
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, kSummaryHeader);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(is, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 12u);
  EXPECT_EQ(rows.front().rfind("0.01,0,2,", 0), 0u);
  EXPECT_EQ(rows.back().rfind("0.10000000000000001,0.01,8,", 0), 0u);
  EXPECT_NE(rows.front().find(",nan,"), std::string::npos);
  for (const auto& c : one) {
    EXPECT_TRUE(c.error.empty());
    for (const auto& r : c.stages) {
      EXPECT_LE(r.max_tv_nu, 1 + 1e-12);
      EXPECT_LE(r.E_p, r.E_u0 + 1e-8);
    }
  }
}

TEST(Run, CellFailureIsRecordedNotFatal) {
  const ExperimentConfig cfg = small();
  const ProblemSetup s = ProblemSetup::build(cfg);
  RunOptions opt = RunOptions::from(cfg);
  opt.schedule = {2, 1};  // invalid, rejected inside the cell
  const auto cells = run_cells(s, {1e-2}, {0.0}, opt);
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_FALSE(cells[0].error.empty());
}

TEST(Emit, FilesAndManifest) {
  const ExperimentConfig cfg = small();
  const ProblemSetup s = ProblemSetup::build(cfg);
  const auto cells = run_cells(s, {1e-2}, {1e-2}, RunOptions::from(cfg));
  const auto dir = std::filesystem::temp_directory_path() / "lsi_emit_test";
  std::filesystem::remove_all(dir);
  write_cell_files(dir, s, cells[0], cfg.seed);
  write_manifest(dir, cfg, cfg.seed, cells);
  for (const char* f : {"solution_p2.csv", "nu_p4.csv", "mu_p8.csv", "manifest.json"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  std::ifstream is(dir / "manifest.json");
  const auto j = nlohmann::json::parse(is);
  for (const char* key : {"config_hash", "seed", "grid", "schedule", "tool_version"}) EXPECT_TRUE(j.contains(key));
  EXPECT_EQ(j["config_hash"], cfg.hash);
  EXPECT_EQ(j["seed"].get<std::uint64_t>(), 7u);
  std::ifstream sol(dir / "solution_p8.csv");
  const GridFunction u = read_csv(sol, s.grid);
  EXPECT_EQ(u.values, cells[0].continuation.stages.back().u.values);
  std::filesystem::remove_all(dir);
}

TEST(Nonuniqueness, TableHasOneRowPerHarmonic) {
  ExperimentConfig cfg = small();
  cfg.harmonic = {"x - 0.5", "x^2 - y^2"};
  const ProblemSetup s = ProblemSetup::build(cfg);
  const auto rows = run_nonuniqueness(s, cfg);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) EXPECT_EQ(r.result.trace_gap, 0.0);
  std::ostringstream os;
  write_nonuniqueness_table(os, rows);
  const std::string table = os.str();
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
}
