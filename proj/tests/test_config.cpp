#include "lsi/config.hpp"

#include <gtest/gtest.h>

using namespace lsi;

namespace {

constexpr const char* kMinimal = R"(
# comment
[grid]
nx = 9
ny = 9
[problem]
u0 = x*(1-x)*y*(1-y)
gamma = disc 0.5 0.5 0.25
[sweep]
alpha = 1e-1, 1e-2
delta = 0 1e-3
seed = 42
)";

std::string error_of(const std::string& text) {
  try {
    (void)ExperimentConfig::from_file(ConfigFile::parse_string(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Expression, Arithmetic) {
  EXPECT_DOUBLE_EQ(Expression::parse("1 + 2*3")(0, 0), 7);
  EXPECT_DOUBLE_EQ(Expression::parse("(1 + 2)*3")(0, 0), 9);
  EXPECT_DOUBLE_EQ(Expression::parse("2^3^2")(0, 0), 512);
  EXPECT_DOUBLE_EQ(Expression::parse("-2^2")(0, 0), -4);
  EXPECT_DOUBLE_EQ(Expression::parse("2^-1")(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(Expression::parse("8/4/2")(0, 0), 1);
  EXPECT_DOUBLE_EQ(Expression::parse("1 - 2 - 3")(0, 0), -4);
  EXPECT_DOUBLE_EQ(Expression::parse("1.5e-1*x + y")(2, 3), 3.3);
}

TEST(Expression, FunctionsAndConstants) {
  EXPECT_NEAR(Expression::parse("sin(pi*x)")(0.5, 0), 1.0, 1e-15);
  EXPECT_NEAR(Expression::parse("cos(0) + exp(1) - e")(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(Expression::parse("x*(1-x)*y*(1-y)*(1 + 0.5*sin(pi*x))")(0.5, 0.5), 0.0625 * 1.5, 1e-15);
}

TEST(Expression, Errors) {
  EXPECT_THROW(Expression::parse("1 +"), ExpressionError);
  EXPECT_THROW(Expression::parse("(x"), ExpressionError);
  EXPECT_THROW(Expression::parse("z"), ExpressionError);
  EXPECT_THROW(Expression::parse("sin x"), ExpressionError);
  EXPECT_THROW(Expression::parse("2 3"), ExpressionError);
  try {
    Expression::parse("x + $");
  } catch (const ExpressionError& e) {
    EXPECT_EQ(e.position(), 4u);
  }
}

TEST(ConfigFile, SectionsAndErrors) {
  const ConfigFile cf = ConfigFile::parse_string("top = 1\n[a]\nk = v w  # note\n");
  EXPECT_EQ(cf.get("top"), "1");
  EXPECT_EQ(cf.get("a.k"), "v w");
  EXPECT_FALSE(cf.has("a.missing"));
  EXPECT_THROW(ConfigFile::parse_string("[a]\nk = 1\nk = 2\n"), ConfigError);
  EXPECT_THROW(ConfigFile::parse_string("no equals sign\n"), ConfigError);
  EXPECT_THROW(ConfigFile::parse_string("[unterminated\n"), ConfigError);
  EXPECT_THROW(ConfigFile::load("/nonexistent/file.cfg"), ConfigError);
}

TEST(ExperimentConfig, ParsesFields) {
  const ExperimentConfig c = ExperimentConfig::from_file(ConfigFile::parse_string(kMinimal));
  EXPECT_EQ(c.nx, 9);
  EXPECT_EQ(c.alpha, (std::vector<double>{1e-1, 1e-2}));
  EXPECT_EQ(c.delta, (std::vector<double>{0, 1e-3}));
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.gamma.kind, GammaSpec::Kind::Disc);
  EXPECT_EQ(c.schedule, (std::vector<double>{2, 4, 8, 16, 32, 64}));
  EXPECT_EQ(c.hash.size(), 16u);
}

TEST(ExperimentConfig, ValidationNamesTheField) {
  const std::string base = "[problem]\nu0 = x\n";
  EXPECT_NE(error_of(base + "[sweep]\nalpha = 0\n").find("sweep.alpha"), std::string::npos);
  EXPECT_NE(error_of(base + "[sweep]\ndelta = -1\n").find("sweep.delta"), std::string::npos);
  EXPECT_NE(error_of(base + "[sweep]\nschedule = 4, 2\n").find("sweep.schedule"), std::string::npos);
  EXPECT_NE(error_of(base + "[sweep]\nseed = abc\n").find("sweep.seed"), std::string::npos);
  EXPECT_NE(error_of(base + "[grid]\nnx = 2\n").find("grid.nx"), std::string::npos);
  EXPECT_NE(error_of(base + "[grid]\ncolour = red\n").find("grid.colour"), std::string::npos);
  EXPECT_NE(error_of("[problem]\nu0 = x +\n").find("problem.u0"), std::string::npos);
  EXPECT_NE(error_of("[sweep]\nalpha = 1\n").find("problem.u0"), std::string::npos);
  EXPECT_NE(error_of(base + "gamma = disc 1 2\n").find("problem.gamma"), std::string::npos);
  EXPECT_NE(error_of(base + "observation = cube\n").find("problem.observation"), std::string::npos);
  EXPECT_NE(error_of(base + "[operator]\na11 = 2\n").find("operator.a11"), std::string::npos);
}

TEST(ExperimentConfig, HashIgnoresOrderAndComments) {
  const std::string a = "[sweep]\nalpha = 1e-2\nseed = 3\n[problem]\nu0 = x*y\n";
  const std::string b = "# reordered\n[problem]\nu0   =   x*y\n[sweep]\nseed = 3\nalpha = 1e-2\n";
  const std::string c = "[problem]\nu0 = x*y\n[sweep]\nseed = 4\nalpha = 1e-2\n";
  auto hash = [](const std::string& t) { return ExperimentConfig::from_file(ConfigFile::parse_string(t)).hash; };
  EXPECT_EQ(hash(a), hash(b));
  EXPECT_NE(hash(a), hash(c));
}

TEST(ExperimentConfig, CoefficientExpressions) {
  const ExperimentConfig c = ExperimentConfig::from_file(ConfigFile::parse_string(
      "[grid]\nnx = 5\nny = 5\n[operator]\npreset = nondivergence\na11 = 1 + x\nc = -y\n[problem]\nu0 = x\n"));
  const EllipticCoefficients coef = c.coefficients();
  EXPECT_DOUBLE_EQ(coef.a11().values[4], 2.0);
  EXPECT_DOUBLE_EQ(coef.c().values[20], -1.0);
  const ExperimentConfig bad = ExperimentConfig::from_file(ConfigFile::parse_string(
      "[operator]\npreset = nondivergence\nc = 1\n[problem]\nu0 = x\n"));
  EXPECT_THROW((void)bad.coefficients(), ConfigError);
}
