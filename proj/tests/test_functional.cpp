#include "lsi/functional.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lsi;

namespace {

Vector random_vector(int n, unsigned seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-scale, scale);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

std::vector<double> random_weights(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(0.1, 2.0);
  std::vector<double> w(static_cast<std::size_t>(n));
  for (auto& x : w) x = d(rng);
  return w;
}

InverseProblem desk_problem(const Grid& g, const std::string& label = "identity") {
  const GridFunction u0 = GridFunction::sample(
      g, [](double x, double y) { return x * (1 - x) * y * (1 - y) * (1 + 0.5 * std::sin(M_PI * x)); });
  const MeasurementSet m = label == "normal_derivative" ? boundary_measure(g) : disc_measure(g, {0.5, 0.5}, 0.25);
  const ObservationOperator K = builtin_observation(label);
  Vector q = observe(K, u0, m) + random_vector(static_cast<int>(m.size()), 8, 1e-2);
  return {EllipticCoefficients::laplacian(g), u0, K, m, q};
}

}  // namespace

TEST(Exponent, Validation) {
  EXPECT_THROW(Exponent(1.0).validate(), std::invalid_argument);
  EXPECT_THROW(Exponent(600.0).validate(), std::invalid_argument);
  EXPECT_NO_THROW(Exponent::infinity().validate());
  FunctionalParams bad{0.0, 0.0, Exponent(2.0)};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  FunctionalParams inf{1e-2, 0.0, Exponent::infinity()};
  EXPECT_THROW((void)inf.finite_p(), std::invalid_argument);
}

TEST(Norms, NormalisedLpAgainstDirectFormula) {
  const Vector f = random_vector(40, 1);
  const auto w = random_weights(40, 2);
  for (double p : {2.0, 3.5, 16.0}) {
    double num = 0, den = 0;
    for (int i = 0; i < 40; ++i) num += w[i] * std::pow(std::abs(f[i]), p), den += w[i];
    EXPECT_NEAR(normalized_lp_norm(f, w, Exponent(p)), std::pow(num / den, 1 / p), 1e-13);
  }
  EXPECT_EQ(normalized_lp_norm(f, w, Exponent::infinity()), f.cwiseAbs().maxCoeff());
}

TEST(Norms, MonotoneInPAndBoundedBySup) {
  const Vector f = random_vector(50, 3);
  const auto w = random_weights(50, 4);
  double prev = 0;
  for (double p = 2; p <= 512; p *= 2) {
    const double v = normalized_lp_norm(f, w, Exponent(p));
    EXPECT_GE(v, prev - 1e-15);
    EXPECT_LE(v, f.cwiseAbs().maxCoeff() * (1 + 1e-14));
    prev = v;
  }
  EXPECT_NEAR(prev, f.cwiseAbs().maxCoeff(), 0.01);
}

TEST(Norms, NoOverflowAtLargeExponent) {
  Vector f = Vector::Constant(10, 1e200);
  EXPECT_TRUE(std::isfinite(normalized_lp_norm(f, std::vector<double>(10, 1.0), Exponent(512.0))));
  const RegularisedNorm r = regularised_norm(f, std::vector<double>(10, 1.0), 512.0);
  EXPECT_TRUE(std::isfinite(r.value));
  EXPECT_TRUE(r.grad.allFinite());
}

TEST(Norms, RegularisedGradientMatchesFiniteDifferences) {
  const Vector a = random_vector(30, 5);
  const auto w = random_weights(30, 6);
  for (double p : {2.0, 4.0, 16.0, 64.0}) {
    const RegularisedNorm r = regularised_norm(a, w, p);
    for (int i = 0; i < 30; i += 7) {
      Vector ap = a, am = a;
      const double h = 1e-6;
      ap[i] += h, am[i] -= h;
      const double fd = (regularised_norm(ap, w, p).value - regularised_norm(am, w, p).value) / (2 * h);
      EXPECT_NEAR(r.grad[i], fd, 1e-7 * (1 + std::abs(fd))) << "p=" << p;
    }
  }
}

TEST(Norms, DensityHasUnitDualNorm) {
  // Hoelder: sum w |density| <= 1 with equality for p = 2 up to the floor.
  const Vector a = random_vector(60, 7);
  const auto w = random_weights(60, 8);
  for (double p : {2.0, 8.0, 64.0}) {
    const RegularisedNorm r = regularised_norm(a, w, p);
    double tv = 0;
    for (int i = 0; i < 60; ++i) tv += w[i] * std::abs(r.density[i]);
    EXPECT_LE(tv, 1.0 + 1e-12);
    EXPECT_GT(tv, 0.5);
  }
}

TEST(Functional, GradientMatchesFiniteDifferences) {
  const Grid g = make_grid(13, 13);
  for (const std::string label : {"identity", "square", "normal_derivative"}) {
    const InverseProblem prob = desk_problem(g, label);
    GridFunction u = prob.g();
    const Vector pert = random_vector(g.size(), 11, 0.02);
    for (int k = 0; k < g.size(); ++k)
      if (!g.on_boundary(k)) u.values[k] += pert[k];
    for (double p : {2.0, 5.0, 16.0}) {
      const FunctionalParams params{3e-2, 1e-2, Exponent(p)};
      const GridFunction grad = grad_Ep(u, prob, params);
      Vector dir = random_vector(g.size(), 12);
      for (int k = 0; k < g.size(); ++k)
        if (g.on_boundary(k)) dir[k] = 0;
      const double h = 1e-6;
      GridFunction up = u, um = u;
      up.values += h * dir, um.values -= h * dir;
      const double fd = (eval_Ep(up, prob, params) - eval_Ep(um, prob, params)) / (2 * h);
      EXPECT_NEAR(grad.values.dot(dir), fd, 1e-6 * std::abs(fd)) << label << " p=" << p;
    }
  }
}

TEST(Functional, EpBelowEinfAndConvergesToIt) {
  const Grid g = make_grid(17, 17);
  const InverseProblem prob = desk_problem(g);
  const GridFunction u = GridFunction::sample(g, [](double x, double y) { return x * y * (1 - x) * (1 - y); });
  GridFunction v = prob.g();
  for (int k = 0; k < g.size(); ++k)
    if (!g.on_boundary(k)) v.values[k] = u.values[k];
  const double einf = eval_Einf(v, prob, {1e-2, 0, Exponent::infinity()});
  const double e512 = eval_Ep(v, prob, {1e-2, 0, Exponent(512)});
  EXPECT_NEAR(e512, einf, 0.05 * einf + 2.0 / 512);
}

TEST(Functional, ConcentrationMeasuresAreTvBounded) {
  const Grid g = make_grid(13, 13);
  const InverseProblem prob = desk_problem(g);
  const GridFunction u(g);
  GridFunction v = prob.g();
  for (double p : {2.0, 32.0}) {
    const ConcentrationPair m = concentration_measures(v, prob, {1e-2, 0, Exponent(p)});
    EXPECT_LE(m.nu.total_variation(), 1 + 1e-12);
    EXPECT_LE(m.mu.total_variation(), 1 + 1e-12);
    EXPECT_EQ(m.nu.base.size(), prob.gamma().size());
  }
}

TEST(Functional, ProblemValidation) {
  const Grid g = make_grid(9, 9);
  const MeasurementSet m = disc_measure(g, {0.5, 0.5}, 0.25);
  const GridFunction zero(g);
  EXPECT_THROW(InverseProblem(EllipticCoefficients::laplacian(g), zero, identity_observation(), m, Vector(1)),
               std::invalid_argument);
  Vector q = Vector::Zero(static_cast<Eigen::Index>(m.size()));
  q[0] = std::nan("");
  EXPECT_THROW(InverseProblem(EllipticCoefficients::laplacian(g), zero, identity_observation(), m, q),
               std::invalid_argument);
}
