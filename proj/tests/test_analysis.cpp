#include "lsi/analysis.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lsi;

namespace {

Vector random_vector(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1, 1);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

}  // namespace

TEST(EssentialLimsup, EnvelopeProperties) {
  const Grid g = make_grid(17, 17);
  const MeasurementSet base = domain_measure(g);
  const auto radii = default_limsup_radii(g);
  for (unsigned seed = 0; seed < 10; ++seed) {
    const Vector f = random_vector(static_cast<int>(base.size()), seed);
    const Vector s = essential_limsup(g, base, f, radii);
    for (Eigen::Index i = 0; i < f.size(); ++i) EXPECT_LE(f[i], s[i]);
    EXPECT_EQ(s.maxCoeff(), f.maxCoeff());
    const Vector wide = essential_limsup(g, base, f, {3 * g.h()});
    for (Eigen::Index i = 0; i < f.size(); ++i) EXPECT_LE(s[i], wide[i]);
  }
}

TEST(EssentialLimsup, NeighbourhoodMaxOracle) {
  // radius 1.5h on a square grid reaches the 8 neighbours and no further.
  const Grid g = make_grid(9, 9);
  const MeasurementSet base = domain_measure(g);
  const Vector f = random_vector(static_cast<int>(base.size()), 42);
  const Vector s = essential_limsup(g, base, f, {1.5 * g.h()});
  for (int j = 0; j < 9; ++j)
    for (int i = 0; i < 9; ++i) {
      double m = -1e300;
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di)
          if (i + di >= 0 && i + di < 9 && j + dj >= 0 && j + dj < 9) m = std::max(m, f[g.index(i + di, j + dj)]);
      EXPECT_EQ(s[g.index(i, j)], m);
    }
}

TEST(EssentialLimsup, RadiusValidation) {
  const Grid g = make_grid(9, 9);
  const MeasurementSet base = domain_measure(g);
  const Vector f = Vector::Zero(static_cast<Eigen::Index>(base.size()));
  EXPECT_THROW(essential_limsup(g, base, f, {0.5 * g.h()}), std::invalid_argument);
  EXPECT_THROW(essential_limsup(g, base, f, {2 * g.h(), 3 * g.h()}), std::invalid_argument);
  EXPECT_THROW(essential_limsup(g, base, Vector(3), {2 * g.h()}), std::invalid_argument);
}

TEST(Localization, MassOnMaximumBand) {
  const Grid g = make_grid(5, 5);
  const MeasurementSet base = point_measure(g, {0, 1, 2, 3});
  const Vector res = (Vector(4) << 1.0, 0.99, 0.5, -0.2).finished();
  const ConcentrationMeasure nu{base, (Vector(4) << 0.25, 0.25, 0.25, -0.25).finished()};
  const LocalizationReport r = support_localization(nu, res, 0.05);
  EXPECT_DOUBLE_EQ(r.mass_fraction, 0.5);
  EXPECT_DOUBLE_EQ(r.max_residual, 1.0);
  EXPECT_THROW(support_localization(nu, res, 1.5), std::invalid_argument);
}

TEST(Localization, ConcentratesForUniqueMaximum) {
  const Grid g = make_grid(33, 33);
  const MeasurementSet base = domain_measure(g);
  const Vector f = base.restrict(quartic_bump(g, {0.4, 0.6}, 0.3));
  const std::vector<double> ks{2, 8, 32, 128};
  const auto reps = concentration_limit_test(std::vector<Vector>(4, f), f, base, ks);
  for (std::size_t i = 1; i < reps.size(); ++i) EXPECT_GE(reps[i].mass_fraction, reps[i - 1].mass_fraction - 1e-6);
  EXPECT_GT(reps.back().mass_fraction, 0.95);
}

TEST(ErrorBound, ExactSolutionSatisfiesBound) {
  const Grid g = make_grid(13, 13);
  const GridFunction u0 = GridFunction::sample(g, [](double x, double y) { return x * y * (1 - x); });
  const MeasurementSet m = disc_measure(g, {0.5, 0.5}, 0.3);
  const Vector q0 = observe(identity_observation(), u0, m);
  const InverseProblem prob(EllipticCoefficients::laplacian(g), u0, identity_observation(), m, q0);
  const ErrorBoundReport r = check_error_bound(u0, u0, prob, {1e-2, 0, Exponent(4)}, NormMode::Lp);
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_TRUE(r.holds);
  Vector far = q0;
  far[0] += 0.1;
  const InverseProblem noisy = prob.with_data(far);
  EXPECT_THROW(check_error_bound(u0, u0, noisy, {1e-2, 0.01, Exponent(4)}, NormMode::Sup), std::invalid_argument);
}

TEST(TestFunctions, BumpsAreC1AndCompact) {
  EXPECT_EQ(quartic_bump_1d(1.0), 0.0);
  EXPECT_EQ(quartic_bump_1d(0.0), 1.0);
  const Grid g = make_grid(33, 33);
  for (const GridFunction& phi : interior_test_basis(g))
    for (int k = 0; k < g.size(); ++k)
      if (g.on_boundary(k)) EXPECT_EQ(phi.values[k], 0.0);
  EXPECT_EQ(interior_test_basis(g).size(), 9u);
}

TEST(TestFunctions, ExteriorBasisAvoidsGamma) {
  const Grid g = make_grid(33, 33);
  const MeasurementSet gamma = disc_measure(g, {0.5, 0.5}, 0.25);
  const auto basis = exterior_test_basis(g, gamma);
  EXPECT_FALSE(basis.empty());
  for (const GridFunction& phi : basis) EXPECT_TRUE(vanishes_with_gradient(phi, gamma.nodes));
  EXPECT_TRUE(exterior_test_basis(g, domain_measure(g)).empty());
}

TEST(DualResidual, ZeroMeasureAndAdjointIdentity) {
  const Grid g = make_grid(33, 33);
  const EllipticCoefficients c = EllipticCoefficients::laplacian(g);
  const MeasurementSet gamma = disc_measure(g, {0.5, 0.5}, 0.25);
  const auto basis = exterior_test_basis(g, gamma);
  ASSERT_FALSE(basis.empty());
  const MeasurementSet omega = domain_measure(g);
  const ConcentrationMeasure zero{omega, Vector::Zero(static_cast<Eigen::Index>(omega.size()))};
  EXPECT_EQ(dual_residual(zero, c, gamma, basis), 0.0);
  // constants are harmonic, x^2 is not
  const ConcentrationMeasure ones{omega, Vector::Ones(static_cast<Eigen::Index>(omega.size()))};
  EXPECT_LT(dual_residual(ones, c, gamma, basis), 1e-12);
  const GridFunction x2 = GridFunction::sample(g, [](double x, double) { return x * x; });
  const ConcentrationMeasure square{omega, omega.restrict(x2)};
  // summation by parts: sum w x^2 lap(phi) = 2 sum w phi for compactly supported phi
  double oracle = 0;
  for (const GridFunction& phi : basis) {
    double s = 0;
    for (std::size_t i = 0; i < omega.size(); ++i) s += omega.weights[i] * 2.0 * phi.values[omega.nodes[i]];
    oracle = std::max(oracle, std::abs(s) / c2_size(phi));
  }
  EXPECT_GT(oracle, 0.0);
  EXPECT_NEAR(dual_residual(square, c, gamma, basis), oracle, 1e-9 * oracle);
}

TEST(SourceWeakError, ZeroForIdenticalSources) {
  const Grid g = make_grid(33, 33);
  const MeasurementSet disc = disc_measure(g, {0.5, 0.5}, 0.25);
  const GridFunction f = GridFunction::sample(g, [](double x, double y) { return x + y; });
  const auto basis = disc_test_basis(g, {0.5, 0.5}, 0.25);
  EXPECT_EQ(source_weak_error(f, f, disc, basis), 0.0);
  GridFunction f2 = f;
  f2.values.array() += 1.0;
  EXPECT_GT(source_weak_error(f2, f, disc, basis), 0.0);
  EXPECT_THROW(source_weak_error(f, f, disc, {}), std::invalid_argument);
}

TEST(Nonuniqueness, SameCauchyDataDifferentSources) {
  const Grid g = make_grid(17, 17);
  const EllipticCoefficients c = EllipticCoefficients::laplacian(g);
  const GridFunction u1 = GridFunction::sample(g, [](double x, double y) { return x * (1 - x) * y * (1 - y); });
  const GridFunction h = GridFunction::sample(g, [](double x, double) { return x - 0.5; });
  const NonuniquenessResult r = nonuniqueness_pair(c, u1, h);
  EXPECT_EQ(r.trace_gap, 0.0);
  EXPECT_LT(r.normal_gap, 1e-8);
  EXPECT_GT(r.source_gap, 0.0);
  const Vector n1 = detail::normal_derivatives(r.first.u);
  const Vector n2 = detail::normal_derivatives(r.second.u);
  EXPECT_LT((n1 - n2).cwiseAbs().maxCoeff(), 1e-8);
  const GridFunction zero(g);
  const NonuniquenessResult same = nonuniqueness_pair(c, u1, zero);
  EXPECT_EQ(same.source_gap, 0.0);
}
