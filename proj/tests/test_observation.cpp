#include "lsi/functional.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lsi;

namespace {

GridFunction smooth(const Grid& g) {
  return GridFunction::sample(g, [](double x, double y) { return std::sin(2 * x + y) + x * y * y; });
}

}  // namespace

TEST(Observation, IdentityAndNormalDerivativeValues) {
  const Grid g = make_grid(9, 9);
  const GridFunction u = GridFunction::sample(g, [](double x, double y) { return 2 * x + 3 * y; });
  const MeasurementSet b = boundary_measure(g);
  const Vector q = observe(normal_derivative_observation(), u, b);
  for (std::size_t s = 0; s < b.size(); ++s) {
    const Point n = g.outward_normal(b.nodes[s]);
    EXPECT_NEAR(q[static_cast<Eigen::Index>(s)], 2 * n.x + 3 * n.y, 1e-12);
  }
  const Vector r = observe(identity_observation(), u, b);
  EXPECT_EQ(r, b.restrict(u));
}

TEST(Observation, NormalDerivativeNeedsBoundarySites) {
  const Grid g = make_grid(7, 7);
  const GridFunction u(g);
  EXPECT_THROW(observe(normal_derivative_observation(), u, domain_measure(g)), std::invalid_argument);
  EXPECT_THROW(observe(trace_on_line_observation(2), u, line_measure(g, 3)), std::invalid_argument);
  EXPECT_NO_THROW(observe(trace_on_line_observation(3), u, line_measure(g, 3)));
}

TEST(Observation, InconsistentDerivativesAreRejected) {
  EXPECT_THROW(ObservationOperator("bad", [](const ObservationSite&, double r, const Vec2&) { return r * r; },
                                   [](const ObservationSite&, double, const Vec2&) { return 1.0; },
                                   [](const ObservationSite&, double, const Vec2&) { return Vec2{0, 0}; }),
               std::invalid_argument);
  EXPECT_THROW(builtin_observation("cube"), std::invalid_argument);
}

TEST(Observation, JacobianMatchesFiniteDifferences) {
  const Grid g = make_grid(11, 11);
  for (const std::string label : {"identity", "square", "normal_derivative"}) {
    const MeasurementSet m = label == "normal_derivative" ? boundary_measure(g) : disc_measure(g, {0.5, 0.5}, 0.3);
    const ObservationOperator K = builtin_observation(label);
    const GridFunction u = smooth(g);
    const InverseProblem prob(EllipticCoefficients::laplacian(g), u, K, m, observe(K, u, m));
    const SparseMatrix jac = prob.observation_jacobian(u.values);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> d(-1, 1);
    Vector dir(g.size());
    for (int k = 0; k < g.size(); ++k) dir[k] = d(rng);
    const double eps = 1e-6;
    const Vector fd = (prob.observe(u.values + eps * dir) - prob.observe(u.values - eps * dir)) / (2 * eps);
    EXPECT_LT((jac * dir - fd).cwiseAbs().maxCoeff(), 1e-6) << label;
    Vector v(static_cast<Eigen::Index>(m.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = d(rng);
    EXPECT_NEAR(v.dot(jac * dir), prob.observation_jacobian_transpose(u.values, v).dot(dir), 1e-8) << label;
  }
}
