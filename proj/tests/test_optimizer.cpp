#include "lsi/optimizer.hpp"

#include <gtest/gtest.h>

using namespace lsi;

namespace {

InverseProblem problem(const Grid& g, double delta = 0.0) {
  const GridFunction u0 = GridFunction::sample(
      g, [](double x, double y) { return x * (1 - x) * y * (1 - y) * (1 + 0.5 * std::sin(M_PI * x)); });
  const MeasurementSet m = disc_measure(g, {0.5, 0.5}, 0.25);
  Vector q = observe(identity_observation(), u0, m);
  for (Eigen::Index i = 0; i < q.size(); ++i) q[i] += (i % 2 ? delta : -delta);
  return {EllipticCoefficients::laplacian(g), u0, identity_observation(), m, q};
}

GridFunction start(const InverseProblem& prob) {
  return solve_dirichlet(prob.coef(), GridFunction(prob.grid()), prob.g());
}

}  // namespace

TEST(Lbfgs, MinimisesRosenbrock) {
  const LbfgsObjective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double a = 1 - x[0], b = x[1] - x[0] * x[0];
    g.resize(2);
    g[0] = -2 * a - 400 * x[0] * b;
    g[1] = 200 * b;
    return a * a + 100 * b * b;
  };
  LbfgsOptions opt;
  opt.tol = 1e-10;
  const LbfgsResult r = lbfgs_minimize(f, Eigen::Vector2d(-1.2, 1.0), opt);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-6);
  EXPECT_NEAR(r.x[1], 1.0, 1e-6);
  for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_LE(r.history[i], r.history[i - 1]);
}

TEST(Minimize, ConvergesWithStationaryGradient) {
  const Grid g = make_grid(17, 17);
  const InverseProblem prob = problem(g, 1e-3);
  for (double p : {2.0, 8.0}) {
    const FunctionalParams params{1e-2, 1e-3, Exponent(p)};
    const SolveReport r = minimize_Ep(prob, params, start(prob));
    EXPECT_TRUE(r.converged) << p;
    EXPECT_LE(r.grad_norm, r.tol);
    EXPECT_LE(r.E_value, r.E_history.front());
    for (std::size_t i = 1; i < r.E_history.size(); ++i) EXPECT_LE(r.E_history[i], r.E_history[i - 1]);
    EXPECT_NEAR(r.E_value, eval_Ep(r.u, prob, params), 1e-14);
    for (int k = 0; k < g.size(); ++k)
      if (g.on_boundary(k)) EXPECT_EQ(r.u.values[k], prob.g().values[k]);
    EXPECT_LE(r.max_tv_nu, 1 + 1e-12);
    EXPECT_LE(r.max_tv_mu, 1 + 1e-12);
  }
}

TEST(Minimize, MinimiserBeatsExactSolution) {
  const Grid g = make_grid(17, 17);
  const InverseProblem prob = problem(g, 1e-2);
  const FunctionalParams params{1e-2, 1e-2, Exponent(4.0)};
  const SolveReport r = minimize_Ep(prob, params, start(prob));
  GridFunction u0 = prob.g();  // the sampled exact solution carries the boundary data
  EXPECT_LE(r.E_value, eval_Ep(u0, prob, params) + 1e-8);
}

TEST(Minimize, RejectsBadInitialGuess) {
  const Grid g = make_grid(9, 9);
  const InverseProblem prob = problem(g);
  GridFunction bad = start(prob);
  bad.values[0] += 1;
  EXPECT_THROW(minimize_Ep(prob, {1e-2, 0, Exponent(2)}, bad), std::invalid_argument);
}

TEST(Continuation, ScheduleValidation) {
  EXPECT_THROW(validate_schedule({}), std::invalid_argument);
  EXPECT_THROW(validate_schedule({1.5, 4}), std::invalid_argument);
  EXPECT_THROW(validate_schedule({2, 8, 4}), std::invalid_argument);
  EXPECT_THROW(validate_schedule({2, 1024}), std::invalid_argument);
  EXPECT_EQ(doubling_schedule(64), (std::vector<double>{2, 4, 8, 16, 32, 64}));
}

TEST(Continuation, OneStagePerExponentAndWarmStart) {
  const Grid g = make_grid(13, 13);
  const InverseProblem prob = problem(g, 1e-3);
  ContinuationOptions opt;
  opt.cauchy_stop = false;
  const ContinuationReport r = p_continuation(prob, 1e-2, 1e-3, {2, 4, 8}, 0.0, opt);
  ASSERT_EQ(r.stages.size(), 3u);
  EXPECT_EQ(r.sup_diffs.size(), 2u);
  EXPECT_EQ(r.u_final.values, r.stages.back().u.values);
  EXPECT_TRUE(r.all_converged);
  EXPECT_TRUE(r.final_measures.has_value());
  EXPECT_NEAR(r.sup_diffs[0], (r.stages[1].u.values - r.stages[0].u.values).cwiseAbs().maxCoeff(), 0);
}

TEST(Continuation, CauchyStopEndsEarly) {
  const Grid g = make_grid(9, 9);
  const InverseProblem prob = problem(g);
  ContinuationOptions opt;
  opt.cauchy_rtol = 1e6;  // any difference counts as small
  const ContinuationReport r = p_continuation(prob, 1e-2, 0, {2, 4, 8, 16, 32}, 0.0, opt);
  EXPECT_EQ(r.stages.size(), 3u);
  EXPECT_TRUE(r.stopped_early);
}

TEST(ElResidual, VanishesAtMinimiserNotAtStart) {
  const Grid g = make_grid(17, 17);
  const InverseProblem prob = problem(g, 1e-3);
  const FunctionalParams params{1e-2, 1e-3, Exponent(8)};
  const GridFunction s = start(prob);
  const SolveReport r = minimize_Ep(prob, params, s);
  std::vector<GridFunction> basis;
  for (double c : {0.3, 0.5, 0.7})
    basis.push_back(GridFunction::sample(g, [c](double x, double y) {
      const double d = std::hypot(x - c, y - 0.5) / 0.2;
      return d < 1 ? (1 - d * d) * (1 - d * d) : 0.0;
    }));
  const ConcentrationPair m = concentration_measures(r.u, prob, params);
  const ConcentrationPair m0 = concentration_measures(s, prob, params);
  const double at_min = el_residual(r.u, m.nu, m.mu, prob, params, basis);
  const double at_start = el_residual(s, m0.nu, m0.mu, prob, params, basis);
  EXPECT_LT(at_min, 10 * r.tol);
  EXPECT_GT(at_start, 10 * at_min);
  std::vector<GridFunction> bad{GridFunction::constant(g, 1.0)};
  EXPECT_THROW(el_residual(r.u, m.nu, m.mu, prob, params, bad), std::invalid_argument);
}
