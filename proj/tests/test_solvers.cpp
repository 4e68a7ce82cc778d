#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include <Eigen/IterativeLinearSolvers>

#include "dfml/alm.hpp"
#include "dfml/psc.hpp"

using namespace dfml;

namespace {

std::shared_ptr<const MeshHierarchy> hierarchy(int levels) { return std::make_shared<const MeshHierarchy>(2, levels); }

EnergyModel model_for(BenchmarkExample ex, double beta, double eps, const std::shared_ptr<const MeshHierarchy>& mh) {
  return EnergyModel(mh, benchmark_problem(ex, beta).data, eps);
}

bool is_power_of_two(double t) {
  const double l = std::log2(t);
  return std::abs(l - std::round(l)) < 1e-12;
}

}  // namespace

TEST(Reference, QuadraticMinimizerAgreesWithDirectSolve) {
  const auto mh = hierarchy(4);
  const EnergyModel m = model_for(BenchmarkExample::ex2, 0.0, 0.01, mh);
  const Vector direct = direct_quadratic_solve(m);
  const MinimizerResult r = reference_min_F_eps(m);
  EXPECT_LE((r.u - direct).norm(), 1e-9 * direct.norm());
  EXPECT_LE(r.grad_norm, 1e-10);
}

TEST(Reference, MinimizerBeatsRandomPerturbations) {
  const auto mh = hierarchy(3);
  const EnergyModel m = model_for(BenchmarkExample::ex1, 30.0, 0.1, mh);
  const MinimizerResult r = reference_min_F_eps(m);
  std::mt19937 rng(1);
  std::normal_distribution<double> n(0.0, 1e-3);
  for (int t = 0; t < 100; ++t) {
    Vector d(m.num_dofs());
    for (int i = 0; i < d.size(); ++i) d[i] = n(rng);
    EXPECT_GE(m.F_eps(r.u + d), r.energy);
  }
}

TEST(Reference, ConstraintResidualShrinksWithEpsilon) {
  const auto mh = hierarchy(3);
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    const EnergyModel m = model_for(BenchmarkExample::ex2, 10.0, eps, mh);
    const double res = m.constraint_residual(reference_min_F_eps(m).u);
    EXPECT_LT(res, prev);
    prev = res;
  }
}

TEST(Reference, MixedSolveSatisfiesConstraint) {
  const auto mh = hierarchy(3);
  const EnergyModel m = model_for(BenchmarkExample::ex2, 20.0, 1.0, mh);
  const MixedSolution s = reference_mixed_solve(m);
  EXPECT_LE(s.residual, 1e-10);
  EXPECT_LE(m.constraint_residual(s.u), 1e-12);
  // stationarity: grad F(u) = B_M^T p with B_M = |cell| div
  const SparseMatrix BM = m.mesh().cell_area() * divergence_matrix(m.mesh());
  const Vector r = m.grad_F(s.u) - SparseMatrix(BM.transpose()) * s.p;
  EXPECT_LE(r.norm(), 1e-10);
}

TEST(Reference, DiscretePressureApproximatesExact) {
  const auto mh = hierarchy(5);
  const auto prob = benchmark_problem(BenchmarkExample::ex1, 10.0);
  const EnergyModel m(mh, prob.data, 1.0);
  const MixedSolution s = reference_mixed_solve(m);
  const Vector p_exact = l2_project_scalar(prob.p_exact, m.mesh());
  EXPECT_LE(pressure_l2(m.mesh(), s.p - p_exact), 5e-3);
  EXPECT_LE(velocity_l2_error(m.mesh(), s.u, prob.u_exact), 5e-2);
}

TEST(ALM, IterationCountForKnownCell) {
  const auto mh = hierarchy(4);
  const EnergyModel m = model_for(BenchmarkExample::ex1, 30.0, 1.0, mh);
  const MixedSolution ref = reference_mixed_solve(m);
  const ALMResult r = alm_solve(m, ALMConfig{}, ref);
  ASSERT_TRUE(r.report.converged());
  EXPECT_EQ(r.report.iterations, 27);
  EXPECT_LT(r.relative_error.back(), 1e-3);
  EXPECT_GE(r.relative_error[r.relative_error.size() - 2], 1e-3);
}

TEST(ALM, MultiplierRecursionHolds) {
  const auto mh = hierarchy(3);
  const EnergyModel m = model_for(BenchmarkExample::ex2, 10.0, 0.1, mh);
  const MixedSolution ref = reference_mixed_solve(m);
  ALMConfig cfg;
  cfg.keep_trajectory = true;
  const ALMResult r = alm_solve(m, cfg, ref);
  ASSERT_TRUE(r.report.converged());
  ASSERT_EQ(r.p_history.size(), r.u_history.size() + 1);
  for (std::size_t n = 0; n < r.u_history.size(); ++n) {
    const Vector expected = r.p_history[n] - (divergence(m.mesh(), r.u_history[n]) - m.g_h()) / 0.1;
    EXPECT_LE((r.p_history[n + 1] - expected).norm(), 1e-10 * (1.0 + expected.norm()));
  }
}

TEST(ALM, MultilevelInnerSolverMatchesNewtonInner) {
  const auto mh = hierarchy(3);
  const MultilevelSpace space(mh);
  const EnergyModel m = model_for(BenchmarkExample::ex1, 10.0, 0.1, mh);
  const MixedSolution ref = reference_mixed_solve(m);
  ALMConfig a;
  ALMConfig b;
  b.inner = InnerSolver::multilevel;
  const ALMResult ra = alm_solve(m, a, ref);
  const ALMResult rb = alm_solve(m, b, ref, &space);
  ASSERT_TRUE(ra.report.converged());
  ASSERT_TRUE(rb.report.converged());
  EXPECT_NEAR(ra.report.iterations, rb.report.iterations, 1);
  EXPECT_THROW(alm_solve(m, b, ref), std::invalid_argument);
}

TEST(PSC, OneStepDecreasesEnergy) {
  const auto mh = hierarchy(5);
  const MultilevelSpace space(mh);
  const EnergyModel m = model_for(BenchmarkExample::ex1, 30.0, 1.0, mh);
  const Vector u0 = Vector::Zero(m.num_dofs());
  const Vector u1 = psc_step(m, space, u0, 0.125);
  EXPECT_LT(m.F_eps(u1), m.F_eps(u0));
  EXPECT_THROW(psc_step(m, space, u0, 0.0), std::invalid_argument);
}

TEST(PSC, LargeFixedStepIsFlaggedAsDiverged) {
  const auto mh = hierarchy(5);
  const MultilevelSpace space(mh);
  const EnergyModel m = model_for(BenchmarkExample::ex1, 30.0, 1.0, mh);
  PSCConfig cfg;
  cfg.tau = 1.0;
  cfg.max_iterations = 50;
  const PSCResult r = psc_solve(m, space, cfg, reference_min_F_eps(m).energy);
  EXPECT_EQ(r.report.status, SolveStatus::diverged);
}

TEST(PSC, BacktrackingIsMonotoneWithDyadicSteps) {
  const auto mh = hierarchy(4);
  const MultilevelSpace space(mh);
  const EnergyModel m = model_for(BenchmarkExample::ex2, 20.0, 0.1, mh);
  const double f_star = reference_min_F_eps(m).energy;
  const PSCResult r = psc_backtracking_solve(m, space, PSCConfig{}, f_star);
  ASSERT_TRUE(r.report.converged());
  for (std::size_t n = 1; n < r.report.energy.size(); ++n) EXPECT_LE(r.report.energy[n], r.report.energy[n - 1]);
  for (double t : r.report.tau) EXPECT_TRUE(is_power_of_two(t)) << t;
  EXPECT_EQ(min_step(r.report), *std::min_element(r.report.tau.begin(), r.report.tau.end()));
  EXPECT_LT(r.report.relative_energy_error.back(), 1e-3);
}

TEST(PSC, FixedIterationCountRunsToTheEnd) {
  const auto mh = hierarchy(3);
  const MultilevelSpace space(mh);
  const EnergyModel m = model_for(BenchmarkExample::ex1, 10.0, 1.0, mh);
  PSCConfig cfg;
  cfg.tau = 0.125;
  cfg.max_iterations = 7;
  cfg.fixed_iteration_count = true;
  const PSCResult r = psc_solve(m, space, cfg);
  EXPECT_EQ(r.report.iterations, 7);
  EXPECT_TRUE(r.report.converged());
}

TEST(PCG, AgreesWithDirectSolve) {
  const auto mh = hierarchy(5);
  const MultilevelSpace space(mh);
  const EnergyModel m = model_for(BenchmarkExample::ex1, 0.0, 0.01, mh);
  const Vector direct = direct_quadratic_solve(m);
  const PSCResult r = ml_pcg_solve(m, space);
  ASSERT_TRUE(r.report.converged());
  EXPECT_LE((r.u - direct).norm(), 1e-8 * direct.norm());
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::IdentityPreconditioner> cg;
  cg.setTolerance(1e-10);
  cg.setMaxIterations(100000);
  const SparseMatrix A = m.hess_F_eps(Vector::Zero(m.num_dofs()));
  cg.compute(A);
  const Vector plain = cg.solve(-m.grad_F_eps(Vector::Zero(m.num_dofs())));
  EXPECT_LE((plain - direct).norm(), 1e-7 * direct.norm());
  EXPECT_LT(3 * r.report.iterations, cg.iterations());
  for (std::size_t n = 1; n < r.report.energy.size(); ++n)
    EXPECT_LE(r.report.energy[n], r.report.energy[n - 1] + 1e-14 * std::abs(r.report.energy[n - 1]));
}

TEST(PCG, QuadraticFormEnergyShiftsOnlyTheRecordedEnergy) {
  const auto mh = hierarchy(4);
  const MultilevelSpace space(mh);
  const EnergyModel m = model_for(BenchmarkExample::ex2, 0.0, 0.1, mh);
  const double f_star = reference_min_F_eps(m).energy;
  PCGConfig cfg;
  cfg.quadratic_form_energy = true;
  const PSCResult r = ml_pcg_solve(m, space, cfg, f_star);
  const Vector zero = Vector::Zero(m.num_dofs());
  EXPECT_EQ(r.report.energy.front(), 0.0);
  const double shift = m.F_eps(zero);
  EXPECT_NEAR(r.report.energy.back(), m.F_eps(r.u) - shift, 1e-12 * std::abs(shift));
  EXPECT_NEAR(r.report.relative_energy_error.back(), 0.0, 1e-9);
}

TEST(PCG, RejectsNonlinearProblems) {
  const auto mh = hierarchy(2);
  const MultilevelSpace space(mh);
  const EnergyModel m = model_for(BenchmarkExample::ex1, 1.0, 1.0, mh);
  EXPECT_THROW(ml_pcg_solve(m, space), std::invalid_argument);
  EXPECT_THROW(direct_quadratic_solve(m), std::invalid_argument);
}
