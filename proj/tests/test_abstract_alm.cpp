#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dfml/abstract_alm.hpp"

using namespace dfml;
using namespace dfml::abstract;

TEST(Newton, MinimizesStrictlyConvexQuartic) {
  const ConvexFunctional F = quartic_functional(Matrix::Identity(3, 3), Vector::Ones(3), Vector::LinSpaced(3, 1, 3));
  const Vector x = newton_minimize(F.value, F.gradient, F.hessian, Vector::Zero(3));
  EXPECT_LE(F.gradient(x).norm(), 1e-12);
  // each coordinate solves x + x^3 = l
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(x[i] + std::pow(x[i], 3), i + 1.0, 1e-12);
}

TEST(KKT, QuadraticFixedPoint) {
  const GeneralProblem p = quadratic_instance();
  const KKTSolution s = solve_kkt(p);
  EXPECT_NEAR(s.u[0], 0.5, 1e-14);
  EXPECT_NEAR(s.u[1], 0.5, 1e-14);
  EXPECT_NEAR(s.p[0], -0.5, 1e-14);
}

TEST(KKT, ResidualOnRandomInstance) {
  const GeneralProblem p = weighted_quartic_instance(8, 3, 4);
  const KKTSolution s = solve_kkt(p);
  EXPECT_LE((p.B * s.u - p.g).norm(), 1e-12);
  EXPECT_LE((p.F.gradient(s.u) + p.B.transpose() * s.p).norm(), 1e-12);
}

TEST(ALMGeneral, QuadraticContractionFactor) {
  // dual Hessian B B^T = 2, so each step contracts p^n - p by eps / (2 + eps)
  const GeneralProblem p = quadratic_instance();
  for (double eps : {10.0, 1.0, 0.1}) {
    const ALMTrajectory tr = alm_general(p, eps, Vector::Zero(1), 6);
    for (std::size_t n = 0; n + 1 < tr.p.size(); ++n) {
      const double e0 = tr.p[n][0] + 0.5;
      const double e1 = tr.p[n + 1][0] + 0.5;
      EXPECT_NEAR(e1, eps / (2.0 + eps) * e0, 1e-13);
    }
    EXPECT_NEAR(tr.u.back()[0], tr.u.back()[1], 1e-14);
  }
}

TEST(ALMGeneral, ConvergesToKKTPoint) {
  const GeneralProblem p = quartic_instance(6, 2, 11);
  const KKTSolution s = solve_kkt(p);
  const ALMTrajectory tr = alm_general(p, 0.1, Vector::Zero(2), 30);
  EXPECT_LE((tr.p.back() - s.p).norm(), 1e-10);
  EXPECT_LE((tr.u.back() - s.u).norm(), 1e-10);
  EXPECT_THROW(alm_general(p, 0.0, Vector::Zero(2), 1), std::invalid_argument);
}

TEST(PPA, QuadraticClosedForm) {
  // F* (w) = |w|^2 / 2, so each step solves (B B^T + eps I) q = eps q_n - g
  const GeneralProblem p = quadratic_instance();
  const double eps = 0.3;
  const auto qs = ppa_dual(p, eps, Vector::Constant(1, 2.0), 5);
  const Matrix A = p.B * p.B.transpose() + eps * Matrix::Identity(1, 1);
  for (std::size_t n = 0; n + 1 < qs.size(); ++n) {
    const Vector expected = A.ldlt().solve(eps * qs[n] - p.g);
    EXPECT_NEAR(qs[n + 1][0], expected[0], 1e-12);
  }
}

TEST(PPA, MatchesALMMultipliers) {
  for (unsigned seed : {1u, 2u}) {
    const GeneralProblem p = weighted_quartic_instance(7, 3, seed);
    const double eps = 0.5;
    const Vector p0 = Vector::Constant(3, 0.2);
    const ALMTrajectory tr = alm_general(p, eps, p0, 6);
    const auto qs = ppa_dual(p, eps, p0, 6);
    for (std::size_t n = 0; n < qs.size(); ++n) EXPECT_LE((qs[n] - tr.p[n]).norm(), 1e-9) << "seed " << seed;
  }
}

TEST(Conjugate, FenchelYoung) {
  const GeneralProblem p = weighted_quartic_instance(5, 2, 3);
  std::mt19937 rng(5);
  std::normal_distribution<double> nd;
  Vector w(5);
  for (int i = 0; i < 5; ++i) w[i] = nd(rng);
  const ConjugateValue c = conjugate(p.F, w, Vector::Zero(5));
  EXPECT_NEAR(c.value + p.F.value(c.argsup), w.dot(c.argsup), 1e-12);
  for (int t = 0; t < 50; ++t) {
    Vector v(5);
    for (int i = 0; i < 5; ++i) v[i] = nd(rng);
    EXPECT_GE(c.value, w.dot(v) - p.F.value(v) - 1e-12);
  }
}

TEST(DualHessian, QuadraticIsBBt) {
  const GeneralProblem p = quadratic_instance();
  EXPECT_NEAR(dual_hessian(p, Vector::Constant(1, 0.7))(0, 0), 2.0, 1e-13);
  const ALMTrajectory tr = alm_general(p, 1.0, Vector::Zero(1), 3);
  EXPECT_NEAR(estimate_mu(p, tr.p, solve_kkt(p).p), 2.0, 1e-12);
}

TEST(RateBounds, ExactStartGivesZeroSides) {
  const GeneralProblem p = quartic_instance(5, 2, 8);
  const KKTSolution s = solve_kkt(p);
  const ALMTrajectory tr = alm_general(p, 1.0, s.p, 3);
  const BoundReport rep = verify_alm_bounds(p, 1.0, tr, s, 1.0);
  ASSERT_EQ(rep.steps.size(), 3u);
  for (const auto& b : rep.steps) {
    EXPECT_NEAR(b.contraction_lhs, 0.0, 1e-10);
    EXPECT_NEAR(b.bregman_lhs, 0.0, 1e-18);
    EXPECT_NEAR(b.contraction_rhs, 0.0, 1e-10);
  }
  EXPECT_TRUE(rep.all_hold());
}

TEST(RateBounds, HoldOnRandomInstancesBothRegimes) {
  for (unsigned seed : {3u, 4u, 5u}) {
    const GeneralProblem p = weighted_quartic_instance(8, 3, seed);
    const KKTSolution s = solve_kkt(p);
    for (double eps : {10.0, 1.0, 0.05}) {
      const ALMTrajectory tr = alm_general(p, eps, Vector::Zero(3), 8);
      const double mu = estimate_mu(p, tr.p, s.p);
      ASSERT_GT(mu, 0.0);
      const BoundReport rep = verify_alm_bounds(p, eps, tr, s, mu);
      EXPECT_TRUE(rep.all_hold()) << "seed " << seed << " eps " << eps << " margin " << rep.min_margin();
    }
  }
}

TEST(RateBounds, SignErrorBreaksContraction) {
  const GeneralProblem p = quadratic_instance();
  const KKTSolution s = solve_kkt(p);
  const ALMTrajectory tr = alm_general(p, 1.0, Vector::Zero(1), 4, -1.0);
  EXPECT_FALSE(verify_alm_bounds(p, 1.0, tr, s, 2.0).all_hold());
}

TEST(GeneralProblem, Validation) {
  GeneralProblem p = quadratic_instance();
  EXPECT_NO_THROW(p.validate());
  p.B = Matrix::Zero(1, 2);
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = quadratic_instance();
  p.g = Vector::Zero(2);
  EXPECT_THROW(p.validate(), std::invalid_argument);
  EXPECT_THROW(quartic_instance(21, 2, 1).validate(), std::invalid_argument);
}
