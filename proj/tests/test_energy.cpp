#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "dfml/energy.hpp"

using namespace dfml;

namespace {

std::shared_ptr<const MeshHierarchy> hierarchy(int levels) { return std::make_shared<const MeshHierarchy>(2, levels); }

Vector random_vector(int n, unsigned seed, double scale = 1.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

EnergyModel benchmark_model(BenchmarkExample ex, double beta, double eps, int levels) {
  return EnergyModel(hierarchy(levels), benchmark_problem(ex, beta).data, eps);
}

}  // namespace

TEST(EnergyModel, UniformFieldClosedForm) {
  ProblemData d;
  d.mu = 2.0;
  d.rho = 0.5;
  d.K = 4.0;
  d.beta = 3.0;
  d.f = [](double, double) { return Vec2{1.0, -2.0}; };
  const EnergyModel m(hierarchy(3), d, 0.1);
  const double a = 0.6, b = -0.8;  // |v| = 1
  const Vector v = interpolate_velocity([&](double, double) { return Vec2{a, b}; }, m.mesh());
  const double expected_F = (2.0 / (2 * 0.5 * 4.0)) * 1.0 + (3.0 / (3 * 0.5)) * 1.0 - (a - 2.0 * b);
  EXPECT_NEAR(m.F(v), expected_F, 1e-13);
  EXPECT_NEAR(m.F0(v), 0.0, 1e-20);
  EXPECT_NEAR(m.F_eps(v), 0.1 * expected_F, 1e-13);
}

TEST(EnergyModel, SplitIdentityMatchesOnePassAssembly) {
  const EnergyModel base = benchmark_model(BenchmarkExample::ex2, 20.0, 0.01, 3);
  const EnergyModel m = base.with_multiplier(random_vector(base.mesh().num_cells(), 4));
  const Vector v = random_vector(m.num_dofs(), 5, 0.2);
  EXPECT_NEAR(m.F_eps(v), m.F0(v) + m.epsilon() * m.F1(v), 1e-12);
}

TEST(EnergyModel, GradientMatchesCentralDifferences) {
  const EnergyModel base = benchmark_model(BenchmarkExample::ex1, 30.0, 0.1, 3);
  const EnergyModel m = base.with_multiplier(random_vector(base.mesh().num_cells(), 6));
  const Vector v = random_vector(m.num_dofs(), 7, 0.1);
  const Vector g = m.grad_F_eps(v);
  const double step = 1e-6;
  double worst = 0.0;
  for (int i = 0; i < m.num_dofs(); i += 7) {
    Vector e = Vector::Zero(m.num_dofs());
    e[i] = step;
    const double fd = (m.F_eps(v + e) - m.F_eps(v - e)) / (2 * step);
    worst = std::max(worst, std::abs(fd - g[i]) / (1.0 + std::abs(g[i])));
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(EnergyModel, HessianMatchesGradientDifferences) {
  const EnergyModel m = benchmark_model(BenchmarkExample::ex2, 10.0, 1.0, 3);
  const Vector v = random_vector(m.num_dofs(), 8, 0.1);
  const Vector dir = random_vector(m.num_dofs(), 9);
  const double step = 1e-6;
  const Vector fd = (m.grad_F_eps(v + step * dir) - m.grad_F_eps(v - step * dir)) / (2 * step);
  const Vector hv = m.hess_F_eps(v) * dir;
  EXPECT_LE((fd - hv).norm() / hv.norm(), 1e-6);
}

TEST(EnergyModel, HessianIsSymmetricPositiveDefinite) {
  const EnergyModel m = benchmark_model(BenchmarkExample::ex1, 30.0, 0.01, 2);
  const Matrix H(m.hess_F_eps(random_vector(m.num_dofs(), 10, 0.1)));
  EXPECT_LE((H - H.transpose()).norm(), 1e-12 * H.norm());
  Eigen::SelfAdjointEigenSolver<Matrix> es(H);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
}

TEST(EnergyModel, QuadraticCaseIsExactlyQuadratic) {
  const EnergyModel m = benchmark_model(BenchmarkExample::ex2, 0.0, 0.1, 3);
  const Vector v = random_vector(m.num_dofs(), 12);
  const Vector w = random_vector(m.num_dofs(), 13);
  const double taylor = m.F_eps(v) + m.grad_F_eps(v).dot(w) + 0.5 * w.dot(m.hess_F_eps(v) * w);
  EXPECT_NEAR(m.F_eps(v + w), taylor, 1e-10 * (1.0 + std::abs(taylor)));
}

TEST(EnergyModel, BregmanPiecesAreConsistent) {
  const EnergyModel m = benchmark_model(BenchmarkExample::ex1, 20.0, 0.1, 3)
                            .with_multiplier(random_vector(64, 14));
  const Vector v = random_vector(m.num_dofs(), 15, 0.3);
  const Vector w = random_vector(m.num_dofs(), 16, 0.3);
  const double total = m.F_eps(v + w) - m.F_eps(v) - m.grad_F_eps(v).dot(w);
  EXPECT_NEAR(total, m.d0(w, v) + m.epsilon() * m.d1(w, v), 1e-12);
  EXPECT_GE(m.d0(w, v), 0.0);
  EXPECT_GE(m.d1(w, v), 0.0);
  EXPECT_NEAR(m.d1(w, v), m.bregman_F(w, v), 1e-12);
  EXPECT_GE(m.sym_bregman(v, v + w), 0.0);
}

TEST(EnergyModel, ConstraintResidualOfExactInterpolant) {
  const auto prob = benchmark_problem(BenchmarkExample::ex2, 10.0);
  const EnergyModel m(hierarchy(4), prob.data, 1.0);
  const Vector u = interpolate_velocity(prob.u_exact, m.mesh());
  EXPECT_LE(m.constraint_residual(u), 1e-6);
}

TEST(EnergyModel, RejectsBadArguments) {
  ProblemData d;
  EXPECT_THROW(EnergyModel(hierarchy(2), d, 0.0), std::invalid_argument);
  d.beta = -1.0;
  EXPECT_THROW(EnergyModel(hierarchy(2), d, 1.0), std::invalid_argument);
  const EnergyModel m(hierarchy(2), ProblemData{}, 1.0);
  EXPECT_THROW(m.with_multiplier(Vector::Zero(3)), std::invalid_argument);
  EXPECT_THROW(m.with_epsilon(-1.0), std::invalid_argument);
}

TEST(Problems, ForcingSatisfiesMomentumEquation) {
  // f = (mu/rho K + beta/rho |u|) u + grad p, checked by finite differences of p
  for (auto ex : {BenchmarkExample::ex1, BenchmarkExample::ex2}) {
    const auto prob = benchmark_problem(ex, 7.0, 1.5, 2.0, 0.5);
    const double x = 0.37, y = 0.61, s = 1e-6;
    const Vec2 u = prob.u_exact(x, y);
    const double nu = std::hypot(u.x, u.y);
    const double c = 1.5 / (2.0 * 0.5) + 7.0 / 2.0 * nu;
    const double px = (prob.p_exact(x + s, y) - prob.p_exact(x - s, y)) / (2 * s);
    const double py = (prob.p_exact(x, y + s) - prob.p_exact(x, y - s)) / (2 * s);
    const Vec2 f = prob.data.f(x, y);
    EXPECT_NEAR(f.x, c * u.x + px, 1e-8);
    EXPECT_NEAR(f.y, c * u.y + py, 1e-8);
    const double divu = (prob.u_exact(x + s, y).x - prob.u_exact(x - s, y).x + prob.u_exact(x, y + s).y -
                         prob.u_exact(x, y - s).y) / (2 * s);
    EXPECT_NEAR(prob.data.g(x, y), divu, 1e-8);
  }
}
