#include <gtest/gtest.h>

#include <memory>
#include <random>

#include "dfml/multilevel.hpp"

using namespace dfml;

namespace {

Vector random_vector(int n, unsigned seed, double scale = 1.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

struct Fixture {
  std::shared_ptr<const MeshHierarchy> mh = std::make_shared<const MeshHierarchy>(2, 3);
  MultilevelSpace space{mh};
  EnergyModel model{mh, benchmark_problem(BenchmarkExample::ex2, 30.0).data, 0.1};
};

LocalVector random_local(int m, unsigned seed) {
  const Vector v = random_vector(m, seed, 0.05);
  LocalVector w(m);
  for (int i = 0; i < m; ++i) w[i] = v[i];
  return w;
}

}  // namespace

TEST(MultilevelSpace, PatchCounts) {
  Fixture f;
  EXPECT_EQ(f.space.num_levels(), 3);
  EXPECT_EQ(f.space.patches(1).size(), 1u);
  EXPECT_EQ(f.space.patches(2).size(), 9u);
  EXPECT_EQ(f.space.patches(3).size(), 49u);
  EXPECT_EQ(f.space.num_patches(), 59);
  for (int k = 1; k <= 3; ++k)
    for (const auto& ps : f.space.patches(k)) {
      EXPECT_GE(ps.size(), 4);
      EXPECT_LE(ps.size(), max_patch_dofs);
    }
}

TEST(MultilevelSpace, ProlongedBasisMatchesCompositeEmbedding) {
  Fixture f;
  const PatchSpace& ps = f.space.patches(2)[4];
  const Matrix B = f.space.prolonged_basis(ps);
  const SparseMatrix P = prolongation_to_finest(*f.mh, 2);
  for (int l = 0; l < ps.size(); ++l) {
    Vector e = Vector::Zero(f.mh->level(2).num_edges());
    e[ps.dofs[l]] = 1.0;
    EXPECT_LE((B.col(l) - P * e).norm(), 1e-14);
  }
}

TEST(MultilevelSpace, RestrictionIsTransposeOfProlongation) {
  Fixture f;
  const Vector r = random_vector(f.mh->finest().num_edges(), 2);
  const auto rk = f.space.restrict_all(r);
  for (int k = 1; k <= 3; ++k) {
    const Vector expected = SparseMatrix(prolongation_to_finest(*f.mh, k).transpose()) * r;
    EXPECT_LE((rk[k - 1] - expected).norm(), 1e-12);
  }
}

TEST(LocalEnergy, DifferenceMatchesGlobalEnergy) {
  Fixture f;
  const EnergyModel m = f.model.with_multiplier(random_vector(f.mh->finest().num_cells(), 3));
  const Vector u = random_vector(m.num_dofs(), 4, 0.2);
  const QuadValues uq = m.evaluate(u);
  for (int k = 1; k <= 3; ++k)
    for (std::size_t i = 0; i < f.space.patches(k).size(); i += 3) {
      const PatchSpace& ps = f.space.patches(k)[i];
      const LocalEnergy le(m, ps, uq);
      const LocalVector w = random_local(ps.size(), 100 + static_cast<unsigned>(i));
      const Vector Pw = f.space.prolonged_basis(ps) * Vector(w);
      const double global = m.F_eps(u + Pw) - m.F_eps(u);
      const double local = le.value(w) - le.value(LocalVector::Zero(ps.size()));
      EXPECT_NEAR(local, global, 1e-12 * (1.0 + std::abs(global))) << "level " << k << " patch " << i;
    }
}

TEST(LocalEnergy, GradientAndHessianMatchGlobal) {
  Fixture f;
  const Vector u = random_vector(f.model.num_dofs(), 5, 0.2);
  const QuadValues uq = f.model.evaluate(u);
  const PatchSpace& ps = f.space.patches(3)[10];
  const LocalEnergy le(f.model, ps, uq);
  const LocalVector w = random_local(ps.size(), 6);
  LocalVector g(ps.size());
  LocalMatrix H(ps.size(), ps.size());
  le.value_gradient_hessian(w, g, H);
  const Matrix B = f.space.prolonged_basis(ps);
  const Vector v = u + B * Vector(w);
  const Vector g_ref = B.transpose() * f.model.grad_F_eps(v);
  const Matrix H_ref = B.transpose() * Matrix(f.model.hess_F_eps(v)) * B;
  EXPECT_LE((Vector(g) - g_ref).norm(), 1e-12 * (1.0 + g_ref.norm()));
  EXPECT_LE((Matrix(H) - H_ref).norm(), 1e-10 * H_ref.norm());
}

TEST(LocalSolve, ReachesLocalStationarity) {
  Fixture f;
  const Vector u = random_vector(f.model.num_dofs(), 7, 0.2);
  const QuadValues uq = f.model.evaluate(u);
  const PatchSpace& ps = f.space.patches(2)[0];
  const LocalEnergy le(f.model, ps, uq);
  const LocalSolveResult r = local_patch_minimize(le);
  ASSERT_TRUE(r.converged);
  const Matrix B = f.space.prolonged_basis(ps);
  const Vector v = u + B * Vector(r.w);
  EXPECT_LE((B.transpose() * f.model.grad_F_eps(v)).norm(), 1e-9);
  EXPECT_NEAR(r.decrease, f.model.F_eps(u) - f.model.F_eps(v), 1e-12);
  EXPECT_GT(r.decrease, 0.0);
}

TEST(Corrections, DeterministicAcrossWorkerCounts) {
  Fixture f;
  const Vector u = random_vector(f.model.num_dofs(), 8, 0.2);
  const PatchCorrections a = compute_corrections(f.model, f.space, u, {}, 1);
  const PatchCorrections b = compute_corrections(f.model, f.space, u, {}, 4);
  EXPECT_EQ(a.local_decrease_sum, b.local_decrease_sum);
  EXPECT_EQ((a.direction - b.direction).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(a.unconverged_local_solves, 0);
}

TEST(Corrections, DirectionIsSumOfProlongedLocalSolutions) {
  Fixture f;
  const Vector u = random_vector(f.model.num_dofs(), 9, 0.2);
  const QuadValues uq = f.model.evaluate(u);
  Vector expected = Vector::Zero(f.model.num_dofs());
  double dec = 0.0;
  for (int k = 1; k <= 3; ++k)
    for (const auto& ps : f.space.patches(k)) {
      const LocalSolveResult r = local_patch_minimize(LocalEnergy(f.model, ps, uq));
      expected += f.space.prolonged_basis(ps) * Vector(r.w);
      dec += r.decrease;
    }
  const PatchCorrections c = compute_corrections(f.model, f.space, u);
  EXPECT_LE((c.direction - expected).norm(), 1e-12 * (1.0 + expected.norm()));
  EXPECT_NEAR(c.local_decrease_sum, dec, 1e-12 * (1.0 + dec));
}
