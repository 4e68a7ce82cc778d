#pragma once

// Vertex-patch multilevel space decomposition V = sum_k sum_i V_k^i and the
// local problems min_{w in V_k^i} F^eps(u + w).
//
// Coarse basis functions are evaluated directly at the finest-level
// quadrature points, so a local energy is the exact restriction of the global
// finest-level F^eps to the fine cells covered by the patch.

#include <array>
#include <cmath>
#include <vector>

#include "dfml/energy.hpp"

namespace dfml {

inline constexpr int max_patch_dofs = 12;

using LocalVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, max_patch_dofs, 1>;
using LocalMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, max_patch_dofs, max_patch_dofs>;

/// One coarse cell of a patch together with the patch dofs that live on its edges.
struct PatchCell {
  int coarse_cell = 0;
  Point lower;
  /// (local dof index, side of this cell the edge sits on)
  std::vector<std::pair<int, CellSide>> dofs;
  /// Fine cell index range [i0, i1) x [j0, j1) on the finest level.
  int i0 = 0, i1 = 0, j0 = 0, j1 = 0;
};

struct PatchSpace {
  int level = 0;
  Patch patch;
  /// Level-k edge indices spanning V_k^i.
  std::vector<int> dofs;
  std::array<PatchCell, 4> cells;
  double H = 0.0;

  int size() const { return static_cast<int>(dofs.size()); }
};

/// The hierarchy together with all patch subspaces and inter-level embeddings.
class MultilevelSpace {
 public:
  explicit MultilevelSpace(std::shared_ptr<const MeshHierarchy> hierarchy) : hierarchy_(std::move(hierarchy)) {
    const MeshHierarchy& mh = *hierarchy_;
    const int J = mh.num_levels();
    const int nf = mh.finest().nx();
    patches_.resize(static_cast<std::size_t>(J));
    for (int k = 1; k <= J; ++k) {
      const LevelMesh& mesh = mh.level(k);
      const int s = nf / mesh.nx();
      for (const Patch& p : mesh.patches()) {
        PatchSpace ps;
        ps.level = k;
        ps.patch = p;
        ps.dofs = patch_subspace(mesh, p);
        ps.H = mesh.h();
        for (int a = 0; a < 4; ++a) {
          PatchCell& pc = ps.cells[a];
          const Cell& cell = mesh.cell(p.cells[a]);
          pc.coarse_cell = p.cells[a];
          pc.lower = cell.lower;
          for (int side = 0; side < 4; ++side)
            for (int l = 0; l < ps.size(); ++l)
              if (ps.dofs[l] == cell.edges[side]) pc.dofs.emplace_back(l, static_cast<CellSide>(side));
          pc.i0 = cell.i * s;
          pc.i1 = (cell.i + 1) * s;
          pc.j0 = cell.j * s;
          pc.j1 = (cell.j + 1) * s;
        }
        patches_[k - 1].push_back(std::move(ps));
      }
    }
    for (int k = 1; k < J; ++k) {
      prolong_.push_back(prolongation(mh, k));
      restrict_.push_back(SparseMatrix(prolong_.back().transpose()));
    }
  }

  const MeshHierarchy& hierarchy() const { return *hierarchy_; }
  std::shared_ptr<const MeshHierarchy> hierarchy_ptr() const { return hierarchy_; }
  int num_levels() const { return hierarchy_->num_levels(); }
  const std::vector<PatchSpace>& patches(int k) const { return patches_.at(static_cast<std::size_t>(k - 1)); }
  int num_patches() const {
    int n = 0;
    for (const auto& l : patches_) n += static_cast<int>(l.size());
    return n;
  }
  const SparseMatrix& prolongation_matrix(int k) const { return prolong_.at(static_cast<std::size_t>(k - 1)); }

  /// sum_k P_{J<-k} w_k for per-level vectors w_1..w_J.
  Vector prolongate_sum(const std::vector<Vector>& per_level) const {
    Vector acc = per_level[0];
    for (int k = 1; k < num_levels(); ++k) acc = prolong_[k - 1] * acc + per_level[k];
    return acc;
  }

  /// r_k = P_{J<-k}^T r for every level.
  std::vector<Vector> restrict_all(const Vector& fine) const {
    const int J = num_levels();
    std::vector<Vector> out(static_cast<std::size_t>(J));
    out[J - 1] = fine;
    for (int k = J - 1; k >= 1; --k) out[k - 1] = restrict_[k - 1] * out[k];
    return out;
  }

  /// Level-k patch dofs embedded as finest-level vectors (columns).
  Matrix prolonged_basis(const PatchSpace& ps) const {
    const int J = num_levels();
    Matrix B = Matrix::Zero(hierarchy_->level(ps.level).num_edges(), ps.size());
    for (int l = 0; l < ps.size(); ++l) B(ps.dofs[l], l) = 1.0;
    for (int k = ps.level; k < J; ++k) B = prolong_[k - 1] * B;
    return B;
  }

 private:
  std::shared_ptr<const MeshHierarchy> hierarchy_;
  std::vector<std::vector<PatchSpace>> patches_;
  std::vector<SparseMatrix> prolong_;
  std::vector<SparseMatrix> restrict_;
};

/// F^eps(u + P w) restricted to the fine cells of one patch, with gradient and
/// Hessian in the local coordinates w.
class LocalEnergy {
 public:
  LocalEnergy(const EnergyModel& model, const PatchSpace& ps, const QuadValues& u)
      : model_(model), ps_(ps), u_(u) {}

  int size() const { return ps_.size(); }

  double value(const LocalVector& w) const { return eval(w, nullptr, nullptr); }

  double value_gradient_hessian(const LocalVector& w, LocalVector& g, LocalMatrix& H) const {
    return eval(w, &g, &H);
  }

 private:
  double eval(const LocalVector& w, LocalVector* grad, LocalMatrix* hess) const {
    const LevelMesh& fine = model_.mesh();
    const QuadratureRule& r = model_.rule();
    const int nq = static_cast<int>(r.size());
    const int nf = fine.nx();
    const double h = fine.h();
    const double area = fine.cell_area();
    const double H = ps_.H;
    const double ratio = h / H;
    const double eps = model_.epsilon();
    const double a = model_.darcy_coefficient();
    const double b = model_.forchheimer_coefficient();
    const Vector& g_h = model_.g_h();
    const Vector& q_h = model_.multiplier();
    const std::vector<Vec2>& fq = model_.f_at_quadrature();
    const int m = size();
    if (grad) grad->setZero(m);
    if (hess) hess->setZero(m, m);

    double total = 0.0;
    for (const PatchCell& pc : ps_.cells) {
      const int na = static_cast<int>(pc.dofs.size());
      std::array<int, 4> idx{};
      std::array<int, 4> side{};
      std::array<double, 4> dphi{};
      double dw = 0.0;
      for (int t = 0; t < na; ++t) {
        idx[t] = pc.dofs[t].first;
        side[t] = static_cast<int>(pc.dofs[t].second);
        dphi[t] = (side[t] == 1 || side[t] == 3 ? 1.0 : -1.0) / (H * H);
        dw += w[idx[t]] * dphi[t];
      }
      std::array<double, 4> lg{};
      std::array<std::array<double, 4>, 4> lh{};
      double cell_total = 0.0;
      for (int j = pc.j0; j < pc.j1; ++j) {
        const double Y0 = (j - pc.j0) * ratio;
        for (int i = pc.i0; i < pc.i1; ++i) {
          const int c = j * nf + i;
          const double X0 = (i - pc.i0) * ratio;
          const double div = u_.div[c] + dw;
          const double res = div - g_h[c];
          double e = area * (0.5 * res * res - eps * q_h[c] * div);
          const double dcoef = area * (res - eps * q_h[c]);
          if (grad)
            for (int t = 0; t < na; ++t) lg[t] += dcoef * dphi[t];
          if (hess)
            for (int s = 0; s < na; ++s)
              for (int t = 0; t < na; ++t) lh[s][t] += area * dphi[s] * dphi[t];
          double eq = 0.0;
          for (int q = 0; q < nq; ++q) {
            const double X = X0 + r.xi[q] * ratio;
            const double Y = Y0 + r.eta[q] * ratio;
            std::array<double, 4> phi{};
            Vec2 v = u_.v[static_cast<std::size_t>(c * nq + q)];
            for (int t = 0; t < na; ++t) {
              switch (side[t]) {
                case 0: phi[t] = (1.0 - X) / H; v.x += w[idx[t]] * phi[t]; break;
                case 1: phi[t] = X / H; v.x += w[idx[t]] * phi[t]; break;
                case 2: phi[t] = (1.0 - Y) / H; v.y += w[idx[t]] * phi[t]; break;
                default: phi[t] = Y / H; v.y += w[idx[t]] * phi[t]; break;
              }
            }
            const Vec2 f = fq[static_cast<std::size_t>(c * nq + q)];
            const double n2 = v.x * v.x + v.y * v.y;
            const double nv = std::sqrt(n2);
            eq += r.weight[q] * (0.5 * a * n2 + b / 3.0 * n2 * nv - (f.x * v.x + f.y * v.y));
            if (grad || hess) {
              const double wq = eps * r.weight[q] * area;
              const double k = a + b * nv;
              if (grad) {
                const double gx = wq * (k * v.x - f.x);
                const double gy = wq * (k * v.y - f.y);
                for (int t = 0; t < na; ++t) lg[t] += (side[t] < 2 ? gx : gy) * phi[t];
              }
              if (hess) {
                const double inv = b / std::max(nv, EnergyModel::hessian_delta);
                const double hxx = wq * (k + inv * v.x * v.x);
                const double hyy = wq * (k + inv * v.y * v.y);
                const double hxy = wq * inv * v.x * v.y;
                for (int s = 0; s < na; ++s)
                  for (int t = 0; t < na; ++t) {
                    const bool sx = side[s] < 2;
                    const bool tx = side[t] < 2;
                    const double coef = sx && tx ? hxx : (!sx && !tx ? hyy : hxy);
                    lh[s][t] += coef * phi[s] * phi[t];
                  }
              }
            }
          }
          e += eps * area * eq;
          cell_total += e;
        }
      }
      total += cell_total;
      if (grad)
        for (int t = 0; t < na; ++t) (*grad)[idx[t]] += lg[t];
      if (hess)
        for (int s = 0; s < na; ++s)
          for (int t = 0; t < na; ++t) (*hess)(idx[s], idx[t]) += lh[s][t];
    }
    return total;
  }

  const EnergyModel& model_;
  const PatchSpace& ps_;
  const QuadValues& u_;
};

struct LocalSolveOptions {
  double grad_tol = 1e-10;
  int max_iterations = 50;
  double armijo = 1e-4;
  int max_halvings = 60;
};

struct LocalSolveResult {
  LocalVector w;
  /// F^eps(u) - F^eps(u + P w) >= 0
  double decrease = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Damped Newton with Armijo backtracking on one patch problem.
inline LocalSolveResult local_patch_minimize(const LocalEnergy& energy, const LocalSolveOptions& opt = {}) {
  const int m = energy.size();
  LocalSolveResult res;
  res.w = LocalVector::Zero(m);
  LocalVector g(m);
  LocalMatrix H(m, m);
  const double e0 = energy.value_gradient_hessian(res.w, g, H);
  double e = e0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    if (g.norm() <= opt.grad_tol) {
      res.converged = true;
      break;
    }
    Eigen::LLT<LocalMatrix> llt(H);
    const LocalVector d = -llt.solve(g);
    const double slope = g.dot(d);
    if (!(slope < 0.0)) break;
    // Below this the energy comparison is at rounding level; take the Newton step.
    const bool rounding = -slope <= 1e-13 * (1.0 + std::abs(e));
    double t = 1.0;
    bool accepted = false;
    LocalVector trial = res.w + d;
    double e_trial = energy.value(trial);
    for (int k = 0; k < opt.max_halvings; ++k) {
      if (e_trial <= e + opt.armijo * t * slope || (rounding && t == 1.0)) {
        accepted = true;
        break;
      }
      t *= 0.5;
      trial = res.w + t * d;
      e_trial = energy.value(trial);
    }
    ++res.iterations;
    if (!accepted) break;
    res.w = trial;
    e = energy.value_gradient_hessian(res.w, g, H);
  }
  if (!res.converged && g.norm() <= opt.grad_tol) res.converged = true;
  if (e > e0) {
    // Rounding-level increase; the zero correction is never worse.
    res.w.setZero();
    e = e0;
  }
  res.decrease = e0 - e;
  return res;
}

/// Additive correction of one iteration: every w_{k,i} computed from the same u.
struct PatchCorrections {
  /// sum_{k,i} P w_{k,i} on the finest level
  Vector direction;
  /// sum_{k,i} [F^eps(u) - F^eps(u + w_{k,i})], summed in (k,i) order
  double local_decrease_sum = 0.0;
  int unconverged_local_solves = 0;
  int local_newton_iterations = 0;
};

inline PatchCorrections compute_corrections(const EnergyModel& model, const MultilevelSpace& space,
                                            const Vector& u, const LocalSolveOptions& opt = {},
                                            unsigned workers = 0) {
  const QuadValues uq = model.evaluate(u);
  const int J = space.num_levels();
  std::vector<Vector> per_level(static_cast<std::size_t>(J));
  std::vector<double> decreases;
  PatchCorrections out;
  for (int k = 1; k <= J; ++k) {
    const auto& ps = space.patches(k);
    std::vector<LocalSolveResult> results(ps.size());
    parallel_for(
        ps.size(), [&](std::size_t i) { results[i] = local_patch_minimize(LocalEnergy(model, ps[i], uq), opt); },
        workers);
    Vector wk = Vector::Zero(space.hierarchy().level(k).num_edges());
    for (std::size_t i = 0; i < ps.size(); ++i) {
      for (int l = 0; l < ps[i].size(); ++l) wk[ps[i].dofs[l]] += results[i].w[l];
      decreases.push_back(results[i].decrease);
      out.unconverged_local_solves += results[i].converged ? 0 : 1;
      out.local_newton_iterations += results[i].iterations;
    }
    per_level[k - 1] = std::move(wk);
  }
  out.direction = space.prolongate_sum(per_level);
  out.local_decrease_sum = pairwise_sum(decreases);
  return out;
}

}  // namespace dfml
