#pragma once

// High-accuracy Newton solvers used as oracles: the minimizer of F^eps and the
// full nonlinear mixed (KKT) system.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "dfml/energy.hpp"

namespace dfml {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NewtonOptions {
  double tol = 1e-12;
  int max_iterations = 100;
  double armijo = 1e-4;
};

struct MinimizerResult {
  Vector u;
  double energy = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
};

/// Damped Newton on grad F^eps = 0. Stops when ||grad||_2 <= tol, or when the
/// gradient has stalled at rounding level after a full Newton step.
inline MinimizerResult reference_min_F_eps(const EnergyModel& model, std::optional<Vector> start = std::nullopt,
                                           const NewtonOptions& opt = {}) {
  MinimizerResult res;
  res.u = start ? *start : Vector::Zero(model.num_dofs());
  double e = model.F_eps(res.u);
  Vector g = model.grad_F_eps(res.u);
  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  bool analyzed = false;
  double best = g.norm();
  int stalls = 0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const double gn = g.norm();
    if (gn <= opt.tol) break;
    const SparseMatrix H = model.hess_F_eps(res.u);
    if (!analyzed) {
      ldlt.analyzePattern(H);
      analyzed = true;
    }
    ldlt.factorize(H);
    if (ldlt.info() != Eigen::Success) throw SolverError("reference_min_F_eps: factorization failed");
    const Vector d = -ldlt.solve(g);
    const double slope = g.dot(d);
    const bool rounding = -slope <= 1e-13 * (1.0 + std::abs(e));
    double t = 1.0;
    Vector trial = res.u + d;
    double et = model.F_eps(trial);
    int halvings = 0;
    while (!(et <= e + opt.armijo * t * slope) && !(rounding && t == 1.0)) {
      if (++halvings > 60) throw SolverError("reference_min_F_eps: line search failed");
      t *= 0.5;
      trial = res.u + t * d;
      et = model.F_eps(trial);
    }
    res.u = std::move(trial);
    e = et;
    g = model.grad_F_eps(res.u);
    ++res.iterations;
    const double gn_new = g.norm();
    if (rounding) {
      // Full Newton steps in the quadratic regime: stop once no progress is made.
      if (gn_new >= 0.5 * best) ++stalls;
      if (stalls >= 2) break;
    }
    best = std::min(best, gn_new);
    if (res.iterations == opt.max_iterations && gn_new > opt.tol)
      throw SolverError("reference_min_F_eps: Newton did not converge");
  }
  res.energy = model.F_eps(res.u);
  res.grad_norm = g.norm();
  if (!(res.grad_norm <= std::max(opt.tol, 1e-9)))
    throw SolverError("reference_min_F_eps: gradient norm " + std::to_string(res.grad_norm));
  return res;
}

struct MixedSolution {
  Vector u;
  Vector p;
  /// l2 norm of the full KKT residual
  double residual = 0.0;
  /// ||B u - g_h||_2 on cell values
  double constraint_residual = 0.0;
  int iterations = 0;
};

/// Newton on (grad F(u) - B_M^T p = 0, B_M u = M g_h), B_M v = |cell| div v.
/// Only the F part of the model is used (epsilon and q_h are ignored).
inline MixedSolution reference_mixed_solve(const EnergyModel& model, const NewtonOptions& opt = {}) {
  const LevelMesh& mesh = model.mesh();
  const int nu = mesh.num_edges();
  const int np = mesh.num_cells();
  const SparseMatrix BM = mesh.cell_area() * divergence_matrix(mesh);
  const Vector Mg = mesh.cell_area() * model.g_h();
  MixedSolution sol;
  sol.u = Vector::Zero(nu);
  sol.p = Vector::Zero(np);

  auto residual = [&](const Vector& u, const Vector& p) {
    Vector r(nu + np);
    r.head(nu) = model.grad_F(u) - BM.transpose() * p;
    r.tail(np) = -(BM * u - Mg);
    return r;
  };

  Vector r = residual(sol.u, sol.p);
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  bool analyzed = false;
  double best = r.norm();
  int stalls = 0;
  for (int it = 0; it < opt.max_iterations && r.norm() > opt.tol; ++it) {
    const SparseMatrix H = model.hess_F(sol.u);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(H.nonZeros() + 2 * BM.nonZeros()));
    for (int k = 0; k < H.outerSize(); ++k)
      for (SparseMatrix::InnerIterator itr(H, k); itr; ++itr) t.emplace_back(itr.row(), itr.col(), itr.value());
    for (int k = 0; k < BM.outerSize(); ++k)
      for (SparseMatrix::InnerIterator itr(BM, k); itr; ++itr) {
        t.emplace_back(nu + itr.row(), itr.col(), -itr.value());
        t.emplace_back(itr.col(), nu + itr.row(), -itr.value());
      }
    SparseMatrix A(nu + np, nu + np);
    A.setFromTriplets(t.begin(), t.end());
    if (!analyzed) {
      lu.analyzePattern(A);
      analyzed = true;
    }
    lu.factorize(A);
    if (lu.info() != Eigen::Success) throw SolverError("reference_mixed_solve: factorization failed");
    const Vector d = -lu.solve(r);
    const double rn = r.norm();
    double step = 1.0;
    Vector u_new, p_new, r_new;
    for (int k = 0;; ++k) {
      u_new = sol.u + step * d.head(nu);
      p_new = sol.p + step * d.tail(np);
      r_new = residual(u_new, p_new);
      if (r_new.norm() <= (1.0 - 1e-4 * step) * rn || rn < 1e-9) break;
      if (k >= 40) throw SolverError("reference_mixed_solve: damping failed");
      step *= 0.5;
    }
    sol.u = std::move(u_new);
    sol.p = std::move(p_new);
    r = std::move(r_new);
    ++sol.iterations;
    if (rn < 1e-9) {
      if (r.norm() >= 0.5 * best) ++stalls;
      if (stalls >= 2) break;
    }
    best = std::min(best, r.norm());
  }
  sol.residual = r.norm();
  sol.constraint_residual = (divergence(mesh, sol.u) - model.g_h()).norm();
  if (!(sol.residual <= std::max(opt.tol, 1e-9)))
    throw SolverError("reference_mixed_solve: Newton did not converge (residual " + std::to_string(sol.residual) + ")");
  return sol;
}

/// Solution of the quadratic (beta = 0) problem grad F^eps(u) = 0 by one
/// sparse Cholesky solve; used as an independent direct oracle.
inline Vector direct_quadratic_solve(const EnergyModel& model) {
  if (model.beta() != 0.0) throw std::invalid_argument("direct_quadratic_solve: requires beta = 0");
  const Vector zero = Vector::Zero(model.num_dofs());
  const SparseMatrix A = model.hess_F_eps(zero);
  const Vector b = -model.grad_F_eps(zero);
  Eigen::SimplicialLLT<SparseMatrix> llt(A);
  if (llt.info() != Eigen::Success) throw SolverError("direct_quadratic_solve: factorization failed");
  return llt.solve(b);
}

}  // namespace dfml
