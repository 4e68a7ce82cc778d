#pragma once

// Augmented Lagrangian outer loop for min F(v) subject to div v = g_h:
//   u^(n+1) = argmin F^eps(. ; q_h = p^(n))
//   p^(n+1) = p^(n) - (div u^(n+1) - g_h) / eps

#include <algorithm>
#include <optional>

#include "dfml/psc.hpp"
#include "dfml/reference.hpp"

namespace dfml {

enum class InnerSolver { reference_newton, multilevel };

struct ALMConfig {
  int max_outer = 100;
  double stop_tol = 1e-3;
  InnerSolver inner = InnerSolver::reference_newton;
  NewtonOptions newton;
  /// Used when inner == multilevel; stops on the gradient norm.
  PSCConfig psc{.tau = 1.0, .max_iterations = 500, .stop_tol = 1e-3, .grad_tol = 1e-10};
  bool keep_trajectory = false;
};

struct ALMResult {
  Vector u;
  Vector p;
  SolveReport report;
  /// max of the relative l2 errors of u^(n), p^(n) against the reference pair, n >= 1
  std::vector<double> relative_error;
  /// u^(1), u^(2), ... and p^(0), p^(1), ... when keep_trajectory is set
  std::vector<Vector> u_history;
  std::vector<Vector> p_history;
};

/// Runs until max(|u^n - u_h|/|u_h|, |p^n - p_h|/|p_h|) < stop_tol (plain dof
/// l2 norms) against the reference pair, or max_outer iterations.
inline ALMResult alm_solve(const EnergyModel& model, const ALMConfig& cfg, const MixedSolution& reference,
                           const MultilevelSpace* space = nullptr) {
  if (cfg.inner == InnerSolver::multilevel && space == nullptr)
    throw std::invalid_argument("alm_solve: multilevel inner solver needs a MultilevelSpace");
  Stopwatch clock;
  const LevelMesh& mesh = model.mesh();
  const double eps = model.epsilon();
  ALMResult res;
  res.u = Vector::Zero(mesh.num_edges());
  res.p = Vector::Zero(mesh.num_cells());
  const double un = reference.u.norm();
  const double pn = reference.p.norm();
  if (cfg.keep_trajectory) res.p_history.push_back(res.p);
  res.report.status = SolveStatus::max_iterations;
  for (int n = 0; n < cfg.max_outer; ++n) {
    const EnergyModel inner = model.with_multiplier(res.p);
    if (cfg.inner == InnerSolver::reference_newton) {
      res.u = reference_min_F_eps(inner, res.u, cfg.newton).u;
    } else {
      PSCResult r = psc_backtracking_solve(inner, *space, cfg.psc, std::nullopt, res.u);
      if (r.report.status == SolveStatus::line_search_failed || r.report.status == SolveStatus::diverged) {
        res.report.status = r.report.status;
        break;
      }
      res.u = std::move(r.u);
    }
    res.p -= (divergence(mesh, res.u) - model.g_h()) / eps;
    ++res.report.iterations;
    res.report.energy.push_back(model.F(res.u));
    res.report.residual.push_back(model.constraint_residual(res.u));
    if (cfg.keep_trajectory) {
      res.u_history.push_back(res.u);
      res.p_history.push_back(res.p);
    }
    const double err = std::max((res.u - reference.u).norm() / un, (res.p - reference.p).norm() / pn);
    res.relative_error.push_back(err);
    if (err < cfg.stop_tol) {
      res.report.status = SolveStatus::converged;
      break;
    }
  }
  res.report.wall_ms = clock.elapsed_ms();
  return res;
}

}  // namespace dfml
