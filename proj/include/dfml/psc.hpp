#pragma once

// Parallel multilevel subspace correction for min F^eps: fixed step size,
// backtracking step size, and the preconditioned CG variant for beta = 0.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "dfml/multilevel.hpp"
#include "dfml/reference.hpp"
#include "dfml/report.hpp"

namespace dfml {

struct PSCConfig {
  /// Fixed step (psc_solve) or tau^(0) (psc_backtracking_solve).
  double tau = 1.0;
  int max_iterations = 200;
  /// Relative energy error threshold, used when an oracle minimum is given.
  double stop_tol = 1e-3;
  /// Fallback stop on ||grad F^eps||_2 when no oracle minimum is given.
  double grad_tol = 1e-8;
  /// Run all max_iterations regardless of the stop rule (curve generation).
  bool fixed_iteration_count = false;
  int max_halvings = 60;
  /// Consecutive energy increases that flag divergence (fixed-step mode).
  int divergence_window = 3;
  LocalSolveOptions local;
  unsigned workers = 0;
};

struct PSCResult {
  Vector u;
  SolveReport report;
};

/// u + tau * sum_{k,i} P w_{k,i}, all corrections computed from u.
inline Vector psc_step(const EnergyModel& model, const MultilevelSpace& space, const Vector& u, double tau,
                       const LocalSolveOptions& opt = {}, unsigned workers = 0) {
  if (!(tau > 0.0)) throw std::invalid_argument("psc_step: tau must be positive");
  const PatchCorrections c = compute_corrections(model, space, u, opt, workers);
  return u + tau * c.direction;
}

namespace detail {

inline double relative_error(double energy, double f_star) { return (energy - f_star) / std::abs(f_star); }

inline void record(const EnergyModel& model, const Vector& u, double energy, std::optional<double> f_star,
                   SolveReport& rep) {
  rep.energy.push_back(energy);
  rep.residual.push_back(model.constraint_residual(u));
  if (f_star) rep.relative_energy_error.push_back(relative_error(energy, *f_star));
}

inline bool stop_reached(const EnergyModel& model, const Vector& u, double energy, std::optional<double> f_star,
                         const PSCConfig& cfg) {
  if (cfg.fixed_iteration_count) return false;
  if (f_star) return relative_error(energy, *f_star) < cfg.stop_tol;
  return model.grad_F_eps(u).norm() <= cfg.grad_tol;
}

}  // namespace detail

/// Fixed-step iteration. Aborts with `diverged` after `divergence_window`
/// consecutive energy increases or a non-finite energy.
inline PSCResult psc_solve(const EnergyModel& model, const MultilevelSpace& space, const PSCConfig& cfg,
                           std::optional<double> f_star = std::nullopt, std::optional<Vector> start = std::nullopt) {
  if (!(cfg.tau > 0.0)) throw std::invalid_argument("psc_solve: tau must be positive");
  Stopwatch clock;
  PSCResult res;
  res.u = start ? *start : Vector::Zero(model.num_dofs());
  double e = model.F_eps(res.u);
  detail::record(model, res.u, e, f_star, res.report);
  int increases = 0;
  if (detail::stop_reached(model, res.u, e, f_star, cfg)) res.report.status = SolveStatus::converged;
  while (res.report.status != SolveStatus::converged && res.report.iterations < cfg.max_iterations) {
    const PatchCorrections c = compute_corrections(model, space, res.u, cfg.local, cfg.workers);
    res.report.unconverged_local_solves += c.unconverged_local_solves;
    res.u += cfg.tau * c.direction;
    const double e_new = model.F_eps(res.u);
    ++res.report.iterations;
    res.report.tau.push_back(cfg.tau);
    detail::record(model, res.u, e_new, f_star, res.report);
    increases = e_new > e ? increases + 1 : 0;
    e = e_new;
    if (!std::isfinite(e) || increases >= cfg.divergence_window) {
      res.report.status = SolveStatus::diverged;
      break;
    }
    if (detail::stop_reached(model, res.u, e, f_star, cfg)) res.report.status = SolveStatus::converged;
  }
  if (res.report.status != SolveStatus::converged && res.report.status != SolveStatus::diverged)
    res.report.status = cfg.fixed_iteration_count ? SolveStatus::converged : SolveStatus::max_iterations;
  res.report.wall_ms = clock.elapsed_ms();
  return res;
}

/// Backtracking step selection: tau <- 2 tau^(n), halved until the global
/// decrease is at least tau times the summed local decreases.
inline PSCResult psc_backtracking_solve(const EnergyModel& model, const MultilevelSpace& space,
                                        const PSCConfig& cfg, std::optional<double> f_star = std::nullopt,
                                        std::optional<Vector> start = std::nullopt) {
  if (!(cfg.tau > 0.0)) throw std::invalid_argument("psc_backtracking_solve: tau^(0) must be positive");
  Stopwatch clock;
  PSCResult res;
  res.u = start ? *start : Vector::Zero(model.num_dofs());
  double e = model.F_eps(res.u);
  detail::record(model, res.u, e, f_star, res.report);
  double tau_prev = cfg.tau;
  if (detail::stop_reached(model, res.u, e, f_star, cfg)) res.report.status = SolveStatus::converged;
  while (res.report.status != SolveStatus::converged && res.report.iterations < cfg.max_iterations) {
    const PatchCorrections c = compute_corrections(model, space, res.u, cfg.local, cfg.workers);
    res.report.unconverged_local_solves += c.unconverged_local_solves;
    double tau = 2.0 * tau_prev;
    Vector trial = res.u + tau * c.direction;
    double e_trial = model.F_eps(trial);
    int halvings = 0;
    bool accepted = e - e_trial >= tau * c.local_decrease_sum;
    while (!accepted && halvings < cfg.max_halvings) {
      tau *= 0.5;
      ++halvings;
      trial = res.u + tau * c.direction;
      e_trial = model.F_eps(trial);
      accepted = e - e_trial >= tau * c.local_decrease_sum;
    }
    if (!accepted) {
      const bool rounding = c.local_decrease_sum <= 1e-14 * (1.0 + std::abs(e));
      res.report.status = rounding ? SolveStatus::stagnated : SolveStatus::line_search_failed;
      break;
    }
    res.u = std::move(trial);
    e = e_trial;
    tau_prev = tau;
    ++res.report.iterations;
    res.report.tau.push_back(tau);
    detail::record(model, res.u, e, f_star, res.report);
    if (detail::stop_reached(model, res.u, e, f_star, cfg)) res.report.status = SolveStatus::converged;
  }
  if (res.report.status == SolveStatus::max_iterations && cfg.fixed_iteration_count)
    res.report.status = SolveStatus::converged;
  res.report.wall_ms = clock.elapsed_ms();
  return res;
}

inline double min_step(const SolveReport& rep) {
  if (rep.tau.empty()) return std::numeric_limits<double>::quiet_NaN();
  return *std::min_element(rep.tau.begin(), rep.tau.end());
}

/// One additive pass of exact patch solves on a residual: the multilevel
/// additive Schwarz (BPX-type) preconditioner of the quadratic F^eps.
class MultilevelPreconditioner {
 public:
  MultilevelPreconditioner(const EnergyModel& model, const MultilevelSpace& space, unsigned workers = 0)
      : space_(space), workers_(workers) {
    if (model.beta() != 0.0) throw std::invalid_argument("MultilevelPreconditioner: requires beta = 0");
    const QuadValues zero = model.evaluate(Vector::Zero(model.num_dofs()));
    for (int k = 1; k <= space.num_levels(); ++k) {
      const auto& ps = space.patches(k);
      std::vector<Eigen::LLT<LocalMatrix>> level(ps.size());
      for (std::size_t i = 0; i < ps.size(); ++i) {
        const LocalEnergy le(model, ps[i], zero);
        LocalVector g(le.size());
        LocalMatrix H(le.size(), le.size());
        le.value_gradient_hessian(LocalVector::Zero(le.size()), g, H);
        level[i].compute(H);
      }
      factors_.push_back(std::move(level));
    }
  }

  Vector apply(const Vector& r) const {
    const std::vector<Vector> rk = space_.restrict_all(r);
    std::vector<Vector> zk(rk.size());
    for (int k = 1; k <= space_.num_levels(); ++k) {
      const auto& ps = space_.patches(k);
      std::vector<LocalVector> local(ps.size());
      parallel_for(
          ps.size(),
          [&](std::size_t i) {
            LocalVector rl(ps[i].size());
            for (int l = 0; l < ps[i].size(); ++l) rl[l] = rk[k - 1][ps[i].dofs[l]];
            local[i] = factors_[k - 1][i].solve(rl);
          },
          workers_);
      Vector z = Vector::Zero(rk[k - 1].size());
      for (std::size_t i = 0; i < ps.size(); ++i)
        for (int l = 0; l < ps[i].size(); ++l) z[ps[i].dofs[l]] += local[i][l];
      zk[k - 1] = std::move(z);
    }
    return space_.prolongate_sum(zk);
  }

 private:
  const MultilevelSpace& space_;
  unsigned workers_;
  std::vector<std::vector<Eigen::LLT<LocalMatrix>>> factors_;
};

struct PCGConfig {
  double rel_residual_tol = 1e-10;
  int max_iterations = 500;
  /// When set together with an oracle minimum, stop on the relative energy error instead.
  std::optional<double> energy_stop_tol;
  /// Record energies as 1/2 u'Au - b'u, i.e. F^eps(u) - F^eps(0), and shift the
  /// oracle minimum to match. Only the energy history and the relative error change.
  bool quadratic_form_energy = false;
  unsigned workers = 0;
};

/// Conjugate gradients on grad F^eps(u) = 0 (beta = 0) with the multilevel
/// preconditioner; zero initial guess.
inline PSCResult ml_pcg_solve(const EnergyModel& model, const MultilevelSpace& space, const PCGConfig& cfg = {},
                              std::optional<double> f_star = std::nullopt) {
  if (model.beta() != 0.0) throw std::invalid_argument("ml_pcg_solve: requires beta = 0");
  Stopwatch clock;
  const MultilevelPreconditioner M(model, space, cfg.workers);
  const Vector zero = Vector::Zero(model.num_dofs());
  const SparseMatrix A = model.hess_F_eps(zero);
  const Vector b = -model.grad_F_eps(zero);
  const double shift = cfg.quadratic_form_energy ? model.F_eps(zero) : 0.0;
  if (f_star) *f_star -= shift;
  auto energy_of = [&](const Vector& u) { return model.F_eps(u) - shift; };
  PSCResult res;
  res.u = zero;
  Vector r = b;
  Vector z = M.apply(r);
  Vector p = z;
  double rz = r.dot(z);
  const double bnorm = b.norm();
  detail::record(model, res.u, energy_of(res.u), f_star, res.report);

  auto done = [&](double energy) {
    if (cfg.energy_stop_tol && f_star) return detail::relative_error(energy, *f_star) < *cfg.energy_stop_tol;
    return r.norm() <= cfg.rel_residual_tol * bnorm;
  };
  if (bnorm == 0.0 || done(res.report.energy.back())) {
    res.report.status = SolveStatus::converged;
    res.report.wall_ms = clock.elapsed_ms();
    return res;
  }
  while (res.report.iterations < cfg.max_iterations) {
    const Vector Ap = A * p;
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) {
      res.report.status = SolveStatus::breakdown;
      break;
    }
    const double alpha = rz / pAp;
    res.u += alpha * p;
    r -= alpha * Ap;
    ++res.report.iterations;
    res.report.tau.push_back(alpha);
    const double energy = energy_of(res.u);
    detail::record(model, res.u, energy, f_star, res.report);
    if (done(energy)) {
      res.report.status = SolveStatus::converged;
      break;
    }
    z = M.apply(r);
    const double rz_new = r.dot(z);
    if (!(rz_new > 0.0)) {
      res.report.status = SolveStatus::breakdown;
      break;
    }
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  res.report.wall_ms = clock.elapsed_ms();
  return res;
}

}  // namespace dfml
