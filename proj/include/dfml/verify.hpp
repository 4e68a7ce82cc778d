#pragma once

// Named property checks: derivatives, energy identities, Bregman divergences,
// the abstract ALM/PPA statements, kernel decomposition, strengthened
// convexity, discretization accuracy and solver agreement.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "dfml/abstract_alm.hpp"
#include "dfml/alm.hpp"
#include "dfml/bench.hpp"
#include "dfml/problem.hpp"
#include "dfml/psc.hpp"

namespace dfml::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Fault injection for mutation testing of the checks themselves.
struct VerifyOptions {
  /// Flip the sign of the multiplier update in the abstract ALM.
  bool flip_alm_sign = false;
  /// Scale the first quadrature weight of the energy rule.
  bool perturb_quadrature_weight = false;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

inline Vector random_vector(int n, std::mt19937& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> ud(-scale, scale);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = ud(rng);
  return v;
}

inline QuadratureRule energy_rule(const VerifyOptions& opt) {
  QuadratureRule r = QuadratureRule::gauss3x3();
  if (opt.perturb_quadrature_weight) r.weight[0] *= 1.01;
  return r;
}

/// Example 1 energy on an n0=2 hierarchy with `levels` levels and a random multiplier.
inline EnergyModel test_model(int levels, double beta, double eps, const VerifyOptions& opt, unsigned seed) {
  const auto mh = std::make_shared<const MeshHierarchy>(2, levels);
  EnergyModel m(mh, benchmark_problem(BenchmarkExample::ex1, beta).data, eps, energy_rule(opt));
  std::mt19937 rng(seed);
  return m.with_multiplier(random_vector(m.mesh().num_cells(), rng));
}

}  // namespace detail

/// Central finite differences of F^eps and of its gradient against the
/// analytic gradient and Hessian.
inline CheckResult check_gradient_hessian(const VerifyOptions& opt = {}) {
  const EnergyModel m = detail::test_model(3, 30.0, 0.1, opt, 11);
  std::mt19937 rng(12);
  const int n = m.num_dofs();
  double worst_g = 0.0;
  double worst_h = 0.0;
  for (int s = 0; s < 3; ++s) {
    const Vector v = detail::random_vector(n, rng);
    const Vector g = m.grad_F_eps(v);
    Vector fd(n);
    const double t = 1e-6;
    for (int i = 0; i < n; ++i) {
      Vector a = v, b = v;
      a[i] += t;
      b[i] -= t;
      fd[i] = (m.F_eps(a) - m.F_eps(b)) / (2 * t);
    }
    worst_g = std::max(worst_g, (fd - g).norm() / g.norm());
    const SparseMatrix H = m.hess_F_eps(v);
    for (int d = 0; d < 3; ++d) {
      const Vector dir = detail::random_vector(n, rng);
      const double th = 1e-5;
      const Vector fdh = (m.grad_F_eps(v + th * dir) - m.grad_F_eps(v - th * dir)) / (2 * th);
      const Vector Hd = H * dir;
      worst_h = std::max(worst_h, (fdh - Hd).norm() / Hd.norm());
    }
  }
  const bool ok = worst_g <= 1e-6 && worst_h <= 1e-5;
  return {"gradient_hessian_fd", ok, "grad rel " + detail::fmt(worst_g) + ", hess rel " + detail::fmt(worst_h)};
}

/// Local patch energy derivatives against finite differences of its value.
inline CheckResult check_local_energy_derivatives(const VerifyOptions& opt = {}) {
  const EnergyModel m = detail::test_model(3, 30.0, 0.1, opt, 21);
  const MultilevelSpace space(m.hierarchy_ptr());
  std::mt19937 rng(22);
  const QuadValues uq = m.evaluate(detail::random_vector(m.num_dofs(), rng));
  double worst_g = 0.0;
  double worst_h = 0.0;
  for (int k = 1; k <= space.num_levels(); ++k) {
    const PatchSpace& ps = space.patches(k)[space.patches(k).size() / 2];
    const LocalEnergy le(m, ps, uq);
    const int s = le.size();
    LocalVector w = LocalVector::Zero(s);
    for (int i = 0; i < s; ++i) w[i] = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
    LocalVector g(s), gp(s), gm(s);
    LocalMatrix H(s, s), Hs(s, s);
    le.value_gradient_hessian(w, g, H);
    LocalVector fd(s);
    LocalMatrix fdh(s, s);
    const double t = 1e-6;
    for (int i = 0; i < s; ++i) {
      LocalVector a = w, b = w;
      a[i] += t;
      b[i] -= t;
      fd[i] = (le.value(a) - le.value(b)) / (2 * t);
      le.value_gradient_hessian(a, gp, Hs);
      le.value_gradient_hessian(b, gm, Hs);
      fdh.col(i) = (gp - gm) / (2 * t);
    }
    worst_g = std::max(worst_g, (fd - g).norm() / g.norm());
    worst_h = std::max(worst_h, (fdh - H).norm() / H.norm());
  }
  const bool ok = worst_g <= 1e-6 && worst_h <= 1e-5;
  return {"local_energy_fd", ok, "grad rel " + detail::fmt(worst_g) + ", hess rel " + detail::fmt(worst_h)};
}

/// F^eps = F0 + eps F1 on random fields, relative 1e-13.
inline CheckResult check_feps_identity(const VerifyOptions& opt = {}) {
  double worst = 0.0;
  for (double eps : {1.0, 1e-1, 1e-3}) {
    const EnergyModel m = detail::test_model(3, 20.0, eps, opt, 31);
    std::mt19937 rng(32);
    for (int s = 0; s < 5; ++s) {
      const Vector v = detail::random_vector(m.num_dofs(), rng);
      const double a = m.F_eps(v);
      const double b = m.F0(v) + eps * m.F1(v);
      worst = std::max(worst, std::abs(a - b) / std::max(std::abs(a), std::abs(b)));
    }
  }
  return {"feps_split_identity", worst <= 1e-13, "max rel " + detail::fmt(worst)};
}

/// d0(w; v) = 1/2 ||div w||^2 regardless of v, matching the Bregman definition.
inline CheckResult check_d0_independence(const VerifyOptions& opt = {}) {
  const EnergyModel m = detail::test_model(3, 10.0, 0.1, opt, 41);
  std::mt19937 rng(42);
  bool exact = true;
  double worst = 0.0;
  for (int s = 0; s < 5; ++s) {
    const Vector w = detail::random_vector(m.num_dofs(), rng);
    const double ref = m.d0(w, Vector::Zero(m.num_dofs()));
    for (int t = 0; t < 5; ++t) {
      const Vector v = detail::random_vector(m.num_dofs(), rng, 3.0);
      exact = exact && m.d0(w, v) == ref;
      const double def = m.F0(v + w) - m.F0(v) - m.grad_F0(v).dot(w);
      worst = std::max(worst, std::abs(def - ref) / ref);
    }
  }
  return {"d0_independence", exact && worst <= 1e-10,
          std::string(exact ? "bitwise equal" : "differs") + ", definition rel " + detail::fmt(worst)};
}

/// d1, D_F and D_F^sym are nonnegative on random pairs.
inline CheckResult check_bregman_nonnegativity(const VerifyOptions& opt = {}) {
  const EnergyModel m = detail::test_model(3, 30.0, 0.1, opt, 51);
  std::mt19937 rng(52);
  double lowest = 0.0;
  for (int s = 0; s < 50; ++s) {
    const Vector v = detail::random_vector(m.num_dofs(), rng);
    const Vector w = detail::random_vector(m.num_dofs(), rng, 0.1 + 0.05 * s);
    const double scale = 1e-12 * (1.0 + std::abs(m.F(v)));
    lowest = std::min({lowest, m.d1(w, v) / scale, m.bregman_F(w, v) / scale, m.sym_bregman(v + w, v) / scale});
  }
  return {"bregman_nonnegativity", lowest >= -1.0, "min scaled value " + detail::fmt(lowest)};
}

inline std::vector<abstract::GeneralProblem> abstract_instances() {
  return {abstract::quadratic_instance(), abstract::quartic_instance(6, 3, 7),
          abstract::weighted_quartic_instance(10, 4, 8)};
}

/// ALM iterates p^(n) coincide with PPA iterates q^(n) (p^0 = q^0 = 0).
inline CheckResult check_alm_ppa_equivalence(const VerifyOptions& opt = {}) {
  double worst = 0.0;
  const double sign = opt.flip_alm_sign ? -1.0 : 1.0;
  for (const auto& prob : abstract_instances())
    for (double eps : {1.0, 0.1}) {
      const Vector p0 = Vector::Zero(prob.dim_w());
      const auto alm = abstract::alm_general(prob, eps, p0, 10, sign);
      const auto ppa = abstract::ppa_dual(prob, eps, p0, 10);
      for (std::size_t n = 0; n < ppa.size(); ++n) worst = std::max(worst, (alm.p[n] - ppa[n]).norm());
    }
  return {"alm_ppa_equivalence", worst <= 1e-8, "max |p^n - q^n| " + detail::fmt(worst)};
}

/// PPA contraction with the sampled modulus and the Bregman bounds on the ALM
/// primal iterates, every step, eps in {10, 1, 0.1}.
inline CheckResult check_alm_rate_bounds(const VerifyOptions& opt = {}) {
  const double sign = opt.flip_alm_sign ? -1.0 : 1.0;
  bool ok = true;
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& prob : abstract_instances()) {
    const auto exact = abstract::solve_kkt(prob);
    for (double eps : {10.0, 1.0, 0.1}) {
      const Vector p0 = Vector::Zero(prob.dim_w());
      const auto qs = abstract::ppa_dual(prob, eps, p0, 10);
      const double mu = abstract::estimate_mu(prob, qs, exact.p);
      for (std::size_t n = 0; n + 1 < qs.size(); ++n) {
        const double lhs = (qs[n + 1] - exact.p).norm();
        const double rhs = eps / (mu + eps) * (qs[n] - exact.p).norm();
        margin = std::min(margin, rhs - lhs);
        ok = ok && lhs <= rhs + 1e-12 * (1.0 + rhs);
      }
      const auto tr = abstract::alm_general(prob, eps, p0, 10, sign);
      const auto rep = abstract::verify_alm_bounds(prob, eps, tr, exact, mu);
      ok = ok && rep.all_hold();
      margin = std::min(margin, rep.min_margin());
    }
  }
  return {"alm_rate_bounds", ok, "min margin " + detail::fmt(margin)};
}

/// Abstract ALM with B = -h div, g = -h g_h reproduces the discrete ALM on the
/// 2x2 grid, with p_abstract = h p.
inline CheckResult check_cross_module(const VerifyOptions& opt = {}) {
  const auto mh = std::make_shared<const MeshHierarchy>(2, 1);
  const EnergyModel model(mh, benchmark_problem(BenchmarkExample::ex1, 10.0).data, 0.1);
  const LevelMesh& mesh = model.mesh();
  const double h = mesh.h();
  abstract::GeneralProblem prob;
  prob.name = "darcy-forchheimer 2x2";
  prob.F.value = [&](const Vector& v) { return model.F(v); };
  prob.F.gradient = [&](const Vector& v) { return model.grad_F(v); };
  prob.F.hessian = [&](const Vector& v) -> Matrix { return Matrix(model.hess_F(v)); };
  prob.B = -h * Matrix(divergence_matrix(mesh));
  prob.g = -h * model.g_h();
  const int steps = 8;
  const auto tr = abstract::alm_general(prob, model.epsilon(), Vector::Zero(prob.dim_w()), steps,
                                        opt.flip_alm_sign ? -1.0 : 1.0);
  ALMConfig cfg;
  cfg.max_outer = steps;
  cfg.stop_tol = 0.0;
  cfg.keep_trajectory = true;
  const ALMResult r = alm_solve(model, cfg, reference_mixed_solve(model));
  double worst = 0.0;
  for (int n = 0; n < steps; ++n) {
    worst = std::max(worst, (r.u_history[n] - tr.u[n]).norm());
    worst = std::max(worst, (h * r.p_history[n + 1] - tr.p[n + 1]).norm());
  }
  return {"cross_module_alm", worst <= 1e-10, "max difference " + detail::fmt(worst)};
}

/// dim sum_{k,i} (V_k^i cap ker B) = dim ker B on the 4x4 two-level hierarchy.
inline CheckResult check_kernel_decomposition(const VerifyOptions& = {}) {
  const auto mh = std::make_shared<const MeshHierarchy>(2, 2);
  const MultilevelSpace space(mh);
  const LevelMesh& fine = mh->finest();
  const Matrix D(divergence_matrix(fine));
  Eigen::FullPivLU<Matrix> dlu(D);
  const int dim_ker = static_cast<int>(D.cols()) - static_cast<int>(dlu.rank());
  Matrix stacked(D.cols(), 0);
  for (int k = 1; k <= space.num_levels(); ++k)
    for (const auto& ps : space.patches(k)) {
      const Matrix P = space.prolonged_basis(ps);
      const Matrix N = Eigen::FullPivLU<Matrix>(D * P).kernel();
      if (N.cols() == 0 || N.norm() == 0.0) continue;
      const Matrix PN = P * N;
      stacked.conservativeResize(Eigen::NoChange, stacked.cols() + PN.cols());
      stacked.rightCols(PN.cols()) = PN;
    }
  Eigen::FullPivLU<Matrix> slu(stacked);
  slu.setThreshold(1e-10);
  const int rank = static_cast<int>(slu.rank());
  const bool in_kernel = (D * stacked).norm() <= 1e-10 * (1.0 + stacked.norm());
  return {"kernel_decomposition", rank == dim_ker && in_kernel,
          "rank " + std::to_string(rank) + " vs dim ker B " + std::to_string(dim_ker) + " (edges " +
              std::to_string(fine.num_edges()) + ", cells " + std::to_string(fine.num_cells()) + ")"};
}

/// F(v + tau sum w_ki) <= F(v) + tau sum [F(v + w_ki) - F(v)] with
/// tau = 1/(4 * max patches per cell * J), on 100 random samples.
inline CheckResult check_strengthened_convexity(const VerifyOptions& opt = {}) {
  const EnergyModel m = detail::test_model(3, 30.0, 0.1, opt, 61);
  const MultilevelSpace space(m.hierarchy_ptr());
  const int J = space.num_levels();
  int overlap = 0;
  for (int k = 1; k <= J; ++k) {
    std::vector<int> count(static_cast<std::size_t>(space.hierarchy().level(k).num_cells()), 0);
    for (const auto& ps : space.patches(k))
      for (const auto& c : ps.patch.cells) overlap = std::max(overlap, ++count[c]);
  }
  const double tau = 1.0 / (4.0 * overlap * J);
  std::vector<Matrix> bases;
  for (int k = 1; k <= J; ++k)
    for (const auto& ps : space.patches(k)) bases.push_back(space.prolonged_basis(ps));
  std::mt19937 rng(62);
  double margin = std::numeric_limits<double>::infinity();
  bool ok = true;
  for (int s = 0; s < 100; ++s) {
    const Vector v = detail::random_vector(m.num_dofs(), rng);
    const double fv = m.F_eps(v);
    const double scale = 0.05 + 0.02 * (s % 10);
    Vector sum = Vector::Zero(m.num_dofs());
    std::vector<double> local;
    for (const Matrix& P : bases) {
      const Vector w = P * detail::random_vector(static_cast<int>(P.cols()), rng, scale);
      sum += w;
      local.push_back(m.F_eps(v + w) - fv);
    }
    const double rhs = fv + tau * pairwise_sum(local);
    const double lhs = m.F_eps(v + tau * sum);
    margin = std::min(margin, rhs - lhs);
    ok = ok && lhs <= rhs + 1e-12 * (1.0 + std::abs(fv));
  }
  return {"strengthened_convexity", ok,
          "tau 1/" + std::to_string(4 * overlap * J) + ", min margin " + detail::fmt(margin)};
}

/// RT0 interpolation reproduces fields of the form (a + b x, c + d y) and
/// commutes with the cell mean of the divergence.
inline CheckResult check_rt0_interpolation(const VerifyOptions& = {}) {
  const MeshHierarchy mh(2, 3);
  const LevelMesh& mesh = mh.finest();
  const double a = 0.3, b = -1.2, c = 2.0, d = 0.7;
  const auto u = [&](double x, double y) { return Vec2{a + b * x, c + d * y}; };
  const Vector flux = interpolate_velocity(u, mesh);
  std::mt19937 rng(71);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  double worst = 0.0;
  for (int cell = 0; cell < mesh.num_cells(); ++cell) {
    const double xi = ud(rng), eta = ud(rng);
    const Vec2 val = rt0_value(mesh, flux, cell, xi, eta);
    const Cell& cl = mesh.cell(cell);
    const Vec2 ex = u(cl.lower.x + xi * mesh.h(), cl.lower.y + eta * mesh.h());
    worst = std::max({worst, std::abs(val.x - ex.x), std::abs(val.y - ex.y)});
  }
  const auto smooth = [](double x, double y) { return Vec2{std::sin(x) * y, std::exp(x * y)}; };
  const auto div_smooth = [](double x, double y) { return std::cos(x) * y + x * std::exp(x * y); };
  const Vector commute = divergence(mesh, interpolate_velocity(smooth, mesh)) - l2_project_scalar(div_smooth, mesh);
  const double cmax = commute.lpNorm<Eigen::Infinity>();
  return {"rt0_interpolation", worst <= 1e-13 && cmax <= 1e-6,
          "reproduction " + detail::fmt(worst) + ", commuting " + detail::fmt(cmax)};
}

/// First-order L2 velocity convergence on Example 1, beta = 10.
inline CheckResult check_convergence_rate(const VerifyOptions& = {}) {
  const auto prob = benchmark_problem(BenchmarkExample::ex1, 10.0);
  double err[2];
  for (int i = 0; i < 2; ++i) {
    const auto mh = std::make_shared<const MeshHierarchy>(2, 4 + i);
    const EnergyModel m(mh, prob.data, 1.0);
    err[i] = velocity_l2_error(m.mesh(), reference_mixed_solve(m).u, prob.u_exact);
  }
  const double ratio = err[0] / err[1];
  return {"rt0_convergence_rate", std::abs(ratio - 2.0) <= 0.3,
          "errors " + detail::fmt(err[0]) + ", " + detail::fmt(err[1]) + ", ratio " + detail::fmt(ratio)};
}

/// Multilevel PCG (beta = 0) against a sparse Cholesky solve.
inline CheckResult check_pcg_direct(const VerifyOptions& = {}) {
  double worst = 0.0;
  for (auto ex : {BenchmarkExample::ex1, BenchmarkExample::ex2})
    for (double eps : {1.0, 1e-3}) {
      const auto mh = std::make_shared<const MeshHierarchy>(2, 4);
      const EnergyModel m(mh, benchmark_problem(ex, 0.0).data, eps);
      const MultilevelSpace space(mh);
      PCGConfig cfg;
      cfg.rel_residual_tol = 1e-13;
      const Vector u = ml_pcg_solve(m, space, cfg).u;
      const Vector ud = direct_quadratic_solve(m);
      worst = std::max(worst, (u - ud).norm() / ud.norm());
    }
  return {"pcg_vs_direct", worst <= 1e-8, "max rel " + detail::fmt(worst)};
}

/// Accepted backtracking iterates never increase F^eps.
inline CheckResult check_backtracking_monotone(const VerifyOptions& = {}) {
  bool ok = true;
  int runs = 0;
  for (auto ex : {BenchmarkExample::ex1, BenchmarkExample::ex2})
    for (double eps : {1.0, 1e-2}) {
      const auto mh = std::make_shared<const MeshHierarchy>(2, 4);
      const EnergyModel m(mh, benchmark_problem(ex, 30.0).data, eps);
      const MultilevelSpace space(mh);
      PSCConfig cfg;
      cfg.max_iterations = 15;
      cfg.fixed_iteration_count = true;
      const auto r = psc_backtracking_solve(m, space, cfg);
      ok = ok && r.report.status != SolveStatus::line_search_failed;
      for (std::size_t n = 1; n < r.report.energy.size(); ++n) ok = ok && r.report.energy[n] <= r.report.energy[n - 1];
      ++runs;
    }
  return {"backtracking_monotone", ok, std::to_string(runs) + " runs"};
}

/// D_F^sym(u^(n+1), u_h) <= eps/4 ||p^(n) - p_h||^2 along discrete ALM runs.
inline CheckResult check_alm_bound(const VerifyOptions& = {}) {
  const auto mh = std::make_shared<const MeshHierarchy>(2, 4);
  const EnergyModel base(mh, benchmark_problem(BenchmarkExample::ex1, 10.0).data, 1.0);
  const MixedSolution ref = reference_mixed_solve(base);
  bool ok = true;
  for (double eps : {1.0, 1e-1, 1e-2, 1e-3}) {
    ALMConfig cfg;
    cfg.keep_trajectory = true;
    const EnergyModel m = base.with_epsilon(eps);
    ok = ok && bench::alm_bound_holds(m, alm_solve(m, cfg, ref), ref);
  }
  return {"alm_bregman_bound", ok, "ex1 beta=10 h=2^-4, 4 eps values"};
}

struct NamedCheck {
  std::string name;
  std::function<CheckResult(const VerifyOptions&)> run;
};

inline std::vector<NamedCheck> all_checks() {
  return {
      {"gradient_hessian_fd", check_gradient_hessian},
      {"local_energy_fd", check_local_energy_derivatives},
      {"feps_split_identity", check_feps_identity},
      {"d0_independence", check_d0_independence},
      {"bregman_nonnegativity", check_bregman_nonnegativity},
      {"alm_ppa_equivalence", check_alm_ppa_equivalence},
      {"alm_rate_bounds", check_alm_rate_bounds},
      {"cross_module_alm", check_cross_module},
      {"kernel_decomposition", check_kernel_decomposition},
      {"strengthened_convexity", check_strengthened_convexity},
      {"rt0_interpolation", check_rt0_interpolation},
      {"rt0_convergence_rate", check_convergence_rate},
      {"pcg_vs_direct", check_pcg_direct},
      {"backtracking_monotone", check_backtracking_monotone},
      {"alm_bregman_bound", check_alm_bound},
  };
}

/// Runs every check; exceptions count as failures.
inline std::vector<CheckResult> run_all(const VerifyOptions& opt = {}) {
  std::vector<CheckResult> out;
  for (const auto& c : all_checks()) {
    try {
      out.push_back(c.run(opt));
    } catch (const std::exception& e) {
      out.push_back({c.name, false, std::string("exception: ") + e.what()});
    }
  }
  return out;
}

}  // namespace dfml::verify
