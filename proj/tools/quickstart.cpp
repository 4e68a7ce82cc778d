// Solves one Darcy-Forchheimer problem three ways and prints a short summary.

#include <cstdio>
#include <memory>

#include "dfml/dfml.hpp"

int main() {
  using namespace dfml;
  const auto mh = std::make_shared<const MeshHierarchy>(2, levels_for_exponent(5));
  const MultilevelSpace space(mh);
  const auto problem = benchmark_problem(BenchmarkExample::ex2, 20.0);
  const EnergyModel model(mh, problem.data, 1e-2);

  const MixedSolution ref = reference_mixed_solve(model);
  std::printf("reference: %d Newton steps, KKT residual %.2e\n", ref.iterations, ref.residual);
  std::printf("  velocity L2 error %.3e, pressure L2 error %.3e\n",
              velocity_l2_error(model.mesh(), ref.u, problem.u_exact),
              pressure_l2(model.mesh(), ref.p - l2_project_scalar(problem.p_exact, model.mesh())));

  const ALMResult alm = alm_solve(model, ALMConfig{}, ref);
  std::printf("ALM: %s after %d outer steps\n", to_string(alm.report.status).c_str(), alm.report.iterations);

  const double f_star = reference_min_F_eps(model).energy;
  const PSCResult ml = psc_backtracking_solve(model, space, PSCConfig{}, f_star);
  std::printf("multilevel backtracking: %s after %d iterations, min step %g\n",
              to_string(ml.report.status).c_str(), ml.report.iterations, min_step(ml.report));
}
