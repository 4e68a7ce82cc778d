#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dfml/bench.hpp"
#include "dfml/verify.hpp"

namespace {

using namespace dfml;
using bench::ExperimentConfig;

struct CommonOptions {
  std::string config;
  std::vector<std::string> sets;
  std::string example, beta, epsilon, h, solver, tau, output;
  int jobs = 0;
  bool timing = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->set_help_flag("--help", "Print this help message and exit");
  cmd->add_option("--config", o.config, "key=value experiment file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--example", o.example, "ex1, ex2 or a list");
  cmd->add_option("--beta", o.beta, "comma-separated Forchheimer coefficients");
  cmd->add_option("--epsilon", o.epsilon, "comma-separated augmented Lagrangian parameters");
  cmd->add_option("--h", o.h, "comma-separated mesh exponents k (h = 2^-k)");
  cmd->add_option("--solver", o.solver, "alm | ml-backtracking | ml-fixed | pcg");
  cmd->add_option("--tau", o.tau, "fixed step sizes");
  cmd->add_option("--output", o.output, "output file (tables) or directory (curves)");
  cmd->add_option("--jobs", o.jobs, "concurrent grid cells")->check(CLI::PositiveNumber);
  cmd->add_flag("--timing", o.timing, "append wall-time columns");
  cmd->add_option("--set", o.sets, "override any config key, KEY=VALUE");
}

ExperimentConfig load(const CommonOptions& o) {
  std::vector<std::pair<std::string, std::string>> ov;
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw bench::ConfigError("--set expects KEY=VALUE, got " + s);
    ov.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  auto add = [&](const char* key, const std::string& v) {
    if (!v.empty()) ov.emplace_back(key, v);
  };
  add("example", o.example);
  add("beta", o.beta);
  add("epsilon", o.epsilon);
  add("h", o.h);
  add("solver", o.solver);
  add("tau", o.tau);
  add("output", o.output);
  if (o.jobs > 0) ov.emplace_back("jobs", std::to_string(o.jobs));
  if (o.timing) ov.emplace_back("timing", "true");
  return bench::load_config(o.config, ov);
}

void emit(const ExperimentConfig& cfg, const std::string& csv) {
  if (cfg.output.empty()) {
    std::cout << csv;
  } else {
    bench::write_file(cfg.output, csv);
    std::cerr << "wrote " << cfg.output << "\n";
  }
}

int report_rows(const std::vector<bench::ResultRow>& rows) {
  int failures = 0;
  for (const auto& r : rows)
    if (!r.converged) {
      ++failures;
      std::cerr << "not converged: " << to_string(r.example) << " beta=" << r.beta << " eps=" << r.epsilon
                << " h=2^-" << r.h_exponent << (r.message.empty() ? "" : " (" + r.message + ")") << "\n";
    }
  return failures == 0 ? 0 : 1;
}

int run_curves(const ExperimentConfig& cfg) {
  const auto curves = bench::cmd_curves(cfg);
  const std::filesystem::path dir = cfg.output.empty() ? "curves" : cfg.output;
  for (const auto& c : curves) bench::write_file(dir / c.file_name(), bench::curve_csv(c));
  const std::string summary = bench::curves_summary_csv(curves, cfg.timing);
  bench::write_file(dir / "summary.csv", summary);
  std::cout << summary;
  int failures = 0;
  for (const auto& c : curves)
    if (c.backtracking() && c.status == SolveStatus::line_search_failed) {
      ++failures;
      std::cerr << "line search failed: " << c.file_name() << "\n";
    }
  return failures == 0 ? 0 : 1;
}

int run_verify(const verify::VerifyOptions& opt) {
  int failed = 0;
  for (const auto& r : verify::run_all(opt)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    failed += r.passed ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all checks passed" : std::to_string(failed) + " check(s) failed") << "\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Darcy-Forchheimer augmented Lagrangian / multilevel benchmark driver"};
  app.require_subcommand(1);

  CommonOptions alm_opt, ml_opt, curve_opt;
  auto* alm = app.add_subcommand("alm-table", "ALM outer-iteration counts over a (beta, epsilon, h) grid");
  add_common(alm, alm_opt);
  auto* ml = app.add_subcommand("ml-table", "multilevel iteration counts and minimum step sizes");
  add_common(ml, ml_opt);
  auto* cur = app.add_subcommand("curves", "relative energy error curves, fixed step and backtracking");
  add_common(cur, curve_opt);
  verify::VerifyOptions vopt;
  auto* ver = app.add_subcommand("verify", "run the property checks");
  ver->add_flag("--inject-alm-sign-error", vopt.flip_alm_sign, "mutation: flip the ALM multiplier update sign");
  ver->add_flag("--inject-quadrature-error", vopt.perturb_quadrature_weight,
                "mutation: perturb one quadrature weight");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (alm->parsed()) {
      const auto cfg = load(alm_opt);
      const auto rows = bench::cmd_alm_table(cfg);
      emit(cfg, bench::alm_csv(rows, cfg.timing));
      return report_rows(rows);
    }
    if (ml->parsed()) {
      const auto cfg = load(ml_opt);
      const auto rows = bench::cmd_ml_table(cfg);
      emit(cfg, bench::ml_csv(rows, cfg.timing));
      return report_rows(rows);
    }
    if (cur->parsed()) return run_curves(load(curve_opt));
    if (ver->parsed()) return run_verify(vopt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
