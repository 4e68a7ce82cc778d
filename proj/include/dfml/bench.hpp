#pragma once

// Experiment runner: key=value configuration, grid dispatch over a bounded
// worker pool, and deterministic CSV output for the ALM table, the multilevel
// table and the convergence curves.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "dfml/alm.hpp"
#include "dfml/problem.hpp"
#include "dfml/psc.hpp"

namespace dfml::bench {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SolverKind { alm, ml_backtracking, ml_fixed, pcg };

inline std::string to_string(SolverKind s) {
  switch (s) {
    case SolverKind::alm: return "alm";
    case SolverKind::ml_backtracking: return "ml-backtracking";
    case SolverKind::ml_fixed: return "ml-fixed";
    case SolverKind::pcg: return "pcg";
  }
  return "unknown";
}

inline SolverKind parse_solver(const std::string& s) {
  if (s == "alm") return SolverKind::alm;
  if (s == "ml-backtracking") return SolverKind::ml_backtracking;
  if (s == "ml-fixed") return SolverKind::ml_fixed;
  if (s == "pcg") return SolverKind::pcg;
  throw ConfigError("unknown solver '" + s + "'");
}

struct ExperimentConfig {
  std::vector<BenchmarkExample> examples{BenchmarkExample::ex1};
  std::vector<double> beta{0.0, 10.0, 20.0, 30.0};
  std::vector<double> epsilon{1.0, 1e-1, 1e-2, 1e-3};
  /// h = 2^-k for each k
  std::vector<int> h_exponents{4, 5, 6, 7};
  SolverKind solver = SolverKind::ml_backtracking;
  /// Solver used for beta = 0 cells of the multilevel table.
  SolverKind linear_solver = SolverKind::pcg;
  /// Fixed step sizes for the curves.
  std::vector<double> tau{0.25, 0.125, 0.0625};
  /// tau^(0) for backtracking.
  double tau0 = 1.0;
  double alm_stop_tol = 1e-3;
  double ml_stop_tol = 1e-3;
  /// Curves run until the relative energy error falls below this floor.
  double curve_floor = 1e-10;
  int max_iterations = 200;
  int curve_max_iterations = 100;
  int max_outer = 100;
  std::string output;
  unsigned jobs = 1;
  bool timing = false;

  void validate() const {
    if (examples.empty() || beta.empty() || epsilon.empty() || h_exponents.empty())
      throw ConfigError("example, beta, epsilon and h lists must be nonempty");
    for (double b : beta)
      if (!(b >= 0.0)) throw ConfigError("beta must be nonnegative");
    for (double e : epsilon)
      if (!(e > 0.0)) throw ConfigError("epsilon must be positive");
    for (int k : h_exponents)
      if (k < 2 || k > 12) throw ConfigError("h exponents must lie in [2, 12]");
    for (double t : tau)
      if (!(t > 0.0)) throw ConfigError("tau must be positive");
    if (!(tau0 > 0.0)) throw ConfigError("tau0 must be positive");
    if (jobs == 0) throw ConfigError("jobs must be at least 1");
    if (max_iterations < 1 || curve_max_iterations < 1 || max_outer < 1)
      throw ConfigError("iteration limits must be positive");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ConfigError("invalid number '" + s + "' for key '" + key + "'");
  }
  if (pos != s.size()) throw ConfigError("invalid number '" + s + "' for key '" + key + "'");
  return v;
}

inline int to_int(const std::string& key, const std::string& s) {
  const double v = to_double(key, s);
  if (v != std::floor(v)) throw ConfigError("expected an integer for key '" + key + "'");
  return static_cast<int>(v);
}

inline bool to_bool(const std::string& key, const std::string& s) {
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("invalid boolean '" + s + "' for key '" + key + "'");
}

/// Accepts "5" or "2^-5" for h = 2^-5, or a decimal power of two such as 0.03125.
inline int to_h_exponent(const std::string& s) {
  if (s.rfind("2^-", 0) == 0) return to_int("h", s.substr(3));
  const double v = to_double("h", s);
  if (v >= 1.0) return to_int("h", s);
  const double k = -std::log2(v);
  if (std::abs(k - std::round(k)) > 1e-12) throw ConfigError("h must be a power of two, got " + s);
  return static_cast<int>(std::lround(k));
}

}  // namespace detail

/// Sets one key. Unknown keys are an error.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key_in, const std::string& value_in) {
  using namespace detail;
  const std::string key = trim(key_in);
  const std::string value = trim(value_in);
  const auto list = split_list(value);
  auto doubles = [&] {
    std::vector<double> v;
    for (const auto& s : list) v.push_back(to_double(key, s));
    return v;
  };
  if (key == "example") {
    cfg.examples.clear();
    for (const auto& s : list) {
      try {
        cfg.examples.push_back(parse_example(s));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  } else if (key == "beta") {
    cfg.beta = doubles();
  } else if (key == "epsilon") {
    cfg.epsilon = doubles();
  } else if (key == "h") {
    cfg.h_exponents.clear();
    for (const auto& s : list) cfg.h_exponents.push_back(to_h_exponent(s));
  } else if (key == "solver") {
    cfg.solver = parse_solver(value);
  } else if (key == "linear_solver") {
    cfg.linear_solver = parse_solver(value);
  } else if (key == "tau") {
    cfg.tau = doubles();
  } else if (key == "tau0") {
    cfg.tau0 = to_double(key, value);
  } else if (key == "stop_tol") {
    cfg.alm_stop_tol = cfg.ml_stop_tol = to_double(key, value);
  } else if (key == "alm_stop_tol") {
    cfg.alm_stop_tol = to_double(key, value);
  } else if (key == "ml_stop_tol") {
    cfg.ml_stop_tol = to_double(key, value);
  } else if (key == "curve_floor") {
    cfg.curve_floor = to_double(key, value);
  } else if (key == "max_iterations") {
    cfg.max_iterations = to_int(key, value);
  } else if (key == "curve_max_iterations") {
    cfg.curve_max_iterations = to_int(key, value);
  } else if (key == "max_outer") {
    cfg.max_outer = to_int(key, value);
  } else if (key == "output") {
    cfg.output = value;
  } else if (key == "jobs") {
    const int j = to_int(key, value);
    if (j < 1) throw ConfigError("jobs must be at least 1");
    cfg.jobs = static_cast<unsigned>(j);
  } else if (key == "timing") {
    cfg.timing = to_bool(key, value);
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

/// Parses "key=value" lines; '#' starts a comment.
inline void apply_config_text(ExperimentConfig& cfg, const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
}

inline ExperimentConfig load_config(const std::string& path,
                                    const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  ExperimentConfig cfg;
  apply_config_text(cfg, buf.str());
  for (const auto& [k, v] : overrides) apply_setting(cfg, k, v);
  cfg.validate();
  return cfg;
}

struct ResultRow {
  BenchmarkExample example = BenchmarkExample::ex1;
  double beta = 0.0;
  double epsilon = 0.0;
  int h_exponent = 0;
  SolverKind solver = SolverKind::alm;
  int iterations = -1;
  bool converged = false;
  /// Final relative energy error (multilevel) or stop-criterion value (ALM).
  double final_error = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> min_step;
  /// Every accepted iterate decreased F^eps (backtracking rows).
  bool monotone = true;
  /// Symmetrized Bregman bound held at every outer step (ALM rows).
  bool bound_holds = true;
  double wall_ms = 0.0;
  std::string message;

  double h() const { return std::ldexp(1.0, -h_exponent); }
  auto key() const { return std::make_tuple(static_cast<int>(example), beta, epsilon, -h_exponent); }
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// Runs tasks[0..n) on up to `jobs` threads; each index runs exactly once.
template <class Body>
void run_pool(std::size_t n, unsigned jobs, Body&& body) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> threads;
  const unsigned t = static_cast<unsigned>(std::min<std::size_t>(jobs, n));
  for (unsigned w = 0; w < t; ++w)
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
}

struct Group {
  BenchmarkExample example;
  double beta;
  int h_exponent;
};

inline std::vector<Group> groups(const ExperimentConfig& cfg) {
  std::vector<Group> out;
  for (auto ex : cfg.examples)
    for (double b : cfg.beta)
      for (int k : cfg.h_exponents) out.push_back({ex, b, k});
  return out;
}

inline std::shared_ptr<const MeshHierarchy> hierarchy_for(int h_exponent) {
  return std::make_shared<const MeshHierarchy>(2, levels_for_exponent(h_exponent));
}

inline void sort_rows(std::vector<ResultRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) { return a.key() < b.key(); });
}

/// Symmetrized Bregman bound of the ALM theory: D_F^sym(u^(n+1), u_h) <=
/// eps/4 ||p^(n) - p_h||^2 with the mass-weighted l2 norm.
inline bool alm_bound_holds(const EnergyModel& model, const ALMResult& r, const MixedSolution& ref) {
  const double area = model.mesh().cell_area();
  for (std::size_t n = 0; n < r.u_history.size(); ++n) {
    const double lhs = model.sym_bregman(r.u_history[n], ref.u);
    const double rhs = model.epsilon() / 4.0 * area * (r.p_history[n] - ref.p).squaredNorm();
    if (lhs > rhs * (1.0 + 1e-10) + 1e-14) return false;
  }
  return true;
}

/// ALM outer-iteration counts over the (example, beta, epsilon, h) grid. One
/// mixed reference solve per (example, beta, h).
inline std::vector<ResultRow> cmd_alm_table(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto gs = groups(cfg);
  std::vector<std::vector<ResultRow>> out(gs.size());
  run_pool(gs.size(), cfg.jobs, [&](std::size_t gi) {
    const Group& g = gs[gi];
    const auto mh = hierarchy_for(g.h_exponent);
    const auto prob = benchmark_problem(g.example, g.beta);
    const EnergyModel base(mh, prob.data, 1.0);
    std::optional<MixedSolution> ref;
    std::string ref_error;
    try {
      ref = reference_mixed_solve(base);
    } catch (const std::exception& e) {
      ref_error = e.what();
    }
    for (double eps : cfg.epsilon) {
      ResultRow row{.example = g.example, .beta = g.beta, .epsilon = eps, .h_exponent = g.h_exponent};
      row.solver = SolverKind::alm;
      if (!ref) {
        row.message = ref_error;
        out[gi].push_back(row);
        continue;
      }
      try {
        ALMConfig ac;
        ac.max_outer = cfg.max_outer;
        ac.stop_tol = cfg.alm_stop_tol;
        ac.keep_trajectory = true;
        const ALMResult r = alm_solve(base.with_epsilon(eps), ac, *ref);
        row.converged = r.report.converged();
        row.iterations = row.converged ? r.report.iterations : -1;
        row.final_error = r.relative_error.empty() ? row.final_error : r.relative_error.back();
        row.bound_holds = alm_bound_holds(base.with_epsilon(eps), r, *ref);
        row.wall_ms = r.report.wall_ms;
      } catch (const std::exception& e) {
        row.message = e.what();
      }
      out[gi].push_back(row);
    }
  });
  std::vector<ResultRow> rows;
  for (auto& v : out) rows.insert(rows.end(), v.begin(), v.end());
  sort_rows(rows);
  return rows;
}

/// Multilevel iteration counts with the relative energy stop against the
/// reference minimum of F^eps. Beta = 0 cells use `linear_solver`.
inline std::vector<ResultRow> cmd_ml_table(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto gs = groups(cfg);
  std::vector<std::vector<ResultRow>> out(gs.size());
  const unsigned inner_workers = cfg.jobs > 1 ? 1u : 0u;
  run_pool(gs.size(), cfg.jobs, [&](std::size_t gi) {
    const Group& g = gs[gi];
    const auto mh = hierarchy_for(g.h_exponent);
    const MultilevelSpace space(mh);
    const auto prob = benchmark_problem(g.example, g.beta);
    const EnergyModel base(mh, prob.data, 1.0);
    for (double eps : cfg.epsilon) {
      const EnergyModel model = base.with_epsilon(eps);
      ResultRow row{.example = g.example, .beta = g.beta, .epsilon = eps, .h_exponent = g.h_exponent};
      row.solver = g.beta == 0.0 ? cfg.linear_solver : cfg.solver;
      try {
        const double f_star = reference_min_F_eps(model).energy;
        PSCResult r;
        if (row.solver == SolverKind::pcg) {
          PCGConfig pc;
          pc.max_iterations = cfg.max_iterations;
          pc.energy_stop_tol = cfg.ml_stop_tol;
          pc.quadratic_form_energy = true;
          pc.workers = inner_workers;
          r = ml_pcg_solve(model, space, pc, f_star);
        } else {
          PSCConfig pc;
          pc.max_iterations = cfg.max_iterations;
          pc.stop_tol = cfg.ml_stop_tol;
          pc.workers = inner_workers;
          if (row.solver == SolverKind::ml_fixed) {
            pc.tau = cfg.tau.front();
            r = psc_solve(model, space, pc, f_star);
          } else {
            pc.tau = cfg.tau0;
            r = psc_backtracking_solve(model, space, pc, f_star);
            row.min_step = min_step(r.report);
          }
        }
        row.converged = r.report.converged();
        row.iterations = row.converged ? r.report.iterations : -1;
        row.final_error = r.report.relative_energy_error.back();
        for (std::size_t n = 1; n < r.report.energy.size(); ++n)
          if (r.report.energy[n] > r.report.energy[n - 1]) row.monotone = false;
        if (row.solver == SolverKind::pcg) row.monotone = true;
        row.wall_ms = r.report.wall_ms;
        if (!row.converged) row.message = to_string(r.report.status);
      } catch (const std::exception& e) {
        row.message = e.what();
      }
      out[gi].push_back(row);
    }
  });
  std::vector<ResultRow> rows;
  for (auto& v : out) rows.insert(rows.end(), v.begin(), v.end());
  sort_rows(rows);
  return rows;
}

struct Curve {
  BenchmarkExample example = BenchmarkExample::ex1;
  double beta = 0.0;
  double epsilon = 0.0;
  int h_exponent = 0;
  SolverKind solver = SolverKind::ml_fixed;
  /// Fixed step, or tau^(0) for backtracking.
  double tau = 0.0;
  SolveStatus status = SolveStatus::max_iterations;
  std::vector<double> relative_error;
  std::vector<double> steps;
  double wall_ms = 0.0;

  bool diverged() const { return status == SolveStatus::diverged; }
  bool backtracking() const { return solver == SolverKind::ml_backtracking; }
  std::string file_name() const {
    std::string s = to_string(example) + "_beta" + format_number(beta) + "_h2-" + std::to_string(h_exponent) +
                    "_eps" + format_number(epsilon) + "_" + to_string(solver);
    if (!backtracking()) s += "_tau" + format_number(tau);
    return s + ".csv";
  }
};

/// Fixed-step curves for every tau plus the backtracking curve, per
/// (example, beta, epsilon, h) cell.
inline std::vector<Curve> cmd_curves(const ExperimentConfig& cfg) {
  cfg.validate();
  struct Task {
    BenchmarkExample example;
    double beta;
    double epsilon;
    int h_exponent;
  };
  std::vector<Task> tasks;
  for (auto ex : cfg.examples)
    for (double b : cfg.beta)
      for (int k : cfg.h_exponents)
        for (double e : cfg.epsilon) tasks.push_back({ex, b, e, k});
  std::vector<std::vector<Curve>> out(tasks.size());
  const unsigned inner_workers = cfg.jobs > 1 ? 1u : 0u;
  run_pool(tasks.size(), cfg.jobs, [&](std::size_t ti) {
    const Task& t = tasks[ti];
    const auto mh = hierarchy_for(t.h_exponent);
    const MultilevelSpace space(mh);
    const EnergyModel model(mh, benchmark_problem(t.example, t.beta).data, t.epsilon);
    const double f_star = reference_min_F_eps(model).energy;
    PSCConfig pc;
    pc.max_iterations = cfg.curve_max_iterations;
    pc.stop_tol = cfg.curve_floor;
    pc.workers = inner_workers;
    auto make = [&](SolverKind s, double tau, const PSCResult& r) {
      Curve c{.example = t.example, .beta = t.beta, .epsilon = t.epsilon, .h_exponent = t.h_exponent};
      c.solver = s;
      c.tau = tau;
      c.status = r.report.status;
      c.relative_error = r.report.relative_energy_error;
      c.steps = r.report.tau;
      c.wall_ms = r.report.wall_ms;
      return c;
    };
    for (double tau : cfg.tau) {
      pc.tau = tau;
      out[ti].push_back(make(SolverKind::ml_fixed, tau, psc_solve(model, space, pc, f_star)));
    }
    pc.tau = cfg.tau0;
    out[ti].push_back(make(SolverKind::ml_backtracking, cfg.tau0, psc_backtracking_solve(model, space, pc, f_star)));
  });
  std::vector<Curve> curves;
  for (auto& v : out) curves.insert(curves.end(), v.begin(), v.end());
  return curves;
}

/// Backtracking curve at or below every non-diverged fixed-step curve of the
/// same cell for all n >= from, wherever both are defined. Values below
/// `floor` count as converged and compare equal.
inline bool backtracking_dominates(const std::vector<Curve>& cell, int from, double floor) {
  const Curve* bt = nullptr;
  for (const auto& c : cell)
    if (c.backtracking()) bt = &c;
  if (bt == nullptr) return false;
  for (const auto& c : cell) {
    if (c.backtracking() || c.diverged()) continue;
    const std::size_t n_end = std::min(bt->relative_error.size(), c.relative_error.size());
    for (std::size_t n = static_cast<std::size_t>(from); n < n_end; ++n) {
      const double b = std::max(bt->relative_error[n], floor);
      const double f = std::max(c.relative_error[n], floor);
      if (b > f) return false;
    }
  }
  return true;
}

// CSV writers.

inline std::string alm_csv(const std::vector<ResultRow>& rows, bool timing) {
  std::ostringstream os;
  os << "example,beta,epsilon,h,iterations,converged" << (timing ? ",wall_ms" : "") << "\n";
  for (const auto& r : rows) {
    os << to_string(r.example) << ',' << format_number(r.beta) << ',' << format_number(r.epsilon) << ','
       << format_number(r.h()) << ',' << r.iterations << ',' << (r.converged ? "true" : "false");
    if (timing) os << ',' << format_number(std::round(r.wall_ms));
    os << "\n";
  }
  return os.str();
}

inline std::string ml_csv(const std::vector<ResultRow>& rows, bool timing) {
  std::ostringstream os;
  os << "example,beta,epsilon,h,solver,iterations,converged,final_energy_error,min_step"
     << (timing ? ",wall_ms" : "") << "\n";
  for (const auto& r : rows) {
    os << to_string(r.example) << ',' << format_number(r.beta) << ',' << format_number(r.epsilon) << ','
       << format_number(r.h()) << ',' << to_string(r.solver) << ',' << r.iterations << ','
       << (r.converged ? "true" : "false") << ',' << format_number(r.final_error) << ','
       << (r.min_step ? format_number(*r.min_step) : "");
    if (timing) os << ',' << format_number(std::round(r.wall_ms));
    os << "\n";
  }
  return os.str();
}

inline std::string curve_csv(const Curve& c) {
  std::ostringstream os;
  os << "n,relative_energy_error,tau\n";
  for (std::size_t n = 0; n < c.relative_error.size(); ++n)
    os << n << ',' << format_number(c.relative_error[n]) << ','
       << (n == 0 ? "" : format_number(c.steps[n - 1])) << "\n";
  return os.str();
}

inline std::string curves_summary_csv(const std::vector<Curve>& curves, bool timing) {
  std::ostringstream os;
  os << "example,beta,epsilon,h,solver,tau,iterations,status,final_energy_error,min_step,file"
     << (timing ? ",wall_ms" : "") << "\n";
  for (const auto& c : curves) {
    const double min_tau = c.steps.empty() ? std::nan("") : *std::min_element(c.steps.begin(), c.steps.end());
    os << to_string(c.example) << ',' << format_number(c.beta) << ',' << format_number(c.epsilon) << ','
       << format_number(std::ldexp(1.0, -c.h_exponent)) << ',' << to_string(c.solver) << ','
       << format_number(c.tau) << ',' << c.steps.size() << ',' << to_string(c.status) << ','
       << format_number(c.relative_error.back()) << ',' << (c.backtracking() ? format_number(min_tau) : "") << ','
       << c.file_name();
    if (timing) os << ',' << format_number(std::round(c.wall_ms));
    os << "\n";
  }
  return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace dfml::bench
