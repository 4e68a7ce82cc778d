#pragma once

#include <chrono>
#include <string>
#include <vector>

namespace dfml {

/// `stagnated`: the attainable energy decrease fell to rounding level before the stop rule was met.
enum class SolveStatus { converged, max_iterations, diverged, line_search_failed, stagnated, breakdown };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::diverged: return "diverged";
    case SolveStatus::line_search_failed: return "line_search_failed";
    case SolveStatus::stagnated: return "stagnated";
    case SolveStatus::breakdown: return "breakdown";
  }
  return "unknown";
}

/// Per-iteration history of an iterative solve. Index 0 of `energy` and
/// `residual` is the initial guess; `tau[n]` is the step used to reach iterate n+1.
struct SolveReport {
  int iterations = 0;
  SolveStatus status = SolveStatus::max_iterations;
  std::vector<double> energy;
  std::vector<double> tau;
  std::vector<double> residual;
  /// (F^eps(u^n) - F*) / |F*| when an oracle minimum is known
  std::vector<double> relative_energy_error;
  int unconverged_local_solves = 0;
  double wall_ms = 0.0;

  bool converged() const { return status == SolveStatus::converged; }
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace dfml
