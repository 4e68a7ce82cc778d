#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "dfml/discretization.hpp"

namespace dfml {

/// Coefficients of the Darcy-Forchheimer law
///   (mu/rho) K^{-1} u + (beta/rho) |u| u + grad p = f,   div u = g,
/// with scalar permeability K and p = 0 on the boundary.
struct ProblemData {
  double mu = 1.0;
  double rho = 1.0;
  double K = 1.0;
  double beta = 0.0;
  VectorFunction f = [](double, double) { return Vec2{0.0, 0.0}; };
  ScalarFunction g = [](double, double) { return 0.0; };

  void validate() const {
    if (!(mu > 0.0) || !(rho > 0.0) || !(K > 0.0))
      throw std::invalid_argument("ProblemData: mu, rho and K must be positive");
    if (!(beta >= 0.0)) throw std::invalid_argument("ProblemData: beta must be nonnegative");
  }
};

enum class BenchmarkExample { ex1, ex2 };

inline std::string to_string(BenchmarkExample e) { return e == BenchmarkExample::ex1 ? "ex1" : "ex2"; }

inline BenchmarkExample parse_example(const std::string& s) {
  if (s == "ex1" || s == "1") return BenchmarkExample::ex1;
  if (s == "ex2" || s == "2") return BenchmarkExample::ex2;
  throw std::invalid_argument("unknown example '" + s + "' (expected ex1 or ex2)");
}

/// Manufactured problem with known velocity and pressure.
struct ManufacturedProblem {
  ProblemData data;
  VectorFunction u_exact;
  ScalarFunction p_exact;
};

/// The two benchmarks with mu = rho = K = 1 (overridable) and Forchheimer
/// coefficient beta.
///   ex1: u = (e^x sin y, e^x cos y), p = xy(1-x)(1-y), g = 0
///   ex2: u = (x e^y, y e^x), p = sin(pi x) sin(pi y), g = e^x + e^y
inline ManufacturedProblem benchmark_problem(BenchmarkExample which, double beta, double mu = 1.0,
                                             double rho = 1.0, double K = 1.0) {
  ManufacturedProblem m;
  m.data.mu = mu;
  m.data.rho = rho;
  m.data.K = K;
  m.data.beta = beta;
  const double lin = mu / (rho * K);
  const double nl = beta / rho;
  if (which == BenchmarkExample::ex1) {
    m.u_exact = [](double x, double y) { return Vec2{std::exp(x) * std::sin(y), std::exp(x) * std::cos(y)}; };
    m.p_exact = [](double x, double y) { return x * y * (1.0 - x) * (1.0 - y); };
    m.data.f = [lin, nl](double x, double y) {
      const double ex = std::exp(x);
      const double c = lin + nl * ex;
      return Vec2{c * ex * std::sin(y) + y * (1.0 - 2.0 * x) * (1.0 - y),
                  c * ex * std::cos(y) + x * (1.0 - x) * (1.0 - 2.0 * y)};
    };
    m.data.g = [](double, double) { return 0.0; };
  } else {
    constexpr double pi = std::numbers::pi;
    m.u_exact = [](double x, double y) { return Vec2{x * std::exp(y), y * std::exp(x)}; };
    m.p_exact = [](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); };
    m.data.f = [lin, nl](double x, double y) {
      const double ux = x * std::exp(y);
      const double uy = y * std::exp(x);
      const double c = lin + nl * std::sqrt(ux * ux + uy * uy);
      return Vec2{c * ux + pi * std::cos(pi * x) * std::sin(pi * y),
                  c * uy + pi * std::sin(pi * x) * std::cos(pi * y)};
    };
    m.data.g = [](double x, double y) { return std::exp(x) + std::exp(y); };
  }
  return m;
}

}  // namespace dfml
