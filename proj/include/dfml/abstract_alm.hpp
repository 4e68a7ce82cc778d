#pragma once

// Dense, small-dimensional augmented Lagrangian / proximal point machinery for
//   min F(v)  subject to  B v = g,
// used to check the ALM-PPA iterate identity and the ALM convergence bounds.
// Iterations:
//   ALM: u^(n+1) = argmin F(v) + (p^(n), Bv - g) + 1/(2 eps) ||Bv - g||^2
//        p^(n+1) = p^(n) + (B u^(n+1) - g) / eps
//   PPA: q^(n+1) = argmin F*(-B^T q) + (g, q) + eps/2 ||q - q^(n)||^2

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "dfml/numerics.hpp"

namespace dfml::abstract {

class NewtonFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConvexFunctional {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
};

struct GeneralProblem {
  std::string name;
  ConvexFunctional F;
  Matrix B;
  Vector g;

  int dim_v() const { return static_cast<int>(B.cols()); }
  int dim_w() const { return static_cast<int>(B.rows()); }

  void validate() const {
    if (dim_v() > 20 || dim_w() > 20) throw std::invalid_argument("GeneralProblem: dimensions are capped at 20");
    if (g.size() != dim_w()) throw std::invalid_argument("GeneralProblem: g has the wrong size");
    Eigen::FullPivLU<Matrix> lu(B);
    if (lu.rank() != dim_w()) throw std::invalid_argument("GeneralProblem: B must have full row rank");
  }
};

/// Damped Newton with Armijo backtracking for a smooth strictly convex function.
inline Vector newton_minimize(const std::function<double(const Vector&)>& f,
                              const std::function<Vector(const Vector&)>& grad,
                              const std::function<Matrix(const Vector&)>& hess, Vector x, double tol = 1e-12,
                              int max_iterations = 100) {
  double fx = f(x);
  for (int it = 0; it < max_iterations; ++it) {
    const Vector g = grad(x);
    if (g.norm() <= tol) return x;
    const Vector d = hess(x).ldlt().solve(-g);
    const double slope = g.dot(d);
    if (!(slope < 0.0)) throw NewtonFailure("newton_minimize: not a descent direction");
    double t = 1.0;
    Vector trial = x + d;
    double ft = f(trial);
    const bool rounding = -slope <= 1e-14 * (1.0 + std::abs(fx));
    int k = 0;
    while (!(ft <= fx + 1e-4 * t * slope) && !(rounding && t == 1.0)) {
      if (++k > 60) throw NewtonFailure("newton_minimize: line search failed");
      t *= 0.5;
      trial = x + t * d;
      ft = f(trial);
    }
    x = std::move(trial);
    fx = ft;
  }
  if (grad(x).norm() > std::max(tol, 1e-10)) throw NewtonFailure("newton_minimize: no convergence");
  return x;
}

struct ALMTrajectory {
  /// u^(1), ..., u^(n)
  std::vector<Vector> u;
  /// p^(0), ..., p^(n)
  std::vector<Vector> p;
};

/// `multiplier_sign` = +1 is the method; any other value exists to inject a
/// sign error in mutation tests.
inline ALMTrajectory alm_general(const GeneralProblem& prob, double eps, const Vector& p0, int n_steps,
                                 double multiplier_sign = 1.0) {
  if (!(eps > 0.0)) throw std::invalid_argument("alm_general: eps must be positive");
  ALMTrajectory tr;
  tr.p.push_back(p0);
  Vector u = Vector::Zero(prob.dim_v());
  const Matrix BtB = prob.B.transpose() * prob.B;
  for (int n = 0; n < n_steps; ++n) {
    const Vector p = tr.p.back();
    auto f = [&](const Vector& v) {
      const Vector r = prob.B * v - prob.g;
      return prob.F.value(v) + p.dot(r) + 0.5 / eps * r.squaredNorm();
    };
    auto grad = [&](const Vector& v) -> Vector {
      return prob.F.gradient(v) + prob.B.transpose() * (p + (prob.B * v - prob.g) / eps);
    };
    auto hess = [&](const Vector& v) -> Matrix { return prob.F.hessian(v) + BtB / eps; };
    u = newton_minimize(f, grad, hess, u);
    tr.u.push_back(u);
    tr.p.push_back(p + multiplier_sign * (prob.B * u - prob.g) / eps);
  }
  return tr;
}

struct ConjugateValue {
  double value = 0.0;
  /// the maximizer v*(w), which is also grad F*(w)
  Vector argsup;
};

/// F*(w) = sup_v (w, v) - F(v), by Newton on grad F(v) = w.
inline ConjugateValue conjugate(const ConvexFunctional& F, const Vector& w, const Vector& start) {
  auto f = [&](const Vector& v) { return F.value(v) - w.dot(v); };
  auto grad = [&](const Vector& v) -> Vector { return F.gradient(v) - w; };
  ConjugateValue out;
  out.argsup = newton_minimize(f, grad, F.hessian, start, 1e-13);
  out.value = w.dot(out.argsup) - F.value(out.argsup);
  return out;
}

/// Hessian of q -> F*(-B^T q): B (hess F(v*))^{-1} B^T.
inline Matrix dual_hessian(const GeneralProblem& prob, const Vector& q) {
  const ConjugateValue c = conjugate(prob.F, -prob.B.transpose() * q, Vector::Zero(prob.dim_v()));
  return prob.B * prob.F.hessian(c.argsup).ldlt().solve(prob.B.transpose());
}

inline std::vector<Vector> ppa_dual(const GeneralProblem& prob, double eps, const Vector& q0, int n_steps) {
  if (!(eps > 0.0)) throw std::invalid_argument("ppa_dual: eps must be positive");
  std::vector<Vector> qs{q0};
  Vector v_warm = Vector::Zero(prob.dim_v());
  for (int n = 0; n < n_steps; ++n) {
    const Vector qn = qs.back();
    auto phi = [&](const Vector& q) {
      const ConjugateValue c = conjugate(prob.F, -prob.B.transpose() * q, v_warm);
      return c.value + prob.g.dot(q) + 0.5 * eps * (q - qn).squaredNorm();
    };
    auto grad = [&](const Vector& q) -> Vector {
      const ConjugateValue c = conjugate(prob.F, -prob.B.transpose() * q, v_warm);
      return -prob.B * c.argsup + prob.g + eps * (q - qn);
    };
    auto hess = [&](const Vector& q) -> Matrix {
      return dual_hessian(prob, q) + eps * Matrix::Identity(prob.dim_w(), prob.dim_w());
    };
    const Vector q = newton_minimize(phi, grad, hess, qn, 1e-12);
    v_warm = conjugate(prob.F, -prob.B.transpose() * q, v_warm).argsup;
    qs.push_back(q);
  }
  return qs;
}

struct KKTSolution {
  Vector u;
  Vector p;
};

/// grad F(u) + B^T p = 0, B u = g by Newton on the dense KKT system.
inline KKTSolution solve_kkt(const GeneralProblem& prob, double tol = 1e-13, int max_iterations = 100) {
  const int n = prob.dim_v();
  const int m = prob.dim_w();
  KKTSolution s{Vector::Zero(n), Vector::Zero(m)};
  for (int it = 0; it < max_iterations; ++it) {
    Vector r(n + m);
    r.head(n) = prob.F.gradient(s.u) + prob.B.transpose() * s.p;
    r.tail(m) = prob.B * s.u - prob.g;
    if (r.norm() <= tol) return s;
    Matrix A = Matrix::Zero(n + m, n + m);
    A.topLeftCorner(n, n) = prob.F.hessian(s.u);
    A.topRightCorner(n, m) = prob.B.transpose();
    A.bottomLeftCorner(m, n) = prob.B;
    const Vector d = A.fullPivLu().solve(-r);
    double t = 1.0;
    for (int k = 0; k < 40; ++k) {
      Vector rn(n + m);
      const Vector ut = s.u + t * d.head(n);
      const Vector pt = s.p + t * d.tail(m);
      rn.head(n) = prob.F.gradient(ut) + prob.B.transpose() * pt;
      rn.tail(m) = prob.B * ut - prob.g;
      if (rn.norm() < r.norm() || r.norm() < 1e-10) break;
      t *= 0.5;
    }
    s.u += t * d.head(n);
    s.p += t * d.tail(m);
  }
  Vector r(n + m);
  r.head(n) = prob.F.gradient(s.u) + prob.B.transpose() * s.p;
  r.tail(m) = prob.B * s.u - prob.g;
  if (r.norm() > 1e-10) throw NewtonFailure("solve_kkt: no convergence");
  return s;
}

/// Local strong-convexity modulus of q -> F*(-B^T q): smallest eigenvalue of the
/// dual Hessian sampled on the segments from each iterate to the solution.
inline double estimate_mu(const GeneralProblem& prob, const std::vector<Vector>& iterates, const Vector& p,
                          int samples_per_segment = 8) {
  double mu = std::numeric_limits<double>::infinity();
  auto probe = [&](const Vector& q) {
    const Eigen::SelfAdjointEigenSolver<Matrix> es(dual_hessian(prob, q));
    mu = std::min(mu, es.eigenvalues().minCoeff());
  };
  probe(p);
  for (const Vector& q : iterates)
    for (int s = 0; s < samples_per_segment; ++s) probe(q + (p - q) * (static_cast<double>(s) / samples_per_segment));
  return mu;
}

inline double sym_bregman(const ConvexFunctional& F, const Vector& v, const Vector& w) {
  return (F.gradient(v) - F.gradient(w)).dot(v - w);
}

struct BoundCheck {
  int step = 0;
  double contraction_lhs = 0.0;
  double contraction_rhs = 0.0;
  double bregman_lhs = 0.0;
  double bregman_rhs = 0.0;
  bool holds() const {
    const double slack = 1e-12;
    return contraction_lhs <= contraction_rhs + slack && bregman_lhs <= bregman_rhs + slack;
  }
};

struct BoundReport {
  double mu_hat = 0.0;
  std::vector<BoundCheck> steps;
  bool all_hold() const {
    return std::all_of(steps.begin(), steps.end(), [](const BoundCheck& b) { return b.holds(); });
  }
  /// Smallest rhs - lhs over both bounds and all steps.
  double min_margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& b : steps)
      m = std::min({m, b.contraction_rhs - b.contraction_lhs, b.bregman_rhs - b.bregman_lhs});
    return m;
  }
};

/// Per step: ||p^(n+1) - p|| <= eps/(mu+eps) ||p^(n) - p|| and
/// D_F^sym(u^(n+1), u) <= mu eps^2/(mu+eps)^2 ||p^(n) - p||^2 (eps <= mu)
///                     <= eps/4 ||p^(n) - p||^2               (eps > mu).
inline BoundReport verify_alm_bounds(const GeneralProblem& prob, double eps, const ALMTrajectory& tr,
                               const KKTSolution& exact, double mu_hat) {
  BoundReport rep;
  rep.mu_hat = mu_hat;
  for (std::size_t n = 0; n + 1 < tr.p.size(); ++n) {
    BoundCheck b;
    b.step = static_cast<int>(n);
    const double en = (tr.p[n] - exact.p).norm();
    b.contraction_lhs = (tr.p[n + 1] - exact.p).norm();
    b.contraction_rhs = eps / (mu_hat + eps) * en;
    b.bregman_lhs = sym_bregman(prob.F, tr.u[n], exact.u);
    b.bregman_rhs = eps <= mu_hat ? mu_hat * eps * eps / ((mu_hat + eps) * (mu_hat + eps)) * en * en
                                  : eps / 4.0 * en * en;
    rep.steps.push_back(b);
  }
  return rep;
}

// Test instances.

/// F(v) = 1/2 v^T A v + 1/4 sum c_i v_i^4 - l.v
inline ConvexFunctional quartic_functional(Matrix A, Vector c, Vector l) {
  ConvexFunctional F;
  F.value = [A, c, l](const Vector& v) {
    return 0.5 * v.dot(A * v) + 0.25 * (c.array() * v.array().pow(4)).sum() - l.dot(v);
  };
  F.gradient = [A, c, l](const Vector& v) -> Vector {
    return A * v + (c.array() * v.array().cube()).matrix() - l;
  };
  F.hessian = [A, c](const Vector& v) -> Matrix {
    Matrix H = A;
    H.diagonal() += (3.0 * c.array() * v.array().square()).matrix();
    return H;
  };
  return F;
}

/// F(v) = 1/2 ||v||^2, B = [1 1], g = 1; the solution is (1/2, 1/2).
inline GeneralProblem quadratic_instance() {
  GeneralProblem p;
  p.name = "quadratic";
  p.F = quartic_functional(Matrix::Identity(2, 2), Vector::Zero(2), Vector::Zero(2));
  p.B = Matrix::Ones(1, 2);
  p.g = Vector::Ones(1);
  return p;
}

/// F(v) = 1/2 ||v||^2 + 1/4 sum v_i^4 with a seeded random B and g.
inline GeneralProblem quartic_instance(int n, int m, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  GeneralProblem p;
  p.name = "quartic n=" + std::to_string(n) + " m=" + std::to_string(m);
  p.F = quartic_functional(Matrix::Identity(n, n), Vector::Ones(n), Vector::Zero(n));
  p.B = Matrix(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) p.B(i, j) = nd(rng);
  p.g = Vector(m);
  for (int i = 0; i < m; ++i) p.g[i] = nd(rng);
  return p;
}

/// SPD quadratic part, nonuniform quartic weights and a linear term.
inline GeneralProblem weighted_quartic_instance(int n, int m, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.5, 2.0);
  Matrix R(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) R(i, j) = nd(rng) / std::sqrt(static_cast<double>(n));
  const Matrix A = R.transpose() * R + 0.5 * Matrix::Identity(n, n);
  Vector c(n), l(n);
  for (int i = 0; i < n; ++i) {
    c[i] = ud(rng);
    l[i] = nd(rng);
  }
  GeneralProblem p;
  p.name = "weighted quartic n=" + std::to_string(n) + " m=" + std::to_string(m);
  p.F = quartic_functional(A, c, l);
  p.B = Matrix(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) p.B(i, j) = nd(rng);
  p.g = Vector(m);
  for (int i = 0; i < m; ++i) p.g[i] = nd(rng);
  return p;
}

}  // namespace dfml::abstract
