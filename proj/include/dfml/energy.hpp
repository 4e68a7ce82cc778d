#pragma once

// The Darcy-Forchheimer energy
//   F(v) = (mu/2rho) int K^{-1}|v|^2 + (beta/3rho) int |v|^3 - int f.v
// and the augmented-Lagrangian energy
//   F^eps(v; q) = 1/2 int (div v - g_h)^2 + eps [F(v) - int q div v]
//              = F0(v) + eps F1(v),
// evaluated on the finest level of a hierarchy with one shared quadrature rule.

#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "dfml/discretization.hpp"
#include "dfml/problem.hpp"

namespace dfml {

/// Velocity values at every quadrature point of the finest mesh (cell-major)
/// plus the cellwise divergence.
struct QuadValues {
  std::vector<Vec2> v;
  std::vector<double> div;
};

class EnergyModel {
 public:
  /// Regularization of |v| in the Forchheimer Hessian block only.
  static constexpr double hessian_delta = 1e-12;

  EnergyModel(std::shared_ptr<const MeshHierarchy> hierarchy, const ProblemData& data, double epsilon,
              QuadratureRule rule = QuadratureRule::gauss3x3())
      : epsilon_(epsilon) {
    data.validate();
    if (!(epsilon > 0.0)) throw std::invalid_argument("EnergyModel: epsilon must be positive");
    auto s = std::make_shared<Shared>();
    s->hierarchy = std::move(hierarchy);
    s->rule = std::move(rule);
    s->mu = data.mu;
    s->rho = data.rho;
    s->K = data.K;
    s->beta = data.beta;
    const LevelMesh& mesh = s->hierarchy->finest();
    const int nq = static_cast<int>(s->rule.size());
    s->f_qp.resize(static_cast<std::size_t>(mesh.num_cells() * nq));
    const double h = mesh.h();
    for (int c = 0; c < mesh.num_cells(); ++c) {
      const Cell& cell = mesh.cell(c);
      for (int q = 0; q < nq; ++q)
        s->f_qp[static_cast<std::size_t>(c * nq + q)] =
            data.f(cell.lower.x + s->rule.xi[q] * h, cell.lower.y + s->rule.eta[q] * h);
    }
    // g_h is always the Gauss 3x3 cell mean, independent of the energy rule.
    s->g_h = l2_project_scalar(data.g, mesh);
    shared_ = std::move(s);
    q_ = Vector::Zero(mesh.num_cells());
  }

  /// Same data and epsilon, multiplier q_h replaced.
  EnergyModel with_multiplier(Vector q) const {
    if (q.size() != mesh().num_cells()) throw std::invalid_argument("with_multiplier: size mismatch");
    EnergyModel m = *this;
    m.q_ = std::move(q);
    return m;
  }

  EnergyModel with_epsilon(double epsilon) const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("EnergyModel: epsilon must be positive");
    EnergyModel m = *this;
    m.epsilon_ = epsilon;
    return m;
  }

  const MeshHierarchy& hierarchy() const { return *shared_->hierarchy; }
  std::shared_ptr<const MeshHierarchy> hierarchy_ptr() const { return shared_->hierarchy; }
  const LevelMesh& mesh() const { return shared_->hierarchy->finest(); }
  const QuadratureRule& rule() const { return shared_->rule; }
  double epsilon() const { return epsilon_; }
  const Vector& multiplier() const { return q_; }
  const Vector& g_h() const { return shared_->g_h; }
  const std::vector<Vec2>& f_at_quadrature() const { return shared_->f_qp; }
  int num_dofs() const { return mesh().num_edges(); }

  /// mu/(rho K)
  double darcy_coefficient() const { return shared_->mu / (shared_->rho * shared_->K); }
  /// beta/rho
  double forchheimer_coefficient() const { return shared_->beta / shared_->rho; }
  double beta() const { return shared_->beta; }
  double mu() const { return shared_->mu; }
  double rho() const { return shared_->rho; }
  double K() const { return shared_->K; }

  QuadValues evaluate(const Vector& v) const {
    const LevelMesh& m = mesh();
    const QuadratureRule& r = rule();
    const int nq = static_cast<int>(r.size());
    QuadValues out;
    out.v.resize(static_cast<std::size_t>(m.num_cells() * nq));
    out.div.resize(static_cast<std::size_t>(m.num_cells()));
    for (int c = 0; c < m.num_cells(); ++c) {
      for (int q = 0; q < nq; ++q)
        out.v[static_cast<std::size_t>(c * nq + q)] = rt0_value(m, v, c, r.xi[q], r.eta[q]);
      out.div[c] = rt0_cell_divergence(m, v, c);
    }
    return out;
  }

  double F(const Vector& v) const {
    const double a = darcy_coefficient();
    const double b = forchheimer_coefficient();
    return cell_sum(v, [&](int c, const Vec2* vq, double) {
      return coercive_integrand(c, vq, a, b);
    });
  }

  /// 1/2 int (div v - g_h)^2, exact for cellwise constants.
  double F0(const Vector& v) const {
    const LevelMesh& m = mesh();
    std::vector<double> part(static_cast<std::size_t>(m.num_cells()));
    for (int c = 0; c < m.num_cells(); ++c) {
      const double r = rt0_cell_divergence(m, v, c) - g_h()[c];
      part[c] = 0.5 * m.cell_area() * r * r;
    }
    return pairwise_sum(part);
  }

  /// F(v) - int q_h div v
  double F1(const Vector& v) const {
    const LevelMesh& m = mesh();
    std::vector<double> part(static_cast<std::size_t>(m.num_cells()));
    for (int c = 0; c < m.num_cells(); ++c) part[c] = m.cell_area() * q_[c] * rt0_cell_divergence(m, v, c);
    return F(v) - pairwise_sum(part);
  }

  /// F^eps assembled in one pass with every term integrated at the quadrature
  /// points (an independent path from F0 + eps F1).
  double F_eps(const Vector& v) const {
    const LevelMesh& m = mesh();
    const QuadratureRule& r = rule();
    const int nq = static_cast<int>(r.size());
    const double a = darcy_coefficient();
    const double b = forchheimer_coefficient();
    const double area = m.cell_area();
    std::vector<double> part(static_cast<std::size_t>(m.num_cells()));
    for (int c = 0; c < m.num_cells(); ++c) {
      const double d = rt0_cell_divergence(m, v, c);
      const double res = d - g_h()[c];
      double s = 0.0;
      for (int q = 0; q < nq; ++q) {
        const Vec2 vq = rt0_value(m, v, c, r.xi[q], r.eta[q]);
        const Vec2 f = shared_->f_qp[static_cast<std::size_t>(c * nq + q)];
        const double n2 = vq.x * vq.x + vq.y * vq.y;
        const double coercive = 0.5 * a * n2 + b / 3.0 * n2 * std::sqrt(n2) - (f.x * vq.x + f.y * vq.y);
        s += r.weight[q] * (0.5 * res * res + epsilon_ * (coercive - q_[c] * d));
      }
      part[c] = s * area;
    }
    return pairwise_sum(part);
  }

  /// Gradient of s0 F0 + sF F - sq int q div v with respect to the dofs.
  Vector gradient(const Vector& v, double s0, double sF, double sq) const {
    const LevelMesh& m = mesh();
    const QuadratureRule& r = rule();
    const int nq = static_cast<int>(r.size());
    const double a = darcy_coefficient();
    const double b = forchheimer_coefficient();
    const double h = m.h();
    const double area = m.cell_area();
    const auto dphi = rt0_shape_div(h);
    Vector g = Vector::Zero(m.num_edges());
    for (int c = 0; c < m.num_cells(); ++c) {
      const auto& e = m.cell(c).edges;
      const double d = rt0_cell_divergence(m, v, c);
      const double div_coef = area * (s0 * (d - g_h()[c]) - sq * q_[c]);
      std::array<double, 4> loc{};
      for (int s = 0; s < 4; ++s) loc[s] = div_coef * dphi[s];
      if (sF != 0.0) {
        for (int q = 0; q < nq; ++q) {
          const Vec2 vq = rt0_value(m, v, c, r.xi[q], r.eta[q]);
          const Vec2 f = shared_->f_qp[static_cast<std::size_t>(c * nq + q)];
          const double nv = std::sqrt(vq.x * vq.x + vq.y * vq.y);
          const double k = a + b * nv;
          const double wx = sF * r.weight[q] * area * (k * vq.x - f.x);
          const double wy = sF * r.weight[q] * area * (k * vq.y - f.y);
          const auto phi = rt0_shape(r.xi[q], r.eta[q], h);
          loc[0] += wx * phi[0];
          loc[1] += wx * phi[1];
          loc[2] += wy * phi[2];
          loc[3] += wy * phi[3];
        }
      }
      for (int s = 0; s < 4; ++s) g[e[s]] += loc[s];
    }
    return g;
  }

  Vector grad_F_eps(const Vector& v) const { return gradient(v, 1.0, epsilon_, epsilon_); }
  Vector grad_F(const Vector& v) const { return gradient(v, 0.0, 1.0, 0.0); }
  Vector grad_F0(const Vector& v) const { return gradient(v, 1.0, 0.0, 0.0); }
  Vector grad_F1(const Vector& v) const { return gradient(v, 0.0, 1.0, 1.0); }

  /// Hessian of s0 F0 + sF F. The Forchheimer block is
  /// (beta/rho)(|v| I + v v^T / max(|v|, delta)) at each quadrature point.
  SparseMatrix hessian(const Vector& v, double s0, double sF) const {
    const LevelMesh& m = mesh();
    const QuadratureRule& r = rule();
    const int nq = static_cast<int>(r.size());
    const double a = darcy_coefficient();
    const double b = forchheimer_coefficient();
    const double h = m.h();
    const double area = m.cell_area();
    const auto dphi = rt0_shape_div(h);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(16 * m.num_cells()));
    for (int c = 0; c < m.num_cells(); ++c) {
      const auto& e = m.cell(c).edges;
      double loc[4][4];
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) loc[i][j] = s0 * area * dphi[i] * dphi[j];
      for (int q = 0; q < nq && sF != 0.0; ++q) {
        const Vec2 vq = rt0_value(m, v, c, r.xi[q], r.eta[q]);
        const double nv = std::sqrt(vq.x * vq.x + vq.y * vq.y);
        const double inv = b / std::max(nv, hessian_delta);
        const double w = sF * r.weight[q] * area;
        const double hxx = a + b * nv + inv * vq.x * vq.x;
        const double hyy = a + b * nv + inv * vq.y * vq.y;
        const double hxy = inv * vq.x * vq.y;
        const auto phi = rt0_shape(r.xi[q], r.eta[q], h);
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) {
            loc[i][j] += w * hxx * phi[i] * phi[j];
            loc[2 + i][2 + j] += w * hyy * phi[2 + i] * phi[2 + j];
            loc[i][2 + j] += w * hxy * phi[i] * phi[2 + j];
            loc[2 + j][i] += w * hxy * phi[i] * phi[2 + j];
          }
      }
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) t.emplace_back(e[i], e[j], loc[i][j]);
    }
    SparseMatrix H(m.num_edges(), m.num_edges());
    H.setFromTriplets(t.begin(), t.end());
    return H;
  }

  SparseMatrix hess_F_eps(const Vector& v) const { return hessian(v, 1.0, epsilon_); }
  SparseMatrix hess_F(const Vector& v) const { return hessian(v, 0.0, 1.0); }

  /// Bregman divergence of F0: 1/2 ||div w||^2, independent of v.
  double d0(const Vector& w, const Vector& /*v*/) const {
    return 0.5 * std::pow(norms(mesh(), w, rule()).div, 2);
  }

  /// Bregman divergence of F1 at v in direction w.
  double d1(const Vector& w, const Vector& v) const {
    return F1(v + w) - F1(v) - grad_F1(v).dot(w);
  }

  /// Bregman divergence of F at v in direction w.
  double bregman_F(const Vector& w, const Vector& v) const { return F(v + w) - F(v) - grad_F(v).dot(w); }

  /// <grad F(v) - grad F(w), v - w>
  double sym_bregman(const Vector& v, const Vector& w) const { return (grad_F(v) - grad_F(w)).dot(v - w); }

  /// ||div v - g_h||_{L2}
  double constraint_residual(const Vector& v) const {
    const Vector r = divergence(mesh(), v) - g_h();
    return pressure_l2(mesh(), r);
  }

 private:
  struct Shared {
    std::shared_ptr<const MeshHierarchy> hierarchy;
    QuadratureRule rule;
    double mu = 1.0;
    double rho = 1.0;
    double K = 1.0;
    double beta = 0.0;
    std::vector<Vec2> f_qp;
    Vector g_h;
  };

  double coercive_integrand(int c, const Vec2* vq, double a, double b) const {
    const QuadratureRule& r = rule();
    const int nq = static_cast<int>(r.size());
    double s = 0.0;
    for (int q = 0; q < nq; ++q) {
      const Vec2 f = shared_->f_qp[static_cast<std::size_t>(c * nq + q)];
      const double n2 = vq[q].x * vq[q].x + vq[q].y * vq[q].y;
      s += r.weight[q] * (0.5 * a * n2 + b / 3.0 * n2 * std::sqrt(n2) - (f.x * vq[q].x + f.y * vq[q].y));
    }
    return s * mesh().cell_area();
  }

  template <typename CellTerm>
  double cell_sum(const Vector& v, CellTerm&& term) const {
    const LevelMesh& m = mesh();
    const QuadratureRule& r = rule();
    const int nq = static_cast<int>(r.size());
    std::vector<Vec2> vq(static_cast<std::size_t>(nq));
    std::vector<double> part(static_cast<std::size_t>(m.num_cells()));
    for (int c = 0; c < m.num_cells(); ++c) {
      for (int q = 0; q < nq; ++q) vq[q] = rt0_value(m, v, c, r.xi[q], r.eta[q]);
      part[c] = term(c, vq.data(), rt0_cell_divergence(m, v, c));
    }
    return pairwise_sum(part);
  }

  std::shared_ptr<const Shared> shared_;
  double epsilon_;
  Vector q_;
};

}  // namespace dfml
