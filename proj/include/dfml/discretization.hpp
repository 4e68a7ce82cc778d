#pragma once

// Lowest-order Raviart-Thomas velocities and cellwise-constant pressures on
// the uniform grids of mesh.hpp.
//
// A velocity dof is the total flux of the field through its edge, using the
// global edge normals (+x on vertical edges, +y on horizontal edges). On a
// cell [x0,x0+h]x[y0,y0+h] with local coordinates (xi, eta) in [0,1]^2:
//   v_x = (F_left (1 - xi) + F_right xi) / h
//   v_y = (F_bottom (1 - eta) + F_top eta) / h
//   div v = (F_right - F_left + F_top - F_bottom) / h^2

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "dfml/mesh.hpp"
#include "dfml/numerics.hpp"

namespace dfml {

using Vec2 = Point;
using ScalarFunction = std::function<double(double, double)>;
using VectorFunction = std::function<Vec2(double, double)>;

/// Tensor quadrature on the reference square [0,1]^2; weights sum to 1 and are
/// scaled by the cell area at use.
struct QuadratureRule {
  std::vector<double> xi;
  std::vector<double> eta;
  std::vector<double> weight;

  std::size_t size() const { return weight.size(); }

  /// 3x3 Gauss-Legendre, exact for degree <= 5 in each direction.
  static QuadratureRule gauss3x3() {
    const auto g = gauss3();
    QuadratureRule r;
    for (int b = 0; b < 3; ++b)
      for (int a = 0; a < 3; ++a) {
        r.xi.push_back(g.first[a]);
        r.eta.push_back(g.first[b]);
        r.weight.push_back(g.second[a] * g.second[b]);
      }
    return r;
  }

  /// Composite 3-point Gauss on an m x m subdivision of the reference square.
  static QuadratureRule composite(int m) {
    const auto g = gauss3();
    QuadratureRule r;
    const double s = 1.0 / m;
    for (int bj = 0; bj < m; ++bj)
      for (int b = 0; b < 3; ++b)
        for (int ai = 0; ai < m; ++ai)
          for (int a = 0; a < 3; ++a) {
            r.xi.push_back((ai + g.first[a]) * s);
            r.eta.push_back((bj + g.first[b]) * s);
            r.weight.push_back(g.second[a] * g.second[b] * s * s);
          }
    return r;
  }

  /// Nodes and weights of the 3-point Gauss rule on [0,1].
  static std::pair<std::array<double, 3>, std::array<double, 3>> gauss3() {
    const double d = std::sqrt(15.0) / 10.0;
    return {{0.5 - d, 0.5, 0.5 + d}, {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0}};
  }
};

/// Values of the four local RT0 shape functions (left, right, bottom, top) at
/// a reference point, for a cell of side h. Left/right act on x, bottom/top on y.
inline std::array<double, 4> rt0_shape(double xi, double eta, double h) {
  return {(1.0 - xi) / h, xi / h, (1.0 - eta) / h, eta / h};
}

/// Divergence of each local shape function: -1, +1, -1, +1 over h^2.
inline std::array<double, 4> rt0_shape_div(double h) {
  const double s = 1.0 / (h * h);
  return {-s, s, -s, s};
}

inline Vec2 rt0_value(const LevelMesh& mesh, const Vector& flux, int cell, double xi, double eta) {
  const auto& e = mesh.cell(cell).edges;
  const auto s = rt0_shape(xi, eta, mesh.h());
  return {flux[e[0]] * s[0] + flux[e[1]] * s[1], flux[e[2]] * s[2] + flux[e[3]] * s[3]};
}

inline double rt0_cell_divergence(const LevelMesh& mesh, const Vector& flux, int cell) {
  const auto& e = mesh.cell(cell).edges;
  return (flux[e[1]] - flux[e[0]] + flux[e[3]] - flux[e[2]]) / mesh.cell_area();
}

/// Cellwise divergence of a velocity field.
inline Vector divergence(const LevelMesh& mesh, const Vector& flux) {
  Vector d(mesh.num_cells());
  for (int c = 0; c < mesh.num_cells(); ++c) d[c] = rt0_cell_divergence(mesh, flux, c);
  return d;
}

/// B : velocity dofs -> cellwise divergence values.
inline SparseMatrix divergence_matrix(const LevelMesh& mesh) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(4 * mesh.num_cells()));
  const double s = 1.0 / mesh.cell_area();
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto& e = mesh.cell(c).edges;
    t.emplace_back(c, e[0], -s);
    t.emplace_back(c, e[1], s);
    t.emplace_back(c, e[2], -s);
    t.emplace_back(c, e[3], s);
  }
  SparseMatrix b(mesh.num_cells(), mesh.num_edges());
  b.setFromTriplets(t.begin(), t.end());
  return b;
}

/// Embedding V_k -> V_{k+1} in flux coordinates. Coarse edge fluxes split in
/// halves onto their child edges; the fine edges inside a coarse cell carry a
/// quarter of the sum of the two opposite coarse fluxes.
inline SparseMatrix prolongation(const MeshHierarchy& mh, int k) {
  if (k < 1 || k >= mh.num_levels()) throw std::out_of_range("prolongation: level out of range");
  const LevelMesh& coarse = mh.level(k);
  const LevelMesh& fine = mh.level(k + 1);
  const int n = coarse.nx();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(4 * coarse.num_edges() + 8 * coarse.num_cells()));
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= n; ++i) {
      const int ce = coarse.vertical_edge(i, j);
      t.emplace_back(fine.vertical_edge(2 * i, 2 * j), ce, 0.5);
      t.emplace_back(fine.vertical_edge(2 * i, 2 * j + 1), ce, 0.5);
    }
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i < n; ++i) {
      const int ce = coarse.horizontal_edge(i, j);
      t.emplace_back(fine.horizontal_edge(2 * i, 2 * j), ce, 0.5);
      t.emplace_back(fine.horizontal_edge(2 * i + 1, 2 * j), ce, 0.5);
    }
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const auto& e = coarse.cell(coarse.cell_index(i, j)).edges;
      for (int r = 0; r < 2; ++r) {
        const int fv = fine.vertical_edge(2 * i + 1, 2 * j + r);
        t.emplace_back(fv, e[0], 0.25);
        t.emplace_back(fv, e[1], 0.25);
        const int fh = fine.horizontal_edge(2 * i + r, 2 * j + 1);
        t.emplace_back(fh, e[2], 0.25);
        t.emplace_back(fh, e[3], 0.25);
      }
    }
  SparseMatrix p(fine.num_edges(), coarse.num_edges());
  p.setFromTriplets(t.begin(), t.end());
  return p;
}

/// Composite embedding V_k -> V_J.
inline SparseMatrix prolongation_to_finest(const MeshHierarchy& mh, int k) {
  SparseMatrix p(mh.level(k).num_edges(), mh.level(k).num_edges());
  p.setIdentity();
  for (int l = k; l < mh.num_levels(); ++l) p = SparseMatrix(prolongation(mh, l) * p);
  return p;
}

/// Dofs of V_k^i: the four edges meeting at the patch vertex, followed by the
/// domain-boundary edges of the patch cells (in cell order, left/right/bottom/top).
inline std::vector<int> patch_subspace(const LevelMesh& mesh, const Patch& patch) {
  std::vector<int> dofs = {mesh.vertical_edge(patch.vi, patch.vj - 1),
                           mesh.vertical_edge(patch.vi, patch.vj),
                           mesh.horizontal_edge(patch.vi - 1, patch.vj),
                           mesh.horizontal_edge(patch.vi, patch.vj)};
  for (int c : patch.cells)
    for (int e : mesh.cell(c).edges)
      if (mesh.edge(e).on_boundary()) dofs.push_back(e);
  return dofs;
}

/// Cellwise quadrature mean of g (the L2 projection onto piecewise constants).
inline Vector l2_project_scalar(const ScalarFunction& g, const LevelMesh& mesh,
                                const QuadratureRule& rule = QuadratureRule::gauss3x3()) {
  Vector out(mesh.num_cells());
  const double h = mesh.h();
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const Cell& cell = mesh.cell(c);
    double s = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q)
      s += rule.weight[q] * g(cell.lower.x + rule.xi[q] * h, cell.lower.y + rule.eta[q] * h);
    out[c] = s;
  }
  return out;
}

/// Edge fluxes of u by 3-point Gauss quadrature along each edge.
inline Vector interpolate_velocity(const VectorFunction& u, const LevelMesh& mesh) {
  const auto g = QuadratureRule::gauss3();
  Vector out(mesh.num_edges());
  const double h = mesh.h();
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Edge& ed = mesh.edge(e);
    double s = 0.0;
    for (int q = 0; q < 3; ++q) {
      if (ed.orientation == EdgeOrientation::vertical)
        s += g.second[q] * u(ed.a.x, ed.a.y + g.first[q] * h).x;
      else
        s += g.second[q] * u(ed.a.x + g.first[q] * h, ed.a.y).y;
    }
    out[e] = s * h;
  }
  return out;
}

struct VelocityNorms {
  double l2 = 0.0;
  double l3 = 0.0;
  double div = 0.0;
  /// (||div v||^2 + ||v||_{L2}^2 + ||v||_{L3}^2)^{1/2}
  double x = 0.0;
};

inline VelocityNorms norms(const LevelMesh& mesh, const Vector& flux,
                           const QuadratureRule& rule = QuadratureRule::gauss3x3()) {
  std::vector<double> sq(static_cast<std::size_t>(mesh.num_cells()));
  std::vector<double> cu(sq.size());
  std::vector<double> dv(sq.size());
  const double area = mesh.cell_area();
  for (int c = 0; c < mesh.num_cells(); ++c) {
    double s2 = 0.0;
    double s3 = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec2 v = rt0_value(mesh, flux, c, rule.xi[q], rule.eta[q]);
      const double n2 = v.x * v.x + v.y * v.y;
      s2 += rule.weight[q] * n2;
      s3 += rule.weight[q] * n2 * std::sqrt(n2);
    }
    const double d = rt0_cell_divergence(mesh, flux, c);
    sq[c] = s2 * area;
    cu[c] = s3 * area;
    dv[c] = d * d * area;
  }
  VelocityNorms n;
  n.l2 = std::sqrt(pairwise_sum(sq));
  n.l3 = std::cbrt(pairwise_sum(cu));
  n.div = std::sqrt(pairwise_sum(dv));
  n.x = std::sqrt(n.div * n.div + n.l2 * n.l2 + n.l3 * n.l3);
  return n;
}

/// L2 norm of a cellwise-constant field.
inline double pressure_l2(const LevelMesh& mesh, const Vector& p) {
  return std::sqrt(mesh.cell_area() * p.squaredNorm());
}

/// L2 distance between the RT0 field `flux` and a smooth field u.
inline double velocity_l2_error(const LevelMesh& mesh, const Vector& flux, const VectorFunction& u,
                                const QuadratureRule& rule = QuadratureRule::gauss3x3()) {
  std::vector<double> part(static_cast<std::size_t>(mesh.num_cells()));
  const double h = mesh.h();
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const Cell& cell = mesh.cell(c);
    double s = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec2 v = rt0_value(mesh, flux, c, rule.xi[q], rule.eta[q]);
      const Vec2 w = u(cell.lower.x + rule.xi[q] * h, cell.lower.y + rule.eta[q] * h);
      s += rule.weight[q] * ((v.x - w.x) * (v.x - w.x) + (v.y - w.y) * (v.y - w.y));
    }
    part[c] = s * mesh.cell_area();
  }
  return std::sqrt(pairwise_sum(part));
}

}  // namespace dfml
