#pragma once

// Nested uniform rectangular meshes of the unit square and the vertex-patch
// topology used by the multilevel space decomposition.
//
// Indexing on a level with n cells per direction (h = 1/n):
//   cell (i,j)             -> j*n + i
//   vertical edge (i,j)    -> j*(n+1) + i            x = i*h, y in (j*h, (j+1)*h)
//   horizontal edge (i,j)  -> n*(n+1) + j*n + i      y = j*h, x in (i*h, (i+1)*h)
//   vertex (i,j)           -> j*(n+1) + i
// Vertical edges carry the normal +x, horizontal edges the normal +y.

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dfml {

enum class EdgeOrientation { vertical, horizontal };

/// Local position of an edge inside a cell.
enum class CellSide { left = 0, right = 1, bottom = 2, top = 3 };

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Cell {
  int i = 0;
  int j = 0;
  /// left, right, bottom, top
  std::array<int, 4> edges{};
  Point lower;
  Point upper;
};

struct Edge {
  EdgeOrientation orientation = EdgeOrientation::vertical;
  Point a;
  Point b;
  /// Cell on the negative side of the normal, then the positive side; -1 if outside.
  std::array<int, 2> cells{-1, -1};
  bool on_boundary() const { return cells[0] < 0 || cells[1] < 0; }
  int cell_count() const { return (cells[0] >= 0) + (cells[1] >= 0); }
};

struct Vertex {
  Point p;
  bool boundary = false;
};

struct Patch {
  int level = 0;
  /// Index of the internal vertex x_k^i in the level's vertex numbering.
  int vertex = 0;
  int vi = 0;
  int vj = 0;
  /// Cells touching the vertex, ordered (vi-1,vj-1), (vi,vj-1), (vi-1,vj), (vi,vj).
  std::array<int, 4> cells{};
  Point lower;
  Point upper;
};

class LevelMesh {
 public:
  LevelMesh(int level, int n) : level_(level), n_(n) {
    if (n < 1) throw std::invalid_argument("LevelMesh: need at least one cell per direction");
    build();
  }

  int level() const { return level_; }
  int nx() const { return n_; }
  int ny() const { return n_; }
  /// Exact: n is a power of two times n0, so 1/n is dyadic when n0 is.
  double h() const { return 1.0 / n_; }
  double cell_area() const { return h() * h(); }

  int num_cells() const { return n_ * n_; }
  int num_edges() const { return 2 * n_ * (n_ + 1); }
  int num_vertical_edges() const { return n_ * (n_ + 1); }
  int num_vertices() const { return (n_ + 1) * (n_ + 1); }
  int num_internal_vertices() const { return (n_ - 1) * (n_ - 1); }

  int cell_index(int i, int j) const { return j * n_ + i; }
  int vertical_edge(int i, int j) const { return j * (n_ + 1) + i; }
  int horizontal_edge(int i, int j) const { return n_ * (n_ + 1) + j * n_ + i; }
  int vertex_index(int i, int j) const { return j * (n_ + 1) + i; }

  const std::vector<Cell>& cells() const { return cells_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Vertex>& vertices() const { return vertices_; }
  const Cell& cell(int c) const { return cells_[c]; }
  const Edge& edge(int e) const { return edges_[e]; }

  /// One patch per internal vertex, in vertex order.
  std::vector<Patch> patches() const {
    std::vector<Patch> out;
    out.reserve(static_cast<std::size_t>(num_internal_vertices()));
    for (int vj = 1; vj < n_; ++vj)
      for (int vi = 1; vi < n_; ++vi) {
        Patch p;
        p.level = level_;
        p.vertex = vertex_index(vi, vj);
        p.vi = vi;
        p.vj = vj;
        p.cells = {cell_index(vi - 1, vj - 1), cell_index(vi, vj - 1), cell_index(vi - 1, vj),
                   cell_index(vi, vj)};
        p.lower = {(vi - 1) * h(), (vj - 1) * h()};
        p.upper = {(vi + 1) * h(), (vj + 1) * h()};
        out.push_back(p);
      }
    return out;
  }

 private:
  void build() {
    const double hh = h();
    cells_.resize(static_cast<std::size_t>(num_cells()));
    edges_.resize(static_cast<std::size_t>(num_edges()));
    vertices_.resize(static_cast<std::size_t>(num_vertices()));

    for (int j = 0; j < n_; ++j)
      for (int i = 0; i < n_; ++i) {
        Cell& c = cells_[cell_index(i, j)];
        c.i = i;
        c.j = j;
        c.edges = {vertical_edge(i, j), vertical_edge(i + 1, j), horizontal_edge(i, j),
                   horizontal_edge(i, j + 1)};
        c.lower = {i * hh, j * hh};
        c.upper = {(i + 1) * hh, (j + 1) * hh};
      }

    for (int j = 0; j < n_; ++j)
      for (int i = 0; i <= n_; ++i) {
        Edge& e = edges_[vertical_edge(i, j)];
        e.orientation = EdgeOrientation::vertical;
        e.a = {i * hh, j * hh};
        e.b = {i * hh, (j + 1) * hh};
        e.cells = {i > 0 ? cell_index(i - 1, j) : -1, i < n_ ? cell_index(i, j) : -1};
      }
    for (int j = 0; j <= n_; ++j)
      for (int i = 0; i < n_; ++i) {
        Edge& e = edges_[horizontal_edge(i, j)];
        e.orientation = EdgeOrientation::horizontal;
        e.a = {i * hh, j * hh};
        e.b = {(i + 1) * hh, j * hh};
        e.cells = {j > 0 ? cell_index(i, j - 1) : -1, j < n_ ? cell_index(i, j) : -1};
      }

    for (int j = 0; j <= n_; ++j)
      for (int i = 0; i <= n_; ++i) {
        Vertex& v = vertices_[vertex_index(i, j)];
        v.p = {i * hh, j * hh};
        v.boundary = i == 0 || j == 0 || i == n_ || j == n_;
      }
  }

  int level_;
  int n_;
  std::vector<Cell> cells_;
  std::vector<Edge> edges_;
  std::vector<Vertex> vertices_;
};

/// Levels are numbered 1..J; level k has n0*2^(k-1) cells per direction.
class MeshHierarchy {
 public:
  MeshHierarchy(int n0, int levels) : n0_(n0) {
    if (n0 < 2)
      throw std::invalid_argument("MeshHierarchy: n0 must be >= 2 (n0=" + std::to_string(n0) +
                                  " has no internal vertex)");
    if (levels < 1) throw std::invalid_argument("MeshHierarchy: need at least one level");
    if (levels > 12) throw std::invalid_argument("MeshHierarchy: too many levels");
    levels_.reserve(static_cast<std::size_t>(levels));
    for (int k = 1; k <= levels; ++k) levels_.emplace_back(k, n0 << (k - 1));
  }

  int num_levels() const { return static_cast<int>(levels_.size()); }
  int n0() const { return n0_; }
  /// Refinement ratio h_{k+1}/h_k.
  static constexpr double gamma() { return 0.5; }

  /// 1-based, as in the level numbering above.
  const LevelMesh& level(int k) const { return levels_.at(static_cast<std::size_t>(k - 1)); }
  const LevelMesh& finest() const { return levels_.back(); }
  double h() const { return finest().h(); }

  /// Children of a level-k cell on level k+1, ordered (2i,2j), (2i+1,2j), (2i,2j+1), (2i+1,2j+1).
  std::array<int, 4> children(int k, int cell) const {
    const LevelMesh& coarse = level(k);
    const LevelMesh& fine = level(k + 1);
    const Cell& c = coarse.cell(cell);
    return {fine.cell_index(2 * c.i, 2 * c.j), fine.cell_index(2 * c.i + 1, 2 * c.j),
            fine.cell_index(2 * c.i, 2 * c.j + 1), fine.cell_index(2 * c.i + 1, 2 * c.j + 1)};
  }

 private:
  int n0_;
  std::vector<LevelMesh> levels_;
};

inline MeshHierarchy build_hierarchy(int n0, int levels) { return MeshHierarchy(n0, levels); }

/// Number of levels needed by an n0=2 hierarchy to reach h = 2^-exponent.
inline int levels_for_exponent(int exponent) {
  if (exponent < 1) throw std::invalid_argument("levels_for_exponent: exponent must be >= 1");
  return exponent;
}

}  // namespace dfml
