#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace afem {

using Index = Eigen::Index;
using Point = Eigen::Vector2d;

constexpr Index kNoIndex = -1;

/// Thrown when a mesh violates one of its structural invariants.
class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Undirected edge identifier built from its two vertex ids (smaller id in the
/// high word).
using EdgeKey = std::uint64_t;

inline EdgeKey edge_key(Index i, Index j) {
  const auto lo = static_cast<std::uint64_t>(std::min(i, j));
  const auto hi = static_cast<std::uint64_t>(std::max(i, j));
  return (lo << 32) | hi;
}
inline Index edge_first(EdgeKey k) { return static_cast<Index>(k >> 32); }
inline Index edge_second(EdgeKey k) { return static_cast<Index>(k & 0xffffffffu); }

/// Triangle with counterclockwise vertices. Local edge i joins vertices i+1
/// and i+2 (it is opposite vertex i).
struct Element {
  std::array<Index, 3> vertices{};
  int refinement_edge = 0;

  EdgeKey edge(int i) const {
    return edge_key(vertices[(i + 1) % 3], vertices[(i + 2) % 3]);
  }
};

/// Per-element geometric quantities.
struct ElementGeometry {
  double area = 0.0;
  double diameter = 0.0;                     ///< h_T, the longest edge
  std::array<double, 3> edge_lengths{};      ///< edge i is opposite vertex i
  std::array<Point, 3> normals{};            ///< outward unit normals per edge
  Eigen::Matrix<double, 3, 2> grad_lambda;   ///< rows: gradients of barycentrics
};

/// Conforming triangulation of a polygonal domain. Values are immutable once
/// built; refinement produces a new mesh that records where its vertices and
/// elements came from.
class Mesh {
 public:
  struct EdgeElements {
    std::array<Index, 2> ids{kNoIndex, kNoIndex};
    bool interior() const { return ids[1] != kNoIndex; }
    Index other(Index t) const { return ids[0] == t ? ids[1] : ids[0]; }
  };

  Mesh() = default;

  /// Builds adjacency and validates orientation and conformity. The
  /// refinement edge stored in each element is kept as given.
  Mesh(std::vector<Point> vertices, std::vector<Element> elements);

  Index n_vertices() const { return static_cast<Index>(vertices_.size()); }
  Index n_elements() const { return static_cast<Index>(elements_.size()); }

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<Element>& elements() const { return elements_; }
  const Point& vertex(Index i) const { return vertices_[static_cast<std::size_t>(i)]; }
  const Element& element(Index t) const { return elements_[static_cast<std::size_t>(t)]; }

  const std::unordered_map<EdgeKey, EdgeElements>& edge_to_elements() const { return edges_; }
  const std::unordered_set<EdgeKey>& boundary_edges() const { return boundary_edges_; }
  const std::vector<bool>& boundary_vertex_flags() const { return boundary_vertex_; }
  bool is_boundary_vertex(Index v) const { return boundary_vertex_[static_cast<std::size_t>(v)]; }
  bool is_boundary_edge(EdgeKey e) const { return boundary_edges_.count(e) != 0; }

  /// Element across local edge i of t, or kNoIndex on the boundary.
  Index neighbor(Index t, int i) const { return neighbors_[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]; }

  double total_area() const;

  /// Element id of the coarser mesh this element descends from (itself for
  /// meshes that were not produced by refinement).
  Index parent(Index t) const { return parent_[static_cast<std::size_t>(t)]; }
  /// Endpoints of the edge a vertex was inserted on, or {-1,-1} for vertices
  /// inherited from the coarser mesh.
  const std::array<Index, 2>& vertex_parents(Index v) const { return vertex_parents_[static_cast<std::size_t>(v)]; }
  /// Number of vertices inherited unchanged from the coarser mesh.
  Index n_inherited_vertices() const { return n_inherited_vertices_; }

 private:
  friend Mesh refine(const Mesh& mesh, const std::vector<Index>& marked);

  std::vector<Point> vertices_;
  std::vector<Element> elements_;
  std::unordered_map<EdgeKey, EdgeElements> edges_;
  std::unordered_set<EdgeKey> boundary_edges_;
  std::vector<bool> boundary_vertex_;
  std::vector<std::array<Index, 3>> neighbors_;
  std::vector<Index> parent_;
  std::vector<std::array<Index, 2>> vertex_parents_;
  Index n_inherited_vertices_ = 0;
};

/// Local index of the longest edge; ties go to the smaller (min id, max id)
/// vertex pair.
int longest_edge(const std::vector<Point>& vertices, const std::array<Index, 3>& tri);

/// L-shaped domain (-1,1)^2 minus [0,1)x(-1,0]: six right triangles whose
/// diagonals meet at the re-entrant corner, followed by `levels` uniform
/// bisection passes.
Mesh build_lshape(int levels);

/// Unit square split into n x n cells, two triangles per cell.
Mesh build_unit_square(int n);

/// Longest-edge (Rivara) bisection of the marked elements with recursive
/// conformity closure. An empty marked set returns a copy of the mesh.
Mesh refine(const Mesh& mesh, const std::vector<Index>& marked);

/// Bisects every element once (for meshes where longest edges pair up, as
/// with the provided initial meshes).
Mesh refine_uniform(const Mesh& mesh);

/// Elements sharing at least one interior edge with t.
std::set<Index> star(const Mesh& mesh, Index t);

ElementGeometry geometry(const Mesh& mesh, Index t);

/// Smallest interior angle over all elements, in radians.
double min_angle(const Mesh& mesh);

/// Recomputes edge incidences from scratch and throws MeshError unless every
/// edge has one (boundary) or two (interior) incident elements and every
/// element has positive area.
void check_conformity(const Mesh& mesh);

/// `v x y`, `t i j k`, `b i j` records, one per line.
void write_mesh(std::ostream& os, const Mesh& mesh);

}  // namespace afem
