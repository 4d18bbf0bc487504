#include "afem/mesh.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

namespace afem {

namespace {

double signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

// Length of the edge between i and j, computed in a fixed vertex order so that
// both incident elements see bit-identical values.
double edge_length(const std::vector<Point>& v, Index i, Index j) {
  if (i > j) std::swap(i, j);
  return (v[static_cast<std::size_t>(j)] - v[static_cast<std::size_t>(i)]).norm();
}

}  // namespace

int longest_edge(const std::vector<Point>& vertices, const std::array<Index, 3>& tri) {
  int best = 0;
  double best_len = -1.0;
  EdgeKey best_key = 0;
  for (int i = 0; i < 3; ++i) {
    const Index a = tri[static_cast<std::size_t>((i + 1) % 3)];
    const Index b = tri[static_cast<std::size_t>((i + 2) % 3)];
    const double len = edge_length(vertices, a, b);
    const EdgeKey key = edge_key(a, b);
    if (len > best_len || (len == best_len && key < best_key)) {
      best = i;
      best_len = len;
      best_key = key;
    }
  }
  return best;
}

Mesh::Mesh(std::vector<Point> vertices, std::vector<Element> elements)
    : vertices_(std::move(vertices)), elements_(std::move(elements)) {
  const auto nv = vertices_.size();
  const auto ne = elements_.size();
  for (const auto& p : vertices_) {
    if (!std::isfinite(p.x()) || !std::isfinite(p.y())) throw MeshError("mesh: non-finite vertex coordinate");
  }
  edges_.reserve(ne * 2);
  for (std::size_t t = 0; t < ne; ++t) {
    const auto& e = elements_[t];
    for (Index v : e.vertices) {
      if (v < 0 || static_cast<std::size_t>(v) >= nv) throw MeshError("mesh: element references missing vertex");
    }
    if (e.refinement_edge < 0 || e.refinement_edge > 2) throw MeshError("mesh: invalid refinement edge");
    const double area = signed_area(vertex(e.vertices[0]), vertex(e.vertices[1]), vertex(e.vertices[2]));
    if (!(area > 0.0)) {
      throw MeshError("mesh: element " + std::to_string(t) + " has non-positive signed area");
    }
    for (int i = 0; i < 3; ++i) {
      auto& slot = edges_[e.edge(i)];
      if (slot.ids[0] == kNoIndex) {
        slot.ids[0] = static_cast<Index>(t);
      } else if (slot.ids[1] == kNoIndex) {
        slot.ids[1] = static_cast<Index>(t);
      } else {
        throw MeshError("mesh: edge shared by more than two elements");
      }
    }
  }

  boundary_vertex_.assign(nv, false);
  for (const auto& [key, slot] : edges_) {
    if (!slot.interior()) {
      boundary_edges_.insert(key);
      boundary_vertex_[static_cast<std::size_t>(edge_first(key))] = true;
      boundary_vertex_[static_cast<std::size_t>(edge_second(key))] = true;
    }
  }

  neighbors_.resize(ne);
  for (std::size_t t = 0; t < ne; ++t) {
    for (int i = 0; i < 3; ++i) {
      neighbors_[t][static_cast<std::size_t>(i)] = edges_.at(elements_[t].edge(i)).other(static_cast<Index>(t));
    }
  }

  parent_.resize(ne);
  for (std::size_t t = 0; t < ne; ++t) parent_[t] = static_cast<Index>(t);
  vertex_parents_.assign(nv, {kNoIndex, kNoIndex});
  n_inherited_vertices_ = static_cast<Index>(nv);
}

double Mesh::total_area() const {
  double sum = 0.0;
  for (const auto& e : elements_) {
    sum += signed_area(vertex(e.vertices[0]), vertex(e.vertices[1]), vertex(e.vertices[2]));
  }
  return sum;
}

Mesh build_unit_square(int n) {
  if (n < 1) throw std::invalid_argument("build_unit_square: n must be >= 1");
  std::vector<Point> v;
  v.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) v.emplace_back(double(i) / n, double(j) / n);
  }
  auto id = [n](int i, int j) { return static_cast<Index>(j * (n + 1) + i); };
  std::vector<Element> elems;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      // diagonal from (i,j) to (i+1,j+1)
      elems.push_back({{id(i, j), id(i + 1, j), id(i + 1, j + 1)}, 0});
      elems.push_back({{id(i, j), id(i + 1, j + 1), id(i, j + 1)}, 0});
    }
  }
  for (auto& e : elems) e.refinement_edge = longest_edge(v, e.vertices);
  return Mesh(std::move(v), std::move(elems));
}

Mesh build_lshape(int levels) {
  if (levels < 0) throw std::invalid_argument("build_lshape: levels must be >= 0");
  // 0:(0,0) 1:(1,0) 2:(1,1) 3:(0,1) 4:(-1,1) 5:(-1,0) 6:(-1,-1) 7:(0,-1)
  std::vector<Point> v = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}};
  std::vector<Element> elems = {
      {{0, 1, 2}, 0}, {{0, 2, 3}, 0},  // [0,1]x[0,1]
      {{0, 3, 4}, 0}, {{0, 4, 5}, 0},  // [-1,0]x[0,1]
      {{0, 5, 6}, 0}, {{0, 6, 7}, 0},  // [-1,0]x[-1,0]
  };
  for (auto& e : elems) e.refinement_edge = longest_edge(v, e.vertices);
  Mesh mesh(std::move(v), std::move(elems));
  for (int l = 0; l < levels; ++l) mesh = refine_uniform(mesh);
  return mesh;
}

namespace {

// Mutable working copy used while bisecting.
class Refiner {
 public:
  explicit Refiner(const Mesh& mesh)
      : vertices_(mesh.vertices()),
        elements_(mesh.elements()),
        alive_(mesh.elements().size(), true),
        root_(mesh.elements().size()),
        vertex_parents_(mesh.vertices().size(), {kNoIndex, kNoIndex}) {
    for (std::size_t t = 0; t < root_.size(); ++t) root_[t] = static_cast<Index>(t);
    for (const auto& [key, slot] : mesh.edge_to_elements()) edges_.emplace(key, slot.ids);
    depth_cap_ = 2 * static_cast<Index>(elements_.size());
  }

  bool alive(Index t) const { return alive_[static_cast<std::size_t>(t)]; }

  void refine_element(Index t, Index depth) {
    if (depth > depth_cap_) throw MeshError("refine: recursion depth cap exceeded");
    while (alive(t)) {
      const Element& e = elements_[static_cast<std::size_t>(t)];
      const EdgeKey key = e.edge(e.refinement_edge);
      const Index nb = other(key, t);
      if (nb == kNoIndex) {
        const Index m = midpoint(key);
        split(t, m);
        return;
      }
      const Element& ne = elements_[static_cast<std::size_t>(nb)];
      if (ne.edge(ne.refinement_edge) == key) {
        const Index m = midpoint(key);
        split(t, m);
        split(nb, m);
        return;
      }
      refine_element(nb, depth + 1);
    }
  }

  struct Output {
    std::vector<Point> vertices;
    std::vector<Element> elements;
    std::vector<Index> parent;
    std::vector<std::array<Index, 2>> vertex_parents;
  };

  Output take() {
    Output out;
    for (std::size_t t = 0; t < elements_.size(); ++t) {
      if (!alive_[t]) continue;
      out.elements.push_back(elements_[t]);
      out.parent.push_back(root_[t]);
    }
    out.vertices = std::move(vertices_);
    out.vertex_parents = std::move(vertex_parents_);
    return out;
  }

 private:
  Index other(EdgeKey key, Index t) const {
    const auto& ids = edges_.at(key);
    return ids[0] == t ? ids[1] : ids[0];
  }

  Index midpoint(EdgeKey key) {
    if (auto it = midpoints_.find(key); it != midpoints_.end()) return it->second;
    const Index a = edge_first(key);
    const Index b = edge_second(key);
    vertices_.push_back(0.5 * (vertices_[static_cast<std::size_t>(a)] + vertices_[static_cast<std::size_t>(b)]));
    vertex_parents_.push_back({a, b});
    const Index m = static_cast<Index>(vertices_.size()) - 1;
    midpoints_.emplace(key, m);
    return m;
  }

  void detach(Index t) {
    const Element& e = elements_[static_cast<std::size_t>(t)];
    for (int i = 0; i < 3; ++i) {
      auto it = edges_.find(e.edge(i));
      auto& ids = it->second;
      if (ids[0] == t) {
        ids[0] = ids[1];
        ids[1] = kNoIndex;
      } else if (ids[1] == t) {
        ids[1] = kNoIndex;
      }
      if (ids[0] == kNoIndex) edges_.erase(it);
    }
    alive_[static_cast<std::size_t>(t)] = false;
  }

  Index attach(const std::array<Index, 3>& tri, Index root) {
    Element e{tri, longest_edge(vertices_, tri)};
    const Index id = static_cast<Index>(elements_.size());
    elements_.push_back(e);
    alive_.push_back(true);
    root_.push_back(root);
    for (int i = 0; i < 3; ++i) {
      auto [it, inserted] = edges_.try_emplace(e.edge(i), std::array<Index, 2>{id, kNoIndex});
      if (!inserted) {
        if (it->second[1] != kNoIndex) throw MeshError("refine: edge gained a third element");
        it->second[1] = id;
      }
    }
    return id;
  }

  void split(Index t, Index m) {
    const Element e = elements_[static_cast<std::size_t>(t)];
    const int r = e.refinement_edge;
    const Index a = e.vertices[static_cast<std::size_t>(r)];
    const Index b = e.vertices[static_cast<std::size_t>((r + 1) % 3)];
    const Index c = e.vertices[static_cast<std::size_t>((r + 2) % 3)];
    const Index root = root_[static_cast<std::size_t>(t)];
    detach(t);
    attach({a, b, m}, root);
    attach({a, m, c}, root);
  }

  std::vector<Point> vertices_;
  std::vector<Element> elements_;
  std::vector<bool> alive_;
  std::vector<Index> root_;
  std::vector<std::array<Index, 2>> vertex_parents_;
  std::unordered_map<EdgeKey, std::array<Index, 2>> edges_;
  std::unordered_map<EdgeKey, Index> midpoints_;
  Index depth_cap_ = 0;
};

}  // namespace

Mesh refine(const Mesh& mesh, const std::vector<Index>& marked) {
  if (marked.empty()) return mesh;
  std::vector<Index> sorted(marked);
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (sorted.front() < 0 || sorted.back() >= mesh.n_elements()) {
    throw std::out_of_range("refine: marked element id out of range");
  }

  Refiner refiner(mesh);
  for (Index t : sorted) {
    if (refiner.alive(t)) refiner.refine_element(t, 0);
  }

  auto out = refiner.take();
  Mesh result(std::move(out.vertices), std::move(out.elements));
  result.parent_ = std::move(out.parent);
  result.vertex_parents_ = std::move(out.vertex_parents);
  result.n_inherited_vertices_ = mesh.n_vertices();
  return result;
}

Mesh refine_uniform(const Mesh& mesh) {
  std::vector<Index> all(static_cast<std::size_t>(mesh.n_elements()));
  for (std::size_t t = 0; t < all.size(); ++t) all[t] = static_cast<Index>(t);
  return refine(mesh, all);
}

std::set<Index> star(const Mesh& mesh, Index t) {
  std::set<Index> result;
  for (int i = 0; i < 3; ++i) {
    const Index nb = mesh.neighbor(t, i);
    if (nb == kNoIndex) continue;
    result.insert(t);
    result.insert(nb);
  }
  return result;
}

ElementGeometry geometry(const Mesh& mesh, Index t) {
  const Element& e = mesh.element(t);
  const Point& p0 = mesh.vertex(e.vertices[0]);
  const Point& p1 = mesh.vertex(e.vertices[1]);
  const Point& p2 = mesh.vertex(e.vertices[2]);
  const std::array<const Point*, 3> p{&p0, &p1, &p2};

  ElementGeometry g;
  g.area = signed_area(p0, p1, p2);
  if (!(g.area > 0.0)) throw MeshError("geometry: degenerate element " + std::to_string(t));
  const double inv2a = 1.0 / (2.0 * g.area);
  for (int i = 0; i < 3; ++i) {
    const Point& b = *p[static_cast<std::size_t>((i + 1) % 3)];
    const Point& c = *p[static_cast<std::size_t>((i + 2) % 3)];
    const Point d = c - b;
    const double len = d.norm();
    g.edge_lengths[static_cast<std::size_t>(i)] = len;
    // counterclockwise orientation: outward normal is the edge direction
    // rotated clockwise
    g.normals[static_cast<std::size_t>(i)] = Point(d.y(), -d.x()) / len;
    g.grad_lambda(i, 0) = (b.y() - c.y()) * inv2a;
    g.grad_lambda(i, 1) = (c.x() - b.x()) * inv2a;
  }
  g.diameter = *std::max_element(g.edge_lengths.begin(), g.edge_lengths.end());
  return g;
}

double min_angle(const Mesh& mesh) {
  double result = std::numbers::pi;
  for (const auto& e : mesh.elements()) {
    for (int i = 0; i < 3; ++i) {
      const Point& a = mesh.vertex(e.vertices[static_cast<std::size_t>(i)]);
      const Point& b = mesh.vertex(e.vertices[static_cast<std::size_t>((i + 1) % 3)]);
      const Point& c = mesh.vertex(e.vertices[static_cast<std::size_t>((i + 2) % 3)]);
      const Point u = b - a;
      const Point w = c - a;
      const double angle = std::atan2(std::abs(u.x() * w.y() - u.y() * w.x()), u.dot(w));
      result = std::min(result, angle);
    }
  }
  return result;
}

void check_conformity(const Mesh& mesh) {
  std::unordered_map<EdgeKey, int> count;
  for (Index t = 0; t < mesh.n_elements(); ++t) {
    const auto& e = mesh.element(t);
    const double area = signed_area(mesh.vertex(e.vertices[0]), mesh.vertex(e.vertices[1]),
                                    mesh.vertex(e.vertices[2]));
    if (!(area > 0.0)) throw MeshError("conformity: element with non-positive area");
    for (int i = 0; i < 3; ++i) ++count[e.edge(i)];
  }
  std::vector<int> boundary_degree(static_cast<std::size_t>(mesh.n_vertices()), 0);
  for (const auto& [key, c] : count) {
    if (c > 2) throw MeshError("conformity: edge shared by more than two elements");
    if (c == 1) {
      ++boundary_degree[static_cast<std::size_t>(edge_first(key))];
      ++boundary_degree[static_cast<std::size_t>(edge_second(key))];
    }
    const auto it = mesh.edge_to_elements().find(key);
    if (it == mesh.edge_to_elements().end() || (it->second.interior() ? 2 : 1) != c) {
      throw MeshError("conformity: cached edge incidences are stale");
    }
  }
  if (count.size() != mesh.edge_to_elements().size()) throw MeshError("conformity: cached edge count mismatch");
  // A hanging node shows up as a vertex touching more than two one-sided edges.
  for (int d : boundary_degree) {
    if (d != 0 && d != 2) throw MeshError("conformity: hanging node detected");
  }
}

void write_mesh(std::ostream& os, const Mesh& mesh) {
  const auto old_precision = os.precision(17);
  for (const auto& p : mesh.vertices()) os << "v " << p.x() << ' ' << p.y() << '\n';
  for (const auto& e : mesh.elements()) {
    os << "t " << e.vertices[0] << ' ' << e.vertices[1] << ' ' << e.vertices[2] << '\n';
  }
  std::vector<EdgeKey> b(mesh.boundary_edges().begin(), mesh.boundary_edges().end());
  std::sort(b.begin(), b.end());
  for (EdgeKey k : b) os << "b " << edge_first(k) << ' ' << edge_second(k) << '\n';
  os.precision(old_precision);
}

}  // namespace afem
