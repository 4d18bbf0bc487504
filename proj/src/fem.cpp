#include "afem/fem.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <cmath>
#include <ostream>

namespace afem {

P1Space::P1Space(const Mesh& mesh) : mesh_(&mesh), dof_of_vertex_(static_cast<std::size_t>(mesh.n_vertices()), kNoIndex) {
  for (Index v = 0; v < mesh.n_vertices(); ++v) {
    if (!mesh.is_boundary_vertex(v)) dof_of_vertex_[static_cast<std::size_t>(v)] = n_dofs_++;
  }
}

Eigen::VectorXd P1Space::vertex_values(const Eigen::VectorXd& coefficients) const {
  if (coefficients.size() != n_dofs_) throw std::invalid_argument("P1Space: coefficient length mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh_->n_vertices());
  for (std::size_t v = 0; v < dof_of_vertex_.size(); ++v) {
    if (dof_of_vertex_[v] != kNoIndex) out(static_cast<Index>(v)) = coefficients(dof_of_vertex_[v]);
  }
  return out;
}

Eigen::VectorXd P1Space::restrict(const Eigen::VectorXd& vertex_values) const {
  Eigen::VectorXd out(n_dofs_);
  for (std::size_t v = 0; v < dof_of_vertex_.size(); ++v) {
    if (dof_of_vertex_[v] != kNoIndex) out(dof_of_vertex_[v]) = vertex_values(static_cast<Index>(v));
  }
  return out;
}

Eigen::Matrix3d local_stiffness(const ElementGeometry& g) {
  return g.area * (g.grad_lambda * g.grad_lambda.transpose());
}

Eigen::Matrix3d local_mass(double area) {
  Eigen::Matrix3d m;
  m << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  return (area / 12.0) * m;
}

Point map_to_element(const Mesh& mesh, Index t, const Eigen::Vector3d& bary) {
  const auto& v = mesh.element(t).vertices;
  return bary(0) * mesh.vertex(v[0]) + bary(1) * mesh.vertex(v[1]) + bary(2) * mesh.vertex(v[2]);
}

namespace {

void scatter(const P1Space& space, Index t, const Eigen::Matrix3d& local, std::vector<Triplet>& triplets) {
  const auto& v = space.mesh().element(t).vertices;
  for (int i = 0; i < 3; ++i) {
    const Index di = space.dof(v[static_cast<std::size_t>(i)]);
    if (di == kNoIndex) continue;
    for (int j = 0; j < 3; ++j) {
      const Index dj = space.dof(v[static_cast<std::size_t>(j)]);
      if (dj != kNoIndex) triplets.emplace_back(di, dj, local(i, j));
    }
  }
}

}  // namespace

SparseMatrix assemble_system(const P1Space& space, const Eigen::VectorXd& u_elementwise, Admissibility check) {
  const Mesh& mesh = space.mesh();
  if (u_elementwise.size() != mesh.n_elements()) throw std::invalid_argument("assemble_system: coefficient size");
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(9 * mesh.n_elements()));
  for (Index t = 0; t < mesh.n_elements(); ++t) {
    if (check == Admissibility::enforce && !(u_elementwise(t) > 0.0)) {
      throw AdmissibilityError("assemble_system: reaction coefficient is not positive in element " +
                               std::to_string(t));
    }
    const ElementGeometry g = geometry(mesh, t);
    scatter(space, t, local_stiffness(g) + u_elementwise(t) * local_mass(g.area), triplets);
  }
  SparseMatrix a(space.n_dofs(), space.n_dofs());
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

SparseMatrix assemble_mass(const P1Space& space) {
  const Mesh& mesh = space.mesh();
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(9 * mesh.n_elements()));
  for (Index t = 0; t < mesh.n_elements(); ++t) scatter(space, t, local_mass(geometry(mesh, t).area), triplets);
  SparseMatrix m(space.n_dofs(), space.n_dofs());
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

Eigen::MatrixXd sample_field(const Mesh& mesh, const ScalarField& g, const QuadRule& rule) {
  Eigen::MatrixXd out(rule.size(), mesh.n_elements());
  for (Index t = 0; t < mesh.n_elements(); ++t) {
    for (Index q = 0; q < rule.size(); ++q) out(q, t) = g(map_to_element(mesh, t, rule.barycentric.col(q)));
  }
  return out;
}

Eigen::VectorXd assemble_rhs(const P1Space& space, const Eigen::MatrixXd& g_at_points, const QuadRule& rule) {
  const Mesh& mesh = space.mesh();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(space.n_dofs());
  for (Index t = 0; t < mesh.n_elements(); ++t) {
    const double area = geometry(mesh, t).area;
    const Eigen::Vector3d local =
        area * (rule.barycentric * (rule.weights.array() * g_at_points.col(t).array()).matrix());
    const auto& v = mesh.element(t).vertices;
    for (int i = 0; i < 3; ++i) {
      const Index d = space.dof(v[static_cast<std::size_t>(i)]);
      if (d != kNoIndex) b(d) += local(i);
    }
  }
  return b;
}

Eigen::VectorXd assemble_rhs(const P1Space& space, const ScalarField& g, const QuadRule& rule) {
  return assemble_rhs(space, sample_field(space.mesh(), g, rule), rule);
}

Eigen::VectorXd solve_spd(const SparseMatrix& a, const Eigen::VectorXd& b, SolveStats* stats) {
  constexpr double kTolerance = 1e-12;
  const Index n = a.rows();
  if (a.cols() != n || b.size() != n) throw std::invalid_argument("solve_spd: dimension mismatch");
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    if (stats) *stats = {};
    return Eigen::VectorXd::Zero(n);
  }
  const int cap = static_cast<int>(std::ceil(20.0 * std::sqrt(static_cast<double>(n))));

  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
  cg.setTolerance(kTolerance);
  cg.compute(a);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  int used = 0;
  double rel = 1.0;
  // The recurrence residual can drift from the true one; restart from the
  // current iterate until the true residual meets the tolerance.
  while (used < cap) {
    cg.setMaxIterations(cap - used);
    x = cg.solveWithGuess(b, x);
    used += static_cast<int>(std::max<Index>(cg.iterations(), 1));
    rel = (b - a * x).norm() / bnorm;
    if (rel <= kTolerance) break;
  }
  if (stats) *stats = {used, rel};
  if (!(rel <= kTolerance)) {
    throw SolverError("solve_spd: no convergence within " + std::to_string(cap) + " iterations (residual " +
                          std::to_string(rel) + ")",
                      rel);
  }
  return x;
}

Eigen::Vector3d barycentric(const Mesh& mesh, Index t, const Point& x) {
  const auto& v = mesh.element(t).vertices;
  const Point& p0 = mesh.vertex(v[0]);
  Eigen::Matrix2d m;
  m.col(0) = mesh.vertex(v[1]) - p0;
  m.col(1) = mesh.vertex(v[2]) - p0;
  const Eigen::Vector2d st = m.inverse() * (x - p0);
  return {1.0 - st(0) - st(1), st(0), st(1)};
}

Eigen::Vector2d p1_gradient(const Mesh& mesh, const Eigen::VectorXd& vertex_values, Index t) {
  const ElementGeometry g = geometry(mesh, t);
  const auto& v = mesh.element(t).vertices;
  const Eigen::Vector3d local(vertex_values(v[0]), vertex_values(v[1]), vertex_values(v[2]));
  return g.grad_lambda.transpose() * local;
}

P1Value eval_p1(const P1Space& space, const FeFunction& f, Index t, const Point& x) {
  if (f.space != SpaceKind::P1) throw std::invalid_argument("eval_p1: function is not P1");
  const Mesh& mesh = space.mesh();
  const Eigen::Vector3d lambda = barycentric(mesh, t, x);
  if ((lambda.array() < -1e-12).any()) {
    throw std::domain_error("eval_p1: point outside element " + std::to_string(t));
  }
  const Eigen::VectorXd values = space.vertex_values(f.coefficients);
  const auto& v = mesh.element(t).vertices;
  const Eigen::Vector3d local(values(v[0]), values(v[1]), values(v[2]));
  return {lambda.dot(local), p1_gradient(mesh, values, t)};
}

double edge_jump(const Mesh& mesh, const Eigen::VectorXd& vertex_values, EdgeKey edge) {
  const auto it = mesh.edge_to_elements().find(edge);
  if (it == mesh.edge_to_elements().end()) throw std::invalid_argument("edge_jump: unknown edge");
  if (!it->second.interior()) throw std::invalid_argument("edge_jump: boundary edge has no jump");
  double jump = 0.0;
  for (Index t : it->second.ids) {
    const ElementGeometry g = geometry(mesh, t);
    const Element& e = mesh.element(t);
    int local = 0;
    while (e.edge(local) != edge) ++local;
    jump += g.normals[static_cast<std::size_t>(local)].dot(p1_gradient(mesh, vertex_values, t));
  }
  return jump;
}

double edge_jump(const P1Space& space, const FeFunction& y, EdgeKey edge) {
  if (y.space != SpaceKind::P1) throw std::invalid_argument("edge_jump: function is not P1");
  return edge_jump(space.mesh(), space.vertex_values(y.coefficients), edge);
}

FeFunction p0_project(const Mesh& mesh, const ScalarField& g, const QuadRule& rule) {
  Eigen::VectorXd means(mesh.n_elements());
  for (Index t = 0; t < mesh.n_elements(); ++t) {
    double sum = 0.0;
    for (Index q = 0; q < rule.size(); ++q) {
      sum += rule.weights(q) * g(map_to_element(mesh, t, rule.barycentric.col(q)));
    }
    means(t) = sum;
  }
  return FeFunction::p0(std::move(means));
}

void write_coefficients(std::ostream& os, const FeFunction& f) {
  const auto old_precision = os.precision(17);
  for (Index i = 0; i < f.coefficients.size(); ++i) os << i << ' ' << f.coefficients(i) << '\n';
  os.precision(old_precision);
}

}  // namespace afem
