#pragma once

#include "afem/mesh.hpp"
#include "afem/quadrature.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace afem {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;
using ScalarField = std::function<double(const Point&)>;

class AdmissibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Continuous piecewise linears vanishing on the boundary. Degrees of freedom
/// are the interior vertices, numbered in vertex order.
class P1Space {
 public:
  explicit P1Space(const Mesh& mesh);

  const Mesh& mesh() const { return *mesh_; }
  Index n_dofs() const { return n_dofs_; }
  /// Dof of a vertex, or kNoIndex for boundary vertices.
  Index dof(Index vertex) const { return dof_of_vertex_[static_cast<std::size_t>(vertex)]; }
  const std::vector<Index>& dof_of_vertex() const { return dof_of_vertex_; }

  /// Nodal values on all vertices (zero on the boundary).
  Eigen::VectorXd vertex_values(const Eigen::VectorXd& coefficients) const;
  /// Restriction of nodal values to the free dofs.
  Eigen::VectorXd restrict(const Eigen::VectorXd& vertex_values) const;

 private:
  const Mesh* mesh_;
  std::vector<Index> dof_of_vertex_;
  Index n_dofs_ = 0;
};

/// Piecewise constants, one dof per element.
class P0Space {
 public:
  explicit P0Space(const Mesh& mesh) : mesh_(&mesh) {}
  const Mesh& mesh() const { return *mesh_; }
  Index n_dofs() const { return mesh_->n_elements(); }

 private:
  const Mesh* mesh_;
};

enum class SpaceKind { P1, P0 };

struct FeFunction {
  SpaceKind space = SpaceKind::P1;
  Eigen::VectorXd coefficients;

  static FeFunction p1(Eigen::VectorXd c) { return {SpaceKind::P1, std::move(c)}; }
  static FeFunction p0(Eigen::VectorXd c) { return {SpaceKind::P0, std::move(c)}; }
};

/// A quadrature point of one element, handed to coefficient callables.
struct QuadPoint {
  Index element;
  Index index;          ///< position within the rule
  Eigen::Vector3d bary;
  Point x;
};

enum class Admissibility { enforce, unchecked };

Eigen::Matrix3d local_stiffness(const ElementGeometry& g);
/// Exact P1 mass matrix on an element of the given area.
Eigen::Matrix3d local_mass(double area);

/// Physical coordinates of a barycentric point of element t.
Point map_to_element(const Mesh& mesh, Index t, const Eigen::Vector3d& bary);

/// Stiffness plus mass weighted by a piecewise constant coefficient, on the
/// free dofs.
SparseMatrix assemble_system(const P1Space& space, const Eigen::VectorXd& u_elementwise,
                             Admissibility check = Admissibility::enforce);

/// Element matrix of the reaction-diffusion form with the coefficient
/// evaluated at quadrature points: `u(const QuadPoint&) -> double`.
template <typename Coefficient>
Eigen::Matrix3d local_system(const Mesh& mesh, Index t, Coefficient&& u, const QuadRule& rule,
                             Admissibility check = Admissibility::enforce);

/// Stiffness plus mass weighted by a coefficient evaluated at quadrature
/// points.
template <typename Coefficient>
SparseMatrix assemble_system(const P1Space& space, Coefficient&& u, const QuadRule& rule,
                             Admissibility check = Admissibility::enforce);

/// Load vector b_i = int g phi_i on the free dofs.
Eigen::VectorXd assemble_rhs(const P1Space& space, const ScalarField& g, const QuadRule& rule);

/// Same, from values of g already sampled at every quadrature point (one column
/// per element).
Eigen::VectorXd assemble_rhs(const P1Space& space, const Eigen::MatrixXd& g_at_points, const QuadRule& rule);

/// Values of g at the rule's points; column t belongs to element t.
Eigen::MatrixXd sample_field(const Mesh& mesh, const ScalarField& g, const QuadRule& rule);

/// Mass matrix on the free dofs (unit coefficient).
SparseMatrix assemble_mass(const P1Space& space);

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients to relative residual 1e-12, at
/// most 20*sqrt(dim) iterations. Throws SolverError otherwise.
Eigen::VectorXd solve_spd(const SparseMatrix& a, const Eigen::VectorXd& b, SolveStats* stats = nullptr);

struct P1Value {
  double value;
  Eigen::Vector2d gradient;
};

/// Barycentric coordinates of x relative to element t.
Eigen::Vector3d barycentric(const Mesh& mesh, Index t, const Point& x);

P1Value eval_p1(const P1Space& space, const FeFunction& f, Index t, const Point& x);
/// Gradient of a P1 function given by nodal values on all vertices.
Eigen::Vector2d p1_gradient(const Mesh& mesh, const Eigen::VectorXd& vertex_values, Index t);

/// Sum of outward normal derivatives from both sides of an interior edge.
double edge_jump(const Mesh& mesh, const Eigen::VectorXd& vertex_values, EdgeKey edge);
double edge_jump(const P1Space& space, const FeFunction& y, EdgeKey edge);

/// Elementwise mean of g.
FeFunction p0_project(const Mesh& mesh, const ScalarField& g, const QuadRule& rule);

/// `dof value` lines.
void write_coefficients(std::ostream& os, const FeFunction& f);

// ---------------------------------------------------------------------------

template <typename Coefficient>
Eigen::Matrix3d local_system(const Mesh& mesh, Index t, Coefficient&& u, const QuadRule& rule, Admissibility check) {
  const ElementGeometry g = geometry(mesh, t);
  Eigen::Matrix3d mass = Eigen::Matrix3d::Zero();
  for (Index q = 0; q < rule.size(); ++q) {
    const Eigen::Vector3d lambda = rule.barycentric.col(q);
    const QuadPoint qp{t, q, lambda, map_to_element(mesh, t, lambda)};
    const double value = u(qp);
    if (check == Admissibility::enforce && !(value > 0.0)) {
      throw AdmissibilityError("assemble_system: reaction coefficient is not positive in element " +
                               std::to_string(t));
    }
    mass.noalias() += (rule.weights(q) * value) * (lambda * lambda.transpose());
  }
  return local_stiffness(g) + g.area * mass;
}

template <typename Coefficient>
SparseMatrix assemble_system(const P1Space& space, Coefficient&& u, const QuadRule& rule, Admissibility check) {
  const Mesh& mesh = space.mesh();
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(9 * mesh.n_elements()));
  for (Index t = 0; t < mesh.n_elements(); ++t) {
    const Eigen::Matrix3d local = local_system(mesh, t, u, rule, check);
    const auto& v = mesh.element(t).vertices;
    for (int i = 0; i < 3; ++i) {
      const Index di = space.dof(v[static_cast<std::size_t>(i)]);
      if (di == kNoIndex) continue;
      for (int j = 0; j < 3; ++j) {
        const Index dj = space.dof(v[static_cast<std::size_t>(j)]);
        if (dj != kNoIndex) triplets.emplace_back(di, dj, local(i, j));
      }
    }
  }
  SparseMatrix a(space.n_dofs(), space.n_dofs());
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

}  // namespace afem
