#pragma once

#include "afem/fem.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace afem {

struct ProblemData {
  ScalarField f;
  ScalarField y_omega;
  double alpha = 1.0;
  double a = 0.0;
  double b = 1.0;

  /// Throws std::invalid_argument unless alpha > 0 and 0 < a < b.
  void validate() const;
};

/// f and y_omega sampled at every quadrature point of a mesh.
struct SampledData {
  QuadRule rule;
  Eigen::MatrixXd f;
  Eigen::MatrixXd y_omega;
};

SampledData sample_data(const Mesh& mesh, const ProblemData& data, const QuadRule& rule);

struct FullySolution {
  FeFunction y;
  FeFunction p;
  FeFunction u;  ///< P0
  int newton_iters = 0;
  double kkt_residual = 0.0;
  std::vector<double> history;
};

/// The control is implicit: u(x) = project_box(y(x) p(x) / alpha).
struct SemiSolution {
  FeFunction y;
  FeFunction p;
  int newton_iters = 0;
  double kkt_residual = 0.0;
  std::vector<double> history;
};

struct NewtonOptions {
  double tolerance = 1e-10;
  int max_iterations = 100;
  int max_halvings = 10;
  int quad_degree = 19;  ///< rule for the semi-discrete reaction term
};

/// Newton did not reach the tolerance. Carries the last iterate.
class NewtonDivergence : public std::runtime_error {
 public:
  NewtonDivergence(const std::string& what, FeFunction y, FeFunction p, FeFunction u, std::vector<double> history)
      : std::runtime_error(what), y(std::move(y)), p(std::move(p)), u(std::move(u)), history(std::move(history)) {}

  FeFunction y;
  FeFunction p;
  FeFunction u;  ///< empty for the semi-discrete scheme
  std::vector<double> history;
};

/// min(b, max(v, a)). Throws std::invalid_argument if a >= b.
double project_box(double v, double a, double b);

/// Pointwise control of the semi-discrete scheme at x in element t.
double control_semi(const P1Space& space, const FeFunction& y, const FeFunction& p, const ProblemData& data, Index t,
                    const Point& x);

/// Projected cell means of y p / alpha. The cell integrals of y p are exact.
FeFunction control_fully(const P1Space& space, const FeFunction& y, const FeFunction& p, const ProblemData& data);

/// Fully discrete scheme: P1 state and adjoint, P0 control. `init` must live
/// on the same mesh. `samples` must have been taken on the same mesh.
FullySolution solve_fully(const P1Space& space, const ProblemData& data, const NewtonOptions& options = {},
                          const FullySolution* init = nullptr, const SampledData* samples = nullptr);

/// Variational discretization: the control is never discretized.
SemiSolution solve_semi(const P1Space& space, const ProblemData& data, const NewtonOptions& options = {},
                        const SemiSolution* init = nullptr, const SampledData* samples = nullptr);

/// J(y, u) = 1/2 |y - y_omega|^2 + alpha/2 |u|^2, with u evaluated at
/// quadrature points.
double cost(const P1Space& space, const FeFunction& y, const std::function<double(const QuadPoint&)>& u,
            const ProblemData& data, const QuadRule& rule);
double cost(const P1Space& space, const FullySolution& s, const ProblemData& data, const QuadRule& rule);
double cost(const P1Space& space, const SemiSolution& s, const ProblemData& data, const QuadRule& rule);

}  // namespace afem
