#pragma once

#include "afem/ocp.hpp"

#include <functional>
#include <iosfwd>
#include <vector>

namespace afem {

/// A function of the quadrature point: data, coefficients, sampled fields.
using PointFunction = std::function<double(const QuadPoint&)>;

enum class IndicatorTag { state, adjoint, control, total };

/// Elementwise indicators E_T (not squared).
struct IndicatorField {
  IndicatorTag tag = IndicatorTag::total;
  Eigen::VectorXd values;

  /// (sum E_T^2)^(1/2)
  double global() const { return values.norm(); }
};

struct EstimatorBreakdown {
  double est_st = 0.0;
  double est_adj = 0.0;
  double est_ct = 0.0;  ///< zero for the semi-discrete scheme
  double est_total = 0.0;
};

struct Estimate {
  IndicatorField state;
  IndicatorField adjoint;
  IndicatorField control;  ///< empty for the semi-discrete scheme
  IndicatorField total;
  EstimatorBreakdown breakdown;
};

/// Residual indicator of -Δz + c z = s:
/// E_T^2 = h_T^2 |s - c z|_T^2 + h_T sum_{S interior edge of T} |S| [dz/dn]_S^2.
IndicatorField residual_indicator(const Mesh& mesh, const Eigen::VectorXd& z_vertex_values, const PointFunction& source,
                                  const PointFunction& coefficient, const QuadRule& rule,
                                  IndicatorTag tag = IndicatorTag::total);

PointFunction p0_coefficient(const FeFunction& u);
PointFunction field_coefficient(const ScalarField& g);
/// Values sampled with the same rule as the one that will query them.
PointFunction sampled_coefficient(const Eigen::MatrixXd& samples);
/// Pointwise semi-discrete control project_box(y p / alpha).
PointFunction semi_control_coefficient(const P1Space& space, const FeFunction& y, const FeFunction& p,
                                       const ProblemData& data);

IndicatorField indicator_state(const P1Space& space, const FeFunction& y, const PointFunction& u,
                               const PointFunction& f, const QuadRule& rule);
IndicatorField indicator_adjoint(const P1Space& space, const FeFunction& p, const FeFunction& y,
                                 const PointFunction& u, const PointFunction& y_omega, const QuadRule& rule);
/// |project_box(y p / alpha) - u_T|_{L2(T)}. Throws std::invalid_argument
/// unless u is P0.
IndicatorField indicator_control(const P1Space& space, const FeFunction& y, const FeFunction& p, const FeFunction& u,
                                 const ProblemData& data, const QuadRule& rule);

/// Per-element h_T |g - mean_T g|_{L2(T)}.
Eigen::VectorXd oscillation_terms(const Mesh& mesh, const PointFunction& g, const QuadRule& rule);
/// (sum over the given elements of h_T^2 |g - mean_T g|^2)^(1/2)
double oscillation(const Mesh& mesh, const PointFunction& g, const std::vector<Index>& elements, const QuadRule& rule);
double oscillation(const Mesh& mesh, const PointFunction& g, const QuadRule& rule);

EstimatorBreakdown breakdown(const IndicatorField& st, const IndicatorField& adj, const IndicatorField* ct = nullptr);

/// Both schemes. When `samples` is given its rule is used instead of `rule`.
Estimate estimate(const P1Space& space, const FullySolution& s, const ProblemData& data, const QuadRule& rule,
                  const SampledData* samples = nullptr);
Estimate estimate(const P1Space& space, const SemiSolution& s, const ProblemData& data, const QuadRule& rule,
                  const SampledData* samples = nullptr);

/// Exact optimal state and adjoint. The exact control is derived pointwise
/// from their product.
struct ExactSolution {
  ScalarField y;
  ScalarField p;
  std::function<Eigen::Vector2d(const Point&)> grad_y;
  std::function<Eigen::Vector2d(const Point&)> grad_p;
};

struct ErrorReport {
  double err_y_h1 = 0.0;
  double err_p_h1 = 0.0;
  double err_u_l2 = 0.0;
  double err_total = 0.0;
  double effectivity = 0.0;
  /// Squared elementwise contributions, for local checks.
  Eigen::VectorXd element_y;
  Eigen::VectorXd element_p;
  Eigen::VectorXd element_u;
};

/// `control` is the discrete control at quadrature points: u_T for the fully
/// discrete scheme, the pointwise projection for the semi-discrete one.
/// Effectivity is left at zero; see effectivity_index.
ErrorReport exact_errors(const P1Space& space, const FeFunction& y, const FeFunction& p, const PointFunction& control,
                         const ExactSolution& exact, const ProblemData& data, const QuadRule& rule);

/// est_total / err_total
double effectivity_index(const EstimatorBreakdown& est, const ErrorReport& err);

/// `element_id value` lines.
void write_indicator(std::ostream& os, const IndicatorField& field);

}  // namespace afem
