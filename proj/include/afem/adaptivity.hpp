#pragma once

#include "afem/estimators.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace afem {

enum class Scheme { fully, semi };

struct StoppingCriteria {
  int max_iterations = 40;   ///< number of refinements
  Index max_ndof = 200000;   ///< no mesh above this is solved
  double estimator_floor = 1e-10;
};

struct LoopRecord {
  int iteration = 0;
  Index ndof = 0;
  Index elements = 0;
  ErrorReport errors;  ///< zero unless an exact solution was supplied
  EstimatorBreakdown estimator;
  double osc_f = 0.0;
  double osc_y_omega = 0.0;
  int newton_iters = 0;
  double wall_time = 0.0;
};

/// 2 dim P1 + dim P0 for the fully discrete scheme, 2 dim P1 otherwise.
Index scheme_ndof(Scheme scheme, const Mesh& mesh);

/// {T : E_T^2 > fraction max E^2}. A fraction of zero marks every element.
std::vector<Index> mark_max(const IndicatorField& indicators, double fraction = 0.5);

/// Least-squares slope of log(value) against log(ndof) over the last `tail`
/// points.
double fit_rate(const std::vector<std::pair<double, double>>& points, std::size_t tail);

/// Nodal values on the refined mesh: new vertices take the mean of their
/// parent edge.
Eigen::VectorXd prolong_p1(const Mesh& fine, const Eigen::VectorXd& coarse_vertex_values);
/// Children copy the parent value.
Eigen::VectorXd prolong_p0(const Mesh& fine, const Eigen::VectorXd& coarse_values);

struct LoopOptions {
  Scheme scheme = Scheme::fully;
  double fraction = 0.5;
  StoppingCriteria criteria;
  int quad_degree = 19;
  NewtonOptions newton;
  /// When set, every record carries exact errors and effectivity.
  const ExactSolution* exact = nullptr;
  std::function<void(const LoopRecord&)> on_record;
  /// Called with the mesh and indicators of every solved iteration.
  std::function<void(const Mesh&, const Estimate&, const LoopRecord&)> on_iteration;
};

struct LoopResult {
  std::vector<LoopRecord> records;
  bool diverged = false;
  std::string diagnostic;
};

LoopResult adaptive_loop(const ProblemData& data, const Mesh& initial, const LoopOptions& options);

}  // namespace afem
