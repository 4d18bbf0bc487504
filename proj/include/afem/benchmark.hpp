#pragma once

#include "afem/adaptivity.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace afem {

/// Everything known in closed form at one point.
struct PointEval {
  double y = 0.0;
  double p = 0.0;
  Eigen::Vector2d grad_y = Eigen::Vector2d::Zero();
  Eigen::Vector2d grad_p = Eigen::Vector2d::Zero();
  double lap_y = 0.0;
  double lap_p = 0.0;
  double u = 0.0;
  double f = 0.0;
  double y_omega = 0.0;
};

/// Optimal state and adjoint chosen first; control, source and desired state
/// derived from them.
struct ManufacturedCase {
  std::string name;
  ProblemData data;  ///< f and y_omega read from `evaluate`
  std::function<PointEval(const Point&)> evaluate;
  Mesh initial_mesh;

  ExactSolution exact() const;
};

/// Smooth factor times r^(2/3) sin(2 w / 3), w in [0, 3 pi / 2], on the
/// L-shape (-1,1)^2 minus [0,1) x (-1,0]. alpha = 0.1, bounds [0.01, 5].
ManufacturedCase example1(int initial_levels = 2);

/// r^(2/3) sin(2 w / 3) with w in [0, 2 pi), together with its gradient.
double corner_singularity(const Point& x, Eigen::Vector2d* gradient = nullptr);

struct VerifyReport {
  bool passed = true;
  std::string failure;  ///< first failed check, naming point and quantity
  int points = 0;
  double max_gradient_error = 0.0;
  double max_laplacian_error = 0.0;
  double max_consistency = 0.0;
  double max_boundary_value = 0.0;
  double harmonicity = 0.0;
};

/// Finite-difference oracle on quasi-random interior points with r > 0.05:
/// gradients (h = 1e-5, 1e-6 relative), Laplacians (5-point, h = 1e-4, 1e-4
/// relative), the state and adjoint identities (1e-8), boundary values
/// (1e-10), control bounds, and harmonicity of the corner factor.
VerifyReport verify_case(const ManufacturedCase& c);

/// |y p - y_h p_h|_{L2}
double diagnostic_assumption(const ManufacturedCase& c, const P1Space& space, const FeFunction& y, const FeFunction& p,
                             const QuadRule& rule);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  Scheme scheme = Scheme::fully;
  std::string example = "lshape";
  double marking = 0.5;
  bool uniform = false;
  StoppingCriteria criteria;
  int quad_degree = 19;
  int initial_levels = 2;
  std::string out;  ///< CSV path; empty writes nothing

  double effective_fraction() const { return uniform ? 0.0 : marking; }
  /// Throws ConfigError.
  void validate() const;
};

/// `key = value` lines with `#` comments, applied on top of `base`.
RunConfig parse_config(std::istream& in, RunConfig base = {});
Scheme parse_scheme(const std::string& s);

ManufacturedCase make_case(const RunConfig& config);

struct RateSummary {
  double y = 0.0;
  double p = 0.0;
  double u = 0.0;
  double total = 0.0;
  double estimator = 0.0;
  std::size_t tail = 0;
};

RateSummary fit_rates(const std::vector<LoopRecord>& records, std::size_t tail = 6);

struct RunSummary {
  std::vector<LoopRecord> records;
  RateSummary rates;
  bool diverged = false;
  std::string diagnostic;
};

class VerificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_csv_header(std::ostream& os);
void write_csv_row(std::ostream& os, const LoopRecord& r);
void write_summary(std::ostream& os, const RunSummary& s);

/// Verifies the case, then runs the adaptive loop. Rows go to `csv` as they
/// are produced. Throws VerificationError or ConfigError.
RunSummary run(const RunConfig& config, std::ostream* csv = nullptr);
RunSummary run(const ManufacturedCase& c, const RunConfig& config, std::ostream* csv = nullptr);

}  // namespace afem
