#include "afem/adaptivity.hpp"

#include <chrono>
#include <cmath>
#include <optional>

namespace afem {

Index scheme_ndof(Scheme scheme, const Mesh& mesh) {
  Index interior = 0;
  for (Index v = 0; v < mesh.n_vertices(); ++v) interior += !mesh.is_boundary_vertex(v);
  return 2 * interior + (scheme == Scheme::fully ? mesh.n_elements() : 0);
}

std::vector<Index> mark_max(const IndicatorField& indicators, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("mark_max: fraction must lie in [0, 1)");
  const Eigen::VectorXd& e = indicators.values;
  if (e.size() == 0) throw std::invalid_argument("mark_max: no elements");
  std::vector<Index> marked;
  if (fraction == 0.0) {
    marked.resize(static_cast<std::size_t>(e.size()));
    for (Index t = 0; t < e.size(); ++t) marked[static_cast<std::size_t>(t)] = t;
    return marked;
  }
  const double threshold = fraction * e.array().square().maxCoeff();
  for (Index t = 0; t < e.size(); ++t) {
    if (e(t) * e(t) > threshold) marked.push_back(t);
  }
  return marked;
}

double fit_rate(const std::vector<std::pair<double, double>>& points, std::size_t tail) {
  if (tail < 2 || tail > points.size()) throw std::invalid_argument("fit_rate: need 2 <= tail <= number of points");
  const auto first = points.end() - static_cast<std::ptrdiff_t>(tail);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto it = first; it != points.end(); ++it) {
    if (!(it->first > 0.0) || !(it->second > 0.0)) throw std::invalid_argument("fit_rate: values must be positive");
    const double x = std::log(it->first);
    const double y = std::log(it->second);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(tail);
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("fit_rate: ndof values coincide");
  return (n * sxy - sx * sy) / denom;
}

Eigen::VectorXd prolong_p1(const Mesh& fine, const Eigen::VectorXd& coarse) {
  if (coarse.size() != fine.n_inherited_vertices()) throw std::invalid_argument("prolong_p1: size mismatch");
  Eigen::VectorXd out(fine.n_vertices());
  out.head(coarse.size()) = coarse;
  for (Index v = coarse.size(); v < fine.n_vertices(); ++v) {
    const auto& [a, b] = fine.vertex_parents(v);
    out(v) = 0.5 * (out(a) + out(b));
  }
  return out;
}

Eigen::VectorXd prolong_p0(const Mesh& fine, const Eigen::VectorXd& coarse) {
  Eigen::VectorXd out(fine.n_elements());
  for (Index t = 0; t < fine.n_elements(); ++t) out(t) = coarse(fine.parent(t));
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Iterate {
  std::optional<FullySolution> fully;
  std::optional<SemiSolution> semi;
};

FeFunction prolong(const P1Space& coarse, const P1Space& fine, const FeFunction& f) {
  return FeFunction::p1(fine.restrict(prolong_p1(fine.mesh(), coarse.vertex_values(f.coefficients))));
}

}  // namespace

LoopResult adaptive_loop(const ProblemData& data, const Mesh& initial, const LoopOptions& options) {
  data.validate();
  const StoppingCriteria& stop = options.criteria;
  const QuadRule rule = quad_rule(options.quad_degree);
  LoopResult result;

  Mesh mesh = initial;
  Iterate previous;
  std::optional<P1Space> previous_space;
  std::optional<Mesh> previous_mesh;

  for (int iteration = 0;; ++iteration) {
    const auto start = Clock::now();
    const P1Space space(mesh);
    const SampledData samples = sample_data(mesh, data, rule);

    LoopRecord record;
    record.iteration = iteration;
    record.ndof = scheme_ndof(options.scheme, mesh);
    record.elements = mesh.n_elements();

    Iterate current;
    Estimate est;
    try {
      if (options.scheme == Scheme::fully) {
        std::optional<FullySolution> init;
        if (previous.fully) {
          init.emplace();
          init->y = prolong(*previous_space, space, previous.fully->y);
          init->p = prolong(*previous_space, space, previous.fully->p);
          init->u = FeFunction::p0(prolong_p0(mesh, previous.fully->u.coefficients));
        }
        current.fully = solve_fully(space, data, options.newton, init ? &*init : nullptr, &samples);
        record.newton_iters = current.fully->newton_iters;
        est = estimate(space, *current.fully, data, rule, &samples);
      } else {
        std::optional<SemiSolution> init;
        if (previous.semi) {
          init.emplace();
          init->y = prolong(*previous_space, space, previous.semi->y);
          init->p = prolong(*previous_space, space, previous.semi->p);
        }
        current.semi = solve_semi(space, data, options.newton, init ? &*init : nullptr, &samples);
        record.newton_iters = current.semi->newton_iters;
        est = estimate(space, *current.semi, data, rule, &samples);
      }
    } catch (const NewtonDivergence& e) {
      result.diverged = true;
      result.diagnostic = "iteration " + std::to_string(iteration) + " (" + std::to_string(record.ndof) +
                          " dofs): " + e.what();
      return result;
    }
    record.estimator = est.breakdown;
    record.osc_f = oscillation(mesh, sampled_coefficient(samples.f), rule);
    record.osc_y_omega = oscillation(mesh, sampled_coefficient(samples.y_omega), rule);

    if (options.exact) {
      const PointFunction control = current.fully ? p0_coefficient(current.fully->u)
                                                  : semi_control_coefficient(space, current.semi->y,
                                                                             current.semi->p, data);
      const FeFunction& y = current.fully ? current.fully->y : current.semi->y;
      const FeFunction& p = current.fully ? current.fully->p : current.semi->p;
      record.errors = exact_errors(space, y, p, control, *options.exact, data, rule);
      record.errors.effectivity = effectivity_index(record.estimator, record.errors);
    }
    record.wall_time = std::chrono::duration<double>(Clock::now() - start).count();

    result.records.push_back(record);
    if (options.on_record) options.on_record(record);
    if (options.on_iteration) options.on_iteration(mesh, est, record);

    if (iteration >= stop.max_iterations || record.estimator.est_total <= stop.estimator_floor) break;
    const std::vector<Index> marked = mark_max(est.total, options.fraction);
    if (marked.empty()) break;
    Mesh next = refine(mesh, marked);
    if (scheme_ndof(options.scheme, next) > stop.max_ndof) break;

    previous = std::move(current);
    previous_mesh = std::move(mesh);
    previous_space.emplace(*previous_mesh);
    mesh = std::move(next);
  }
  return result;
}

}  // namespace afem
