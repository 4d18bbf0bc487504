#include "afem/estimators.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace afem {

namespace {

Eigen::Vector3d gather(const Mesh& mesh, const Eigen::VectorXd& vertex_values, Index t) {
  const auto& v = mesh.element(t).vertices;
  return {vertex_values(v[0]), vertex_values(v[1]), vertex_values(v[2])};
}

QuadPoint point(const Mesh& mesh, Index t, Index q, const QuadRule& rule) {
  const Eigen::Vector3d lambda = rule.barycentric.col(q);
  return {t, q, lambda, map_to_element(mesh, t, lambda)};
}

}  // namespace

IndicatorField residual_indicator(const Mesh& mesh, const Eigen::VectorXd& z, const PointFunction& source,
                                  const PointFunction& coefficient, const QuadRule& rule, IndicatorTag tag) {
  const Index n = mesh.n_elements();
  std::vector<Eigen::Vector2d> grads(static_cast<std::size_t>(n));
  for (Index t = 0; t < n; ++t) grads[static_cast<std::size_t>(t)] = p1_gradient(mesh, z, t);

  IndicatorField out{tag, Eigen::VectorXd(n)};
  for (Index t = 0; t < n; ++t) {
    const ElementGeometry g = geometry(mesh, t);
    const Eigen::Vector3d zt = gather(mesh, z, t);
    double volume = 0.0;
    for (Index q = 0; q < rule.size(); ++q) {
      const QuadPoint qp = point(mesh, t, q, rule);
      const double r = source(qp) - coefficient(qp) * qp.bary.dot(zt);
      volume += rule.weights(q) * r * r;
    }
    volume *= g.area;
    double edges = 0.0;
    for (int i = 0; i < 3; ++i) {
      const Index s = mesh.neighbor(t, i);
      if (s == kNoIndex) continue;
      const auto k = static_cast<std::size_t>(i);
      const double jump = (grads[static_cast<std::size_t>(t)] - grads[static_cast<std::size_t>(s)]).dot(g.normals[k]);
      edges += g.edge_lengths[k] * jump * jump;
    }
    out.values(t) = std::sqrt(g.diameter * g.diameter * volume + g.diameter * edges);
  }
  return out;
}

PointFunction p0_coefficient(const FeFunction& u) {
  if (u.space != SpaceKind::P0) throw std::invalid_argument("p0_coefficient: expects a P0 function");
  return [c = u.coefficients](const QuadPoint& q) { return c(q.element); };
}

PointFunction field_coefficient(const ScalarField& g) {
  return [g](const QuadPoint& q) { return g(q.x); };
}

PointFunction sampled_coefficient(const Eigen::MatrixXd& samples) {
  return [&samples](const QuadPoint& q) { return samples(q.index, q.element); };
}

PointFunction semi_control_coefficient(const P1Space& space, const FeFunction& y, const FeFunction& p,
                                       const ProblemData& data) {
  return [&mesh = space.mesh(), yv = space.vertex_values(y.coefficients), pv = space.vertex_values(p.coefficients),
          alpha = data.alpha, a = data.a, b = data.b](const QuadPoint& q) {
    const double v = q.bary.dot(gather(mesh, yv, q.element)) * q.bary.dot(gather(mesh, pv, q.element));
    return project_box(v / alpha, a, b);
  };
}

IndicatorField indicator_state(const P1Space& space, const FeFunction& y, const PointFunction& u,
                               const PointFunction& f, const QuadRule& rule) {
  return residual_indicator(space.mesh(), space.vertex_values(y.coefficients), f, u, rule, IndicatorTag::state);
}

IndicatorField indicator_adjoint(const P1Space& space, const FeFunction& p, const FeFunction& y,
                                 const PointFunction& u, const PointFunction& y_omega, const QuadRule& rule) {
  const Mesh& mesh = space.mesh();
  const PointFunction source = [&mesh, &y_omega, yv = space.vertex_values(y.coefficients)](const QuadPoint& q) {
    return q.bary.dot(gather(mesh, yv, q.element)) - y_omega(q);
  };
  return residual_indicator(mesh, space.vertex_values(p.coefficients), source, u, rule, IndicatorTag::adjoint);
}

IndicatorField indicator_control(const P1Space& space, const FeFunction& y, const FeFunction& p, const FeFunction& u,
                                 const ProblemData& data, const QuadRule& rule) {
  if (u.space != SpaceKind::P0) {
    throw std::invalid_argument("indicator_control: defined for the fully discrete scheme only (P0 control)");
  }
  const Mesh& mesh = space.mesh();
  const PointFunction tilde = semi_control_coefficient(space, y, p, data);
  IndicatorField out{IndicatorTag::control, Eigen::VectorXd(mesh.n_elements())};
  for (Index t = 0; t < mesh.n_elements(); ++t) {
    double sum = 0.0;
    for (Index q = 0; q < rule.size(); ++q) {
      const double d = tilde(point(mesh, t, q, rule)) - u.coefficients(t);
      sum += rule.weights(q) * d * d;
    }
    out.values(t) = std::sqrt(sum * geometry(mesh, t).area);
  }
  return out;
}

namespace {

double oscillation_term(const Mesh& mesh, const PointFunction& g, Index t, const QuadRule& rule,
                        Eigen::VectorXd& values) {
  const ElementGeometry geo = geometry(mesh, t);
  for (Index q = 0; q < rule.size(); ++q) values(q) = g(point(mesh, t, q, rule));
  const double mean = rule.weights.dot(values);
  const double l2 = geo.area * rule.weights.dot((values.array() - mean).square().matrix());
  return geo.diameter * std::sqrt(l2);
}

}  // namespace

Eigen::VectorXd oscillation_terms(const Mesh& mesh, const PointFunction& g, const QuadRule& rule) {
  Eigen::VectorXd out(mesh.n_elements());
  Eigen::VectorXd values(rule.size());
  for (Index t = 0; t < mesh.n_elements(); ++t) out(t) = oscillation_term(mesh, g, t, rule, values);
  return out;
}

double oscillation(const Mesh& mesh, const PointFunction& g, const std::vector<Index>& elements, const QuadRule& rule) {
  Eigen::VectorXd values(rule.size());
  double sum = 0.0;
  for (Index t : elements) {
    const double term = oscillation_term(mesh, g, t, rule, values);
    sum += term * term;
  }
  return std::sqrt(sum);
}

double oscillation(const Mesh& mesh, const PointFunction& g, const QuadRule& rule) {
  return oscillation_terms(mesh, g, rule).norm();
}

EstimatorBreakdown breakdown(const IndicatorField& st, const IndicatorField& adj, const IndicatorField* ct) {
  EstimatorBreakdown b;
  b.est_st = st.global();
  b.est_adj = adj.global();
  b.est_ct = ct ? ct->global() : 0.0;
  b.est_total = std::sqrt(b.est_st * b.est_st + b.est_adj * b.est_adj + b.est_ct * b.est_ct);
  return b;
}

namespace {

IndicatorField total(const IndicatorField& st, const IndicatorField& adj, const IndicatorField* ct) {
  Eigen::ArrayXd sq = st.values.array().square() + adj.values.array().square();
  if (ct) sq += ct->values.array().square();
  return {IndicatorTag::total, sq.sqrt().matrix()};
}

struct DataFunctions {
  QuadRule rule;
  PointFunction f;
  PointFunction y_omega;
};

DataFunctions data_functions(const ProblemData& data, const QuadRule& rule, const SampledData* samples) {
  if (samples) return {samples->rule, sampled_coefficient(samples->f), sampled_coefficient(samples->y_omega)};
  return {rule, field_coefficient(data.f), field_coefficient(data.y_omega)};
}

}  // namespace

Estimate estimate(const P1Space& space, const FullySolution& s, const ProblemData& data, const QuadRule& rule,
                  const SampledData* samples) {
  const DataFunctions d = data_functions(data, rule, samples);
  const PointFunction u = p0_coefficient(s.u);
  Estimate e;
  e.state = indicator_state(space, s.y, u, d.f, d.rule);
  e.adjoint = indicator_adjoint(space, s.p, s.y, u, d.y_omega, d.rule);
  e.control = indicator_control(space, s.y, s.p, s.u, data, d.rule);
  e.total = total(e.state, e.adjoint, &e.control);
  e.breakdown = breakdown(e.state, e.adjoint, &e.control);
  return e;
}

Estimate estimate(const P1Space& space, const SemiSolution& s, const ProblemData& data, const QuadRule& rule,
                  const SampledData* samples) {
  const DataFunctions d = data_functions(data, rule, samples);
  const PointFunction u = semi_control_coefficient(space, s.y, s.p, data);
  Estimate e;
  e.state = indicator_state(space, s.y, u, d.f, d.rule);
  e.adjoint = indicator_adjoint(space, s.p, s.y, u, d.y_omega, d.rule);
  e.control = {IndicatorTag::control, Eigen::VectorXd::Zero(space.mesh().n_elements())};
  e.total = total(e.state, e.adjoint, nullptr);
  e.breakdown = breakdown(e.state, e.adjoint, nullptr);
  return e;
}

ErrorReport exact_errors(const P1Space& space, const FeFunction& y, const FeFunction& p, const PointFunction& control,
                         const ExactSolution& exact, const ProblemData& data, const QuadRule& rule) {
  const Mesh& mesh = space.mesh();
  const Index n = mesh.n_elements();
  const Eigen::VectorXd yv = space.vertex_values(y.coefficients);
  const Eigen::VectorXd pv = space.vertex_values(p.coefficients);
  ErrorReport r;
  r.element_y = Eigen::VectorXd::Zero(n);
  r.element_p = Eigen::VectorXd::Zero(n);
  r.element_u = Eigen::VectorXd::Zero(n);
  for (Index t = 0; t < n; ++t) {
    const double area = geometry(mesh, t).area;
    const Eigen::Vector2d gy = p1_gradient(mesh, yv, t);
    const Eigen::Vector2d gp = p1_gradient(mesh, pv, t);
    for (Index q = 0; q < rule.size(); ++q) {
      const QuadPoint qp = point(mesh, t, q, rule);
      const double w = rule.weights(q) * area;
      const double u = project_box(exact.y(qp.x) * exact.p(qp.x) / data.alpha, data.a, data.b);
      r.element_y(t) += w * (exact.grad_y(qp.x) - gy).squaredNorm();
      r.element_p(t) += w * (exact.grad_p(qp.x) - gp).squaredNorm();
      r.element_u(t) += w * std::pow(u - control(qp), 2);
    }
  }
  r.err_y_h1 = std::sqrt(r.element_y.sum());
  r.err_p_h1 = std::sqrt(r.element_p.sum());
  r.err_u_l2 = std::sqrt(r.element_u.sum());
  r.err_total = std::sqrt(r.element_y.sum() + r.element_p.sum() + r.element_u.sum());
  return r;
}

double effectivity_index(const EstimatorBreakdown& est, const ErrorReport& err) {
  if (err.err_total == 0.0) return std::numeric_limits<double>::infinity();
  return est.est_total / err.err_total;
}

void write_indicator(std::ostream& os, const IndicatorField& field) {
  const auto old = os.precision(17);
  for (Index t = 0; t < field.values.size(); ++t) os << t << ' ' << field.values(t) << '\n';
  os.precision(old);
}

}  // namespace afem
