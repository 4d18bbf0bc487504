#include "afem/ocp.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>

namespace afem {

void ProblemData::validate() const {
  if (!f || !y_omega) throw std::invalid_argument("ProblemData: f and y_omega must be set");
  if (!(alpha > 0.0)) throw std::invalid_argument("ProblemData: alpha must be positive");
  if (!(a > 0.0) || !(a < b)) throw std::invalid_argument("ProblemData: bounds must satisfy 0 < a < b");
}

SampledData sample_data(const Mesh& mesh, const ProblemData& data, const QuadRule& rule) {
  return {rule, sample_field(mesh, data.f, rule), sample_field(mesh, data.y_omega, rule)};
}

double project_box(double v, double a, double b) {
  if (!(a < b)) throw std::invalid_argument("project_box: requires a < b");
  return std::min(b, std::max(v, a));
}

namespace {

Eigen::Vector3d gather(const Mesh& mesh, const Eigen::VectorXd& vertex_values, Index t) {
  const auto& v = mesh.element(t).vertices;
  return {vertex_values(v[0]), vertex_values(v[1]), vertex_values(v[2])};
}

struct Local {
  Eigen::Vector3d r1;
  Eigen::Vector3d r2;
  Eigen::Matrix3d j11, j12, j21, j22;
};

// Element contributions of the coupled state/adjoint residual without the
// load terms, and of its generalized Jacobian.
struct FullyKernel {
  const Mesh& mesh;
  const ProblemData& data;

  void operator()(Index t, const Eigen::Vector3d& y, const Eigen::Vector3d& p, Local& out, bool jacobian) const {
    const ElementGeometry geo = geometry(mesh, t);
    const Eigen::Matrix3d k = local_stiffness(geo);
    const Eigen::Matrix3d m = local_mass(geo.area);
    const Eigen::Vector3d g = m * y;
    const Eigen::Vector3d h = m * p;
    const double s = y.dot(h) / (data.alpha * geo.area);
    const double u = project_box(s, data.a, data.b);
    out.r1 = k * y + u * g;
    out.r2 = k * p + u * h - g;
    if (!jacobian) return;
    const double c = (data.a < s && s < data.b) ? 1.0 / (data.alpha * geo.area) : 0.0;
    out.j11 = k + u * m + c * g * h.transpose();
    out.j12 = c * g * g.transpose();
    out.j21 = -m + c * h * h.transpose();
    out.j22 = k + u * m + c * h * g.transpose();
  }
};

struct SemiKernel {
  const Mesh& mesh;
  const ProblemData& data;
  const QuadRule& rule;

  void operator()(Index t, const Eigen::Vector3d& y, const Eigen::Vector3d& p, Local& out, bool jacobian) const {
    const ElementGeometry geo = geometry(mesh, t);
    const Eigen::Matrix3d k = local_stiffness(geo);
    const Eigen::Matrix3d m = local_mass(geo.area);
    out.r1 = k * y;
    out.r2 = k * p - m * y;
    if (jacobian) {
      out.j11 = k;
      out.j12.setZero();
      out.j21 = -m;
      out.j22 = k;
    }
    for (Index q = 0; q < rule.size(); ++q) {
      const Eigen::Vector3d lambda = rule.barycentric.col(q);
      const double w = rule.weights(q) * geo.area;
      const double yq = lambda.dot(y);
      const double pq = lambda.dot(p);
      const double v = yq * pq / data.alpha;
      const double u = project_box(v, data.a, data.b);
      out.r1 += (w * u * yq) * lambda;
      out.r2 += (w * u * pq) * lambda;
      if (!jacobian) continue;
      const double c = (data.a < v && v < data.b) ? 1.0 / data.alpha : 0.0;
      const Eigen::Matrix3d ll = lambda * lambda.transpose();
      out.j11 += (w * (u + c * pq * yq)) * ll;
      out.j12 += (w * c * yq * yq) * ll;
      out.j21 += (w * c * pq * pq) * ll;
      out.j22 += (w * (u + c * yq * pq)) * ll;
    }
  }
};

struct NewtonResult {
  Eigen::VectorXd x;  // [y; p] on the free dofs
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> history;
  bool converged = false;
};

template <typename Kernel>
class CoupledSystem {
 public:
  CoupledSystem(const P1Space& space, Kernel kernel, Eigen::VectorXd f, Eigen::VectorXd g)
      : space_(space), kernel_(std::move(kernel)), f_(std::move(f)), g_(std::move(g)) {
    scale_ = std::max(f_.norm(), g_.norm());
    if (scale_ == 0.0) scale_ = 1.0;
  }

  Index n() const { return space_.n_dofs(); }

  Eigen::VectorXd residual(const Eigen::VectorXd& x) const { return evaluate(x, nullptr); }

  double kkt(const Eigen::VectorXd& r) const {
    return std::max(r.head(n()).norm(), r.tail(n()).norm()) / scale_;
  }

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x, std::vector<Eigen::Triplet<double>>* triplets) const {
    const Mesh& mesh = space_.mesh();
    const Index nd = n();
    const Eigen::VectorXd yv = space_.vertex_values(x.head(nd));
    const Eigen::VectorXd pv = space_.vertex_values(x.tail(nd));
    Eigen::VectorXd r(2 * nd);
    r.head(nd) = -f_;
    r.tail(nd) = g_;
    Local loc;
    for (Index t = 0; t < mesh.n_elements(); ++t) {
      kernel_(t, gather(mesh, yv, t), gather(mesh, pv, t), loc, triplets != nullptr);
      const auto& v = mesh.element(t).vertices;
      for (int i = 0; i < 3; ++i) {
        const Index di = space_.dof(v[static_cast<std::size_t>(i)]);
        if (di == kNoIndex) continue;
        r(di) += loc.r1(i);
        r(nd + di) += loc.r2(i);
        if (!triplets) continue;
        for (int j = 0; j < 3; ++j) {
          const Index dj = space_.dof(v[static_cast<std::size_t>(j)]);
          if (dj == kNoIndex) continue;
          triplets->emplace_back(di, dj, loc.j11(i, j));
          triplets->emplace_back(di, nd + dj, loc.j12(i, j));
          triplets->emplace_back(nd + di, dj, loc.j21(i, j));
          triplets->emplace_back(nd + di, nd + dj, loc.j22(i, j));
        }
      }
    }
    return r;
  }

 private:
  const P1Space& space_;
  Kernel kernel_;
  Eigen::VectorXd f_;
  Eigen::VectorXd g_;
  double scale_;
};

template <typename Kernel>
NewtonResult newton(const CoupledSystem<Kernel>& system, Eigen::VectorXd x, const NewtonOptions& options) {
  using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
  NewtonResult out;
  const Index size = 2 * system.n();
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd r = system.evaluate(x, &triplets);
  double res = system.kkt(r);
  out.history.push_back(res);

  Eigen::SparseLU<ColMatrix> lu;
  bool analyzed = false;
  int iter = 0;
  while (res > options.tolerance && iter < options.max_iterations) {
    ColMatrix jac(size, size);
    jac.setFromTriplets(triplets.begin(), triplets.end());
    if (!analyzed) {
      lu.analyzePattern(jac);
      analyzed = true;
    }
    lu.factorize(jac);
    if (lu.info() != Eigen::Success) break;
    const Eigen::VectorXd dx = lu.solve(-r);
    if (lu.info() != Eigen::Success || !dx.allFinite()) break;

    double step = 1.0;
    Eigen::VectorXd trial = x + dx;
    Eigen::VectorXd trial_r = system.residual(trial);
    double trial_res = system.kkt(trial_r);
    for (int h = 0; h < options.max_halvings && !(trial_res < res); ++h) {
      step *= 0.5;
      trial = x + step * dx;
      trial_r = system.residual(trial);
      trial_res = system.kkt(trial_r);
    }
    x = std::move(trial);
    ++iter;
    triplets.clear();
    r = system.evaluate(x, &triplets);
    res = system.kkt(r);
    out.history.push_back(res);
  }
  out.x = std::move(x);
  out.iterations = iter;
  out.residual = res;
  out.converged = res <= options.tolerance;
  return out;
}

struct Loads {
  Eigen::VectorXd f;
  Eigen::VectorXd g;
};

Loads loads(const P1Space& space, const ProblemData& data, const NewtonOptions& options, const SampledData* samples) {
  if (samples) {
    return {assemble_rhs(space, samples->f, samples->rule), assemble_rhs(space, samples->y_omega, samples->rule)};
  }
  const QuadRule rule = quad_rule(options.quad_degree);
  return {assemble_rhs(space, data.f, rule), assemble_rhs(space, data.y_omega, rule)};
}

Eigen::VectorXd cold_start(const P1Space& space, const ProblemData& data, const Loads& l) {
  const double u0 = 0.5 * (data.a + data.b);
  const Mesh& mesh = space.mesh();
  const SparseMatrix a = assemble_system(space, Eigen::VectorXd::Constant(mesh.n_elements(), u0));
  const Eigen::VectorXd y = solve_spd(a, l.f);
  const Eigen::VectorXd p = solve_spd(a, assemble_mass(space) * y - l.g);
  Eigen::VectorXd x(2 * space.n_dofs());
  x << y, p;
  return x;
}

Eigen::VectorXd warm_start(const P1Space& space, const FeFunction& y, const FeFunction& p) {
  if (y.space != SpaceKind::P1 || p.space != SpaceKind::P1 || y.coefficients.size() != space.n_dofs() ||
      p.coefficients.size() != space.n_dofs()) {
    throw std::invalid_argument("initial guess does not live on this mesh");
  }
  Eigen::VectorXd x(2 * space.n_dofs());
  x << y.coefficients, p.coefficients;
  return x;
}

}  // namespace

double control_semi(const P1Space& space, const FeFunction& y, const FeFunction& p, const ProblemData& data, Index t,
                    const Point& x) {
  const double yx = eval_p1(space, y, t, x).value;
  const double px = eval_p1(space, p, t, x).value;
  return project_box(yx * px / data.alpha, data.a, data.b);
}

FeFunction control_fully(const P1Space& space, const FeFunction& y, const FeFunction& p, const ProblemData& data) {
  const Mesh& mesh = space.mesh();
  const Eigen::VectorXd yv = space.vertex_values(y.coefficients);
  const Eigen::VectorXd pv = space.vertex_values(p.coefficients);
  Eigen::VectorXd u(mesh.n_elements());
  for (Index t = 0; t < mesh.n_elements(); ++t) {
    const double area = geometry(mesh, t).area;
    const double mean = gather(mesh, yv, t).dot(local_mass(area) * gather(mesh, pv, t)) / area;
    u(t) = project_box(mean / data.alpha, data.a, data.b);
  }
  return FeFunction::p0(std::move(u));
}

FullySolution solve_fully(const P1Space& space, const ProblemData& data, const NewtonOptions& options,
                          const FullySolution* init, const SampledData* samples) {
  data.validate();
  const Loads l = loads(space, data, options, samples);
  const CoupledSystem system(space, FullyKernel{space.mesh(), data}, l.f, l.g);
  Eigen::VectorXd x0 = init ? warm_start(space, init->y, init->p) : cold_start(space, data, l);
  NewtonResult res = newton(system, std::move(x0), options);

  const Index n = space.n_dofs();
  FeFunction y = FeFunction::p1(res.x.head(n));
  FeFunction p = FeFunction::p1(res.x.tail(n));
  FeFunction u = control_fully(space, y, p, data);
  if (!res.converged) {
    throw NewtonDivergence("solve_fully: no convergence, KKT residual " + std::to_string(res.residual), std::move(y),
                           std::move(p), std::move(u), std::move(res.history));
  }
  return {std::move(y), std::move(p), std::move(u), res.iterations, res.residual, std::move(res.history)};
}

SemiSolution solve_semi(const P1Space& space, const ProblemData& data, const NewtonOptions& options,
                        const SemiSolution* init, const SampledData* samples) {
  data.validate();
  const Loads l = loads(space, data, options, samples);
  const QuadRule rule = quad_rule(options.quad_degree);
  const CoupledSystem system(space, SemiKernel{space.mesh(), data, rule}, l.f, l.g);
  Eigen::VectorXd x0 = init ? warm_start(space, init->y, init->p) : cold_start(space, data, l);
  NewtonResult res = newton(system, std::move(x0), options);

  const Index n = space.n_dofs();
  FeFunction y = FeFunction::p1(res.x.head(n));
  FeFunction p = FeFunction::p1(res.x.tail(n));
  if (!res.converged) {
    throw NewtonDivergence("solve_semi: no convergence, KKT residual " + std::to_string(res.residual), std::move(y),
                           std::move(p), FeFunction::p0({}), std::move(res.history));
  }
  return {std::move(y), std::move(p), res.iterations, res.residual, std::move(res.history)};
}

double cost(const P1Space& space, const FeFunction& y, const std::function<double(const QuadPoint&)>& u,
            const ProblemData& data, const QuadRule& rule) {
  const Mesh& mesh = space.mesh();
  const Eigen::VectorXd yv = space.vertex_values(y.coefficients);
  double tracking = 0.0;
  double control = 0.0;
  for (Index t = 0; t < mesh.n_elements(); ++t) {
    const double area = geometry(mesh, t).area;
    const Eigen::Vector3d yt = gather(mesh, yv, t);
    for (Index q = 0; q < rule.size(); ++q) {
      const Eigen::Vector3d lambda = rule.barycentric.col(q);
      const QuadPoint qp{t, q, lambda, map_to_element(mesh, t, lambda)};
      const double w = rule.weights(q) * area;
      const double d = lambda.dot(yt) - data.y_omega(qp.x);
      const double uq = u(qp);
      tracking += w * d * d;
      control += w * uq * uq;
    }
  }
  return 0.5 * tracking + 0.5 * data.alpha * control;
}

double cost(const P1Space& space, const FullySolution& s, const ProblemData& data, const QuadRule& rule) {
  return cost(space, s.y, [&](const QuadPoint& q) { return s.u.coefficients(q.element); }, data, rule);
}

double cost(const P1Space& space, const SemiSolution& s, const ProblemData& data, const QuadRule& rule) {
  const Mesh& mesh = space.mesh();
  const Eigen::VectorXd yv = space.vertex_values(s.y.coefficients);
  const Eigen::VectorXd pv = space.vertex_values(s.p.coefficients);
  return cost(
      space, s.y,
      [&](const QuadPoint& q) {
        const double v = q.bary.dot(gather(mesh, yv, q.element)) * q.bary.dot(gather(mesh, pv, q.element));
        return project_box(v / data.alpha, data.a, data.b);
      },
      data, rule);
}

}  // namespace afem
