#include "afem/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace afem {

using std::numbers::pi;

double corner_singularity(const Point& x, Eigen::Vector2d* gradient) {
  const double rho = x.norm();
  if (rho == 0.0) {
    if (gradient) gradient->setZero();
    return 0.0;
  }
  double omega = std::atan2(x.y(), x.x());
  if (omega < 0.0) omega += 2.0 * pi;
  if (gradient) {
    *gradient = (2.0 / 3.0) / std::cbrt(rho) * Eigen::Vector2d(-std::sin(omega / 3.0), std::cos(omega / 3.0));
  }
  return std::cbrt(rho * rho) * std::sin(2.0 * omega / 3.0);
}

ExactSolution ManufacturedCase::exact() const {
  const auto ev = evaluate;
  return {[ev](const Point& x) { return ev(x).y; }, [ev](const Point& x) { return ev(x).p; },
          [ev](const Point& x) { return ev(x).grad_y; }, [ev](const Point& x) { return ev(x).grad_p; }};
}

ManufacturedCase example1(int initial_levels) {
  ManufacturedCase c;
  c.name = "lshape";
  const double alpha = 0.1;
  const double a = 0.01;
  const double b = 5.0;
  c.evaluate = [=](const Point& x) {
    PointEval e;
    Eigen::Vector2d gs;
    const double s = corner_singularity(x, &gs);
    if (x.norm() == 0.0) {
      e.u = a;
      return e;
    }
    const double h = pi / 2.0;
    const double sy = std::sin(h * (x.y() + 1.0));
    const double cy = std::cos(h * (x.y() + 1.0));
    const double sx = std::sin(h * (x.x() + 1.0));
    const double cx = std::cos(h * (x.x() + 1.0));
    const double ay = std::cos(h * x.y());
    const double by = std::sin(h * x.y());

    const double phi_y = 3.0 * sy * sx;
    const Eigen::Vector2d grad_phi_y(3.0 * h * sy * cx, 3.0 * h * cy * sx);
    const double phi_p = 2.0 * ay * sx;
    const Eigen::Vector2d grad_phi_p(2.0 * h * ay * cx, -2.0 * h * by * sx);
    // both smooth factors satisfy lap(phi) = -(pi^2 / 2) phi; s is harmonic
    const double k = -pi * pi / 2.0;

    e.y = phi_y * s;
    e.p = phi_p * s;
    e.grad_y = s * grad_phi_y + phi_y * gs;
    e.grad_p = s * grad_phi_p + phi_p * gs;
    e.lap_y = k * phi_y * s + 2.0 * grad_phi_y.dot(gs);
    e.lap_p = k * phi_p * s + 2.0 * grad_phi_p.dot(gs);
    e.u = std::clamp(e.y * e.p / alpha, a, b);
    e.f = -e.lap_y + e.u * e.y;
    e.y_omega = e.y + e.lap_p - e.u * e.p;
    return e;
  };
  const auto ev = c.evaluate;
  c.data = {[ev](const Point& x) { return ev(x).f; }, [ev](const Point& x) { return ev(x).y_omega; }, alpha, a, b};
  c.initial_mesh = build_lshape(initial_levels);
  return c;
}

namespace {

double radical_inverse(unsigned i, unsigned base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (i > 0) {
    r += f * (i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

bool in_lshape(const Point& x, double margin) {
  if (std::abs(x.x()) > 1.0 - margin || std::abs(x.y()) > 1.0 - margin) return false;
  return !(x.x() > -margin && x.y() < margin);
}

std::string where(const Point& x) {
  std::ostringstream os;
  os.precision(6);
  os << "(" << x.x() << ", " << x.y() << ")";
  return os.str();
}

template <typename F>
double fd_laplacian(F&& g, const Point& x, double h) {
  return (g(Point(x + Point(h, 0))) + g(Point(x - Point(h, 0))) + g(Point(x + Point(0, h))) +
          g(Point(x - Point(0, h))) - 4.0 * g(x)) /
         (h * h);
}

template <typename F>
Eigen::Vector2d fd_gradient(F&& g, const Point& x, double h) {
  return {(g(Point(x + Point(h, 0))) - g(Point(x - Point(h, 0)))) / (2 * h),
          (g(Point(x + Point(0, h))) - g(Point(x - Point(0, h)))) / (2 * h)};
}

}  // namespace

VerifyReport verify_case(const ManufacturedCase& c) {
  VerifyReport r;
  const auto fail = [&](const std::string& what) {
    if (r.passed) r.failure = what;
    r.passed = false;
  };
  const auto& ev = c.evaluate;
  const auto y = [&](const Point& x) { return ev(x).y; };
  const auto p = [&](const Point& x) { return ev(x).p; };

  for (unsigned i = 1; r.points < 128 && i < 100000; ++i) {
    const Point x(2.0 * radical_inverse(i, 2) - 1.0, 2.0 * radical_inverse(i, 3) - 1.0);
    if (!in_lshape(x, 1e-3) || x.norm() <= 0.05) continue;
    ++r.points;
    const PointEval e = ev(x);

    const auto grad_check = [&](const char* name, const Eigen::Vector2d& analytic, const Eigen::Vector2d& fd) {
      const double err = (analytic - fd).norm() / std::max(analytic.norm(), 1.0);
      r.max_gradient_error = std::max(r.max_gradient_error, err);
      if (!(err <= 1e-6)) fail("gradient of " + std::string(name) + " at " + where(x) + ": relative error " + std::to_string(err));
    };
    grad_check("y", e.grad_y, fd_gradient(y, x, 1e-5));
    grad_check("p", e.grad_p, fd_gradient(p, x, 1e-5));

    const auto lap_check = [&](const char* name, double analytic, double fd) {
      const double err = std::abs(analytic - fd) / std::max(std::abs(analytic), 1.0);
      r.max_laplacian_error = std::max(r.max_laplacian_error, err);
      if (!(err <= 1e-4)) fail("laplacian of " + std::string(name) + " at " + where(x) + ": relative error " + std::to_string(err));
    };
    lap_check("y", e.lap_y, fd_laplacian(y, x, 1e-4));
    lap_check("p", e.lap_p, fd_laplacian(p, x, 1e-4));

    const double state = std::abs(-e.lap_y + e.u * e.y - e.f);
    const double adjoint = std::abs(-e.lap_p + e.u * e.p - (e.y - e.y_omega));
    const double control = std::abs(e.u - std::clamp(e.y * e.p / c.data.alpha, c.data.a, c.data.b));
    r.max_consistency = std::max({r.max_consistency, state, adjoint, control});
    if (!(std::max({state, adjoint, control}) <= 1e-8)) fail("optimality identities at " + where(x));
    if (!(e.u >= c.data.a && e.u <= c.data.b)) fail("control bounds at " + where(x));
  }
  if (r.points < 100) fail("fewer than 100 admissible sample points");

  // the eight boundary segments, counter-clockwise from the corner
  const std::vector<Point> corners = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}};
  for (std::size_t s = 0; s < corners.size(); ++s) {
    const Point& a = corners[s];
    const Point& b = corners[(s + 1) % corners.size()];
    for (int k = 0; k < 25; ++k) {
      const Point x = a + (k + 0.5) / 25.0 * (b - a);
      const PointEval e = ev(x);
      const double v = std::max(std::abs(e.y), std::abs(e.p));
      r.max_boundary_value = std::max(r.max_boundary_value, v);
      if (!(v <= 1e-10)) fail("boundary value at " + where(x));
    }
  }

  r.harmonicity = std::abs(fd_laplacian([](const Point& x) { return corner_singularity(x); }, Point(0.3, 0.4), 1e-5));
  if (!(r.harmonicity <= 1e-5)) fail("harmonicity of the corner factor at (0.3, 0.4)");
  return r;
}

double diagnostic_assumption(const ManufacturedCase& c, const P1Space& space, const FeFunction& y, const FeFunction& p,
                             const QuadRule& rule) {
  const Mesh& mesh = space.mesh();
  const Eigen::VectorXd yv = space.vertex_values(y.coefficients);
  const Eigen::VectorXd pv = space.vertex_values(p.coefficients);
  double sum = 0.0;
  for (Index t = 0; t < mesh.n_elements(); ++t) {
    const auto& v = mesh.element(t).vertices;
    const Eigen::Vector3d yt(yv(v[0]), yv(v[1]), yv(v[2]));
    const Eigen::Vector3d pt(pv(v[0]), pv(v[1]), pv(v[2]));
    const double area = geometry(mesh, t).area;
    for (Index q = 0; q < rule.size(); ++q) {
      const Eigen::Vector3d l = rule.barycentric.col(q);
      const PointEval e = c.evaluate(map_to_element(mesh, t, l));
      const double d = e.y * e.p - l.dot(yt) * l.dot(pt);
      sum += rule.weights(q) * area * d * d;
    }
  }
  return std::sqrt(sum);
}

Scheme parse_scheme(const std::string& s) {
  if (s == "fully") return Scheme::fully;
  if (s == "semi") return Scheme::semi;
  throw ConfigError("unknown scheme '" + s + "' (expected fully or semi)");
}

void RunConfig::validate() const {
  if (example == "cube") {
    throw ConfigError("example 'cube' is three-dimensional; only the two-dimensional example 'lshape' is available");
  }
  if (example != "lshape") throw ConfigError("unknown example '" + example + "'");
  if (!uniform && !(marking >= 0.0 && marking < 1.0)) throw ConfigError("marking must lie in [0, 1)");
  if (quad_degree < 1 || quad_degree > 20) throw ConfigError("quad_degree must lie in 1..20");
  if (criteria.max_iterations < 0) throw ConfigError("max_iters must be nonnegative");
  if (criteria.max_ndof <= 0) throw ConfigError("max_ndof must be positive");
  if (initial_levels < 0 || initial_levels > 12) throw ConfigError("initial_levels must lie in 0..12");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T out{};
  if (!(is >> out) || !(is >> std::ws).eof()) throw ConfigError("bad value for " + key + ": '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("bad value for " + key + ": '" + value + "'");
}

}  // namespace

RunConfig parse_config(std::istream& in, RunConfig c) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "scheme") {
      c.scheme = parse_scheme(value);
    } else if (key == "example") {
      c.example = value;
    } else if (key == "marking") {
      c.marking = parse_number<double>(key, value);
    } else if (key == "uniform") {
      c.uniform = parse_bool(key, value);
    } else if (key == "max_ndof") {
      c.criteria.max_ndof = static_cast<Index>(parse_number<double>(key, value));
    } else if (key == "max_iters") {
      c.criteria.max_iterations = parse_number<int>(key, value);
    } else if (key == "estimator_floor") {
      c.criteria.estimator_floor = parse_number<double>(key, value);
    } else if (key == "quad_degree") {
      c.quad_degree = parse_number<int>(key, value);
    } else if (key == "initial_levels") {
      c.initial_levels = parse_number<int>(key, value);
    } else if (key == "out") {
      c.out = value;
    } else {
      throw ConfigError("line " + std::to_string(number) + ": unknown key '" + key + "'");
    }
  }
  return c;
}

ManufacturedCase make_case(const RunConfig& config) {
  config.validate();
  return example1(config.initial_levels);
}

RateSummary fit_rates(const std::vector<LoopRecord>& records, std::size_t tail) {
  RateSummary s;
  s.tail = std::min(tail, records.size());
  if (s.tail < 2) return s;
  std::vector<std::pair<double, double>> y, p, u, total, est;
  for (const LoopRecord& r : records) {
    const double n = static_cast<double>(r.ndof);
    y.emplace_back(n, r.errors.err_y_h1);
    p.emplace_back(n, r.errors.err_p_h1);
    u.emplace_back(n, r.errors.err_u_l2);
    total.emplace_back(n, r.errors.err_total);
    est.emplace_back(n, r.estimator.est_total);
  }
  s.y = fit_rate(y, s.tail);
  s.p = fit_rate(p, s.tail);
  s.u = fit_rate(u, s.tail);
  s.total = fit_rate(total, s.tail);
  s.estimator = fit_rate(est, s.tail);
  return s;
}

void write_csv_header(std::ostream& os) {
  os << "iter,ndof,elements,err_y_h1,err_p_h1,err_u_l2,err_total,est_st,est_adj,est_ct,est_total,effectivity,"
        "newton_iters,wall_time_s\n";
}

void write_csv_row(std::ostream& os, const LoopRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%d,%ld,%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g\n",
                r.iteration, static_cast<long>(r.ndof), static_cast<long>(r.elements), r.errors.err_y_h1,
                r.errors.err_p_h1, r.errors.err_u_l2, r.errors.err_total, r.estimator.est_st, r.estimator.est_adj,
                r.estimator.est_ct, r.estimator.est_total, r.errors.effectivity, r.newton_iters, r.wall_time);
  os << buf;
}

void write_summary(std::ostream& os, const RunSummary& s) {
  char buf[256];
  os << "iterations " << s.records.size() << "\n";
  if (!s.records.empty()) {
    os << "final ndof " << s.records.back().ndof << "\n";
    std::snprintf(buf, sizeof buf, "final effectivity %.6g\n", s.records.back().errors.effectivity);
    os << buf;
  }
  if (s.rates.tail >= 2) {
    std::snprintf(buf, sizeof buf,
                  "slopes over last %zu iterations\n  err_y_h1  %.4f\n  err_p_h1  %.4f\n  err_u_l2  %.4f\n"
                  "  err_total %.4f\n  est_total %.4f\n",
                  s.rates.tail, s.rates.y, s.rates.p, s.rates.u, s.rates.total, s.rates.estimator);
    os << buf;
  }
  if (s.diverged) os << "diverged: " << s.diagnostic << "\n";
}

RunSummary run(const RunConfig& config, std::ostream* csv) { return run(make_case(config), config, csv); }

RunSummary run(const ManufacturedCase& c, const RunConfig& config, std::ostream* csv) {
  config.validate();
  const VerifyReport report = verify_case(c);
  if (!report.passed) throw VerificationError("manufactured case failed verification: " + report.failure);

  const ExactSolution exact = c.exact();
  LoopOptions options;
  options.scheme = config.scheme;
  options.fraction = config.effective_fraction();
  options.criteria = config.criteria;
  options.quad_degree = config.quad_degree;
  options.exact = &exact;
  if (csv) {
    write_csv_header(*csv);
    options.on_record = [csv](const LoopRecord& r) {
      write_csv_row(*csv, r);
      csv->flush();
    };
  }
  LoopResult loop = adaptive_loop(c.data, c.initial_mesh, options);
  RunSummary s;
  s.records = std::move(loop.records);
  s.diverged = loop.diverged;
  s.diagnostic = std::move(loop.diagnostic);
  s.rates = fit_rates(s.records);
  return s;
}

}  // namespace afem
