#include "afem/estimators.hpp"

#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace afem;
using std::numbers::pi;

namespace {

const PointFunction zero = [](const QuadPoint&) { return 0.0; };

Eigen::VectorXd interpolate(const Mesh& mesh, const ScalarField& g) {
  Eigen::VectorXd v(mesh.n_vertices());
  for (Index i = 0; i < mesh.n_vertices(); ++i) v(i) = g(mesh.vertex(i));
  return v;
}

// Iterated 1D Gauss-Legendre over a triangle (a, b, c): x = a + s (b - a) + s t (c - b).
template <typename F>
double iterated_gauss(const Point& a, const Point& b, const Point& c, F&& f) {
  static const auto nodes = [] {
    // 20-point Gauss-Legendre on [0, 1] via Newton on P_20
    std::vector<std::pair<double, double>> out;
    const int n = 20;
    for (int i = 1; i <= n; ++i) {
      double x = std::cos(pi * (i - 0.25) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double pk = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = pk;
        }
        dp = n * (x * p1 - p0) / (x * x - 1);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      out.emplace_back(0.5 * (x + 1), 1.0 / ((1 - x * x) * dp * dp));
    }
    return out;
  }();
  const double jac = std::abs((b - a).x() * (c - b).y() - (b - a).y() * (c - b).x());
  double sum = 0.0;
  for (const auto& [s, ws] : nodes) {
    for (const auto& [t, wt] : nodes) sum += ws * wt * s * f(Point(a + s * (b - a) + s * t * (c - b)));
  }
  return sum * jac;
}

// Centroid rule on n^2 congruent subtriangles.
template <typename F>
double subdivided_centroid(const Point& a, const Point& b, const Point& c, int n, F&& f) {
  const Point e1 = (b - a) / n;
  const Point e2 = (c - a) / n;
  const double area = 0.5 * std::abs(e1.x() * e2.y() - e1.y() * e2.x());
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; i + j < n; ++j) {
      const Point o = a + i * e1 + j * e2;
      sum += f(Point(o + (e1 + e2) / 3.0));
      if (i + j + 1 < n) sum += f(Point(o + 2.0 * (e1 + e2) / 3.0));
    }
  }
  return sum * area;
}

}  // namespace

TEST_CASE("residual indicator closed forms") {
  const QuadRule rule = quad_rule(19);
  const Mesh m = build_lshape(2);

  const IndicatorField z = residual_indicator(m, Eigen::VectorXd::Zero(m.n_vertices()), zero, zero, rule);
  CHECK(z.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.global() == 0.0);

  // linear z has no jumps; the residual is c on element 7 only
  const Eigen::VectorXd linear = interpolate(m, [](const Point& x) { return 3.0 * x.x() - x.y() + 2.0; });
  const double c = 1.75;
  const PointFunction coeff = [](const QuadPoint&) { return 0.0; };
  const PointFunction source = [&](const QuadPoint& q) { return q.element == 7 ? c : 0.0; };
  const IndicatorField e = residual_indicator(m, linear, source, coeff, rule, IndicatorTag::state);
  CHECK(e.tag == IndicatorTag::state);
  const ElementGeometry g = geometry(m, 7);
  for (Index t = 0; t < m.n_elements(); ++t) {
    if (t == 7) {
      CHECK(e.values(t) * e.values(t) == doctest::Approx(g.diameter * g.diameter * c * c * g.area).epsilon(1e-13));
    } else {
      CHECK(e.values(t) <= 1e-13);
    }
  }

  // tent on the diamond: both elements see h_T |S| jump^2 with jump 2, |S| 2, h_T 2
  const Mesh d({{-1, 0}, {0, -1}, {1, 0}, {0, 1}}, {{{0, 1, 3}, 1}, {{1, 2, 3}, 0}});
  const Eigen::VectorXd tent = interpolate(d, [](const Point& x) { return 1.0 - std::abs(x.x()); });
  const IndicatorField j = residual_indicator(d, tent, zero, zero, rule);
  CHECK(j.values(0) * j.values(0) == doctest::Approx(2.0 * 2.0 * 4.0).epsilon(1e-14));
  CHECK(j.values(1) == doctest::Approx(j.values(0)).epsilon(1e-14));
}

TEST_CASE("volume term scales with h under two bisections") {
  const QuadRule rule = quad_rule(19);
  const PointFunction g = [](const QuadPoint& q) { return std::exp(q.x.x()) + q.x.y() * q.x.y(); };
  const Mesh coarse = build_lshape(2);
  const Mesh mid = refine_uniform(coarse);
  const Mesh fine = refine_uniform(mid);
  const IndicatorField ec = residual_indicator(coarse, Eigen::VectorXd::Zero(coarse.n_vertices()), g, zero, rule);
  const IndicatorField ef = residual_indicator(fine, Eigen::VectorXd::Zero(fine.n_vertices()), g, zero, rule);
  Eigen::VectorXd children = Eigen::VectorXd::Zero(coarse.n_elements());
  for (Index t = 0; t < fine.n_elements(); ++t) children(mid.parent(fine.parent(t))) += ef.values(t) * ef.values(t);
  for (Index t = 0; t < coarse.n_elements(); ++t) {
    CHECK(children(t) == doctest::Approx(0.25 * ec.values(t) * ec.values(t)).epsilon(1e-12));
  }
}

TEST_CASE("generic kernel: P0 and pointwise constant coefficients agree") {
  const QuadRule rule = quad_rule(19);
  const Mesh m = refine(build_lshape(2), {3, 4, 11});
  const P1Space space(m);
  Eigen::VectorXd c(space.n_dofs());
  for (Index i = 0; i < c.size(); ++i) c(i) = std::sin(1.0 + i);
  const FeFunction y = FeFunction::p1(c);
  Eigen::VectorXd uc(m.n_elements());
  for (Index t = 0; t < uc.size(); ++t) uc(t) = 0.5 + 0.1 * t;
  const PointFunction pointwise = [](const QuadPoint& q) { return 0.5 + 0.1 * q.element; };
  const PointFunction f = [](const QuadPoint& q) { return q.x.x() - q.x.y(); };
  const IndicatorField a = indicator_state(space, y, p0_coefficient(FeFunction::p0(uc)), f, rule);
  const IndicatorField b = indicator_state(space, y, pointwise, f, rule);
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK_THROWS_AS(p0_coefficient(y), std::invalid_argument);
}

TEST_CASE("adjoint indicator") {
  const QuadRule rule = quad_rule(19);
  const Mesh m = build_unit_square(6);
  const P1Space space(m);
  Eigen::VectorXd c(space.n_dofs());
  for (Index i = 0; i < c.size(); ++i) c(i) = std::cos(0.3 * i);
  const FeFunction y = FeFunction::p1(c);
  const FeFunction p0 = FeFunction::p1(Eigen::VectorXd::Zero(space.n_dofs()));
  const Eigen::VectorXd yv = space.vertex_values(c);
  const PointFunction y_at = [&](const QuadPoint& q) {
    const auto& v = m.element(q.element).vertices;
    return q.bary(0) * yv(v[0]) + q.bary(1) * yv(v[1]) + q.bary(2) * yv(v[2]);
  };
  const PointFunction u = [](const QuadPoint&) { return 0.3; };

  const IndicatorField e = indicator_adjoint(space, p0, y, u, y_at, rule);
  CHECK(e.tag == IndicatorTag::adjoint);
  CHECK(e.values.cwiseAbs().maxCoeff() <= 1e-14);

  // shifting y_omega by a constant on one element mirrors the state closed form
  const double shift = 0.8;
  const PointFunction shifted = [&](const QuadPoint& q) { return y_at(q) - (q.element == 5 ? shift : 0.0); };
  const IndicatorField s = indicator_adjoint(space, p0, y, u, shifted, rule);
  const ElementGeometry g = geometry(m, 5);
  CHECK(s.values(5) * s.values(5) == doctest::Approx(g.diameter * g.diameter * shift * shift * g.area).epsilon(1e-13));
  CHECK(s.values.sum() == doctest::Approx(s.values(5)).epsilon(1e-12));
}

TEST_CASE("control indicator") {
  const QuadRule rule = quad_rule(19);
  const Mesh m = build_unit_square(4);
  const P1Space space(m);
  // y = 1, p = x at interior vertices: y p = x on elements away from the boundary
  const FeFunction y = FeFunction::p1(Eigen::VectorXd::Ones(space.n_dofs()));
  const FeFunction p = FeFunction::p1(space.restrict(interpolate(m, [](const Point& x) { return x.x(); })));
  std::vector<Index> inner;
  for (Index t = 0; t < m.n_elements(); ++t) {
    bool all = true;
    for (Index v : m.element(t).vertices) all = all && !m.is_boundary_vertex(v);
    if (all) inner.push_back(t);
  }
  REQUIRE(!inner.empty());

  SUBCASE("inactive bounds match the second central moment") {
    const ProblemData data{nullptr, nullptr, 1.0, 0.01, 5.0};
    const FeFunction u = control_fully(space, y, p, data);
    const IndicatorField e = indicator_control(space, y, p, u, data, rule);
    CHECK(e.tag == IndicatorTag::control);
    for (Index t : inner) {
      const auto& v = m.element(t).vertices;
      double sum = 0.0;
      for (Index a : v) sum += m.vertex(a).x();
      const double area = geometry(m, t).area;
      const double mean = sum / 3.0;
      // int x^2 = A/12 (sum x_i^2 + (sum x_i)^2)
      double sq = 0.0;
      for (Index a : v) sq += m.vertex(a).x() * m.vertex(a).x();
      const double second = area / 12.0 * (sq + sum * sum) - area * mean * mean;
      CHECK(u.coefficients(t) == doctest::Approx(mean).epsilon(1e-14));
      CHECK(e.values(t) * e.values(t) == doctest::Approx(second).epsilon(1e-12));
    }
  }
  SUBCASE("active upper bound against a subdivided oracle") {
    const ProblemData data{nullptr, nullptr, 1.0, 0.01, 0.45};
    const FeFunction u = control_fully(space, y, p, data);
    const IndicatorField e = indicator_control(space, y, p, u, data, rule);
    int kinked = 0;
    for (Index t : inner) {
      const auto& v = m.element(t).vertices;
      const double ut = u.coefficients(t);
      const double oracle = subdivided_centroid(m.vertex(v[0]), m.vertex(v[1]), m.vertex(v[2]), 400, [&](const Point& x) {
        return std::pow(std::clamp(x.x(), 0.01, 0.45) - ut, 2);
      });
      double lo = 1, hi = 0;
      for (Index a : v) {
        lo = std::min(lo, m.vertex(a).x());
        hi = std::max(hi, m.vertex(a).x());
      }
      kinked += (lo < 0.45 && hi > 0.45);
      CHECK(e.values(t) * e.values(t) == doctest::Approx(oracle).epsilon(1e-3));
    }
    CHECK(kinked > 0);
  }
  SUBCASE("zero product at the lower bound") {
    const ProblemData data{nullptr, nullptr, 0.1, 0.01, 5.0};
    const FeFunction z = FeFunction::p1(Eigen::VectorXd::Zero(space.n_dofs()));
    const FeFunction u = FeFunction::p0(Eigen::VectorXd::Constant(m.n_elements(), 0.01));
    CHECK(indicator_control(space, z, z, u, data, rule).values.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("semi-discrete control is rejected") {
    const ProblemData data{nullptr, nullptr, 0.1, 0.01, 5.0};
    CHECK_THROWS_AS(indicator_control(space, y, p, y, data, rule), std::invalid_argument);
  }
}

TEST_CASE("oscillation") {
  const QuadRule rule = quad_rule(19);
  const Mesh ref({{0, 0}, {1, 0}, {0, 1}}, {{{0, 1, 2}, 0}});
  CHECK(oscillation(ref, [](const QuadPoint&) { return 4.0; }, rule) <= 1e-13);
  const double osc = oscillation(ref, [](const QuadPoint& q) { return q.x.x(); }, rule);
  CHECK(osc * osc == doctest::Approx(1.0 / 18.0).epsilon(1e-13));

  const Mesh m = build_lshape(3);
  const PointFunction g = [](const QuadPoint& q) { return std::sin(3 * q.x.x()) * q.x.y(); };
  std::vector<Index> m1, m2, all;
  for (Index t = 0; t < m.n_elements(); ++t) {
    (t % 3 == 0 ? m1 : m2).push_back(t);
    all.push_back(t);
  }
  const double o1 = oscillation(m, g, m1, rule);
  const double o2 = oscillation(m, g, m2, rule);
  CHECK(std::pow(oscillation(m, g, all, rule), 2) == doctest::Approx(o1 * o1 + o2 * o2).epsilon(1e-13));
  CHECK(oscillation(m, g, all, rule) == doctest::Approx(oscillation(m, g, rule)).epsilon(1e-15));
}

TEST_CASE("estimates of both schemes add up") {
  const QuadRule rule = quad_rule(19);
  const Mesh m = refine(build_lshape(3), {0, 1, 2, 3, 20});
  const P1Space space(m);
  const ProblemData data{[](const Point& x) { return 20.0 * std::exp(-4.0 * x.squaredNorm()); },
                         [](const Point& x) { return -3.0 + x.x(); }, 0.1, 0.5, 2.0};
  const SampledData samples = sample_data(m, data, rule);

  const FullySolution fs = solve_fully(space, data, {}, nullptr, &samples);
  const Estimate e = estimate(space, fs, data, rule);
  const EstimatorBreakdown& b = e.breakdown;
  CHECK(b.est_ct > 0.0);
  CHECK(b.est_total * b.est_total ==
        doctest::Approx(b.est_st * b.est_st + b.est_adj * b.est_adj + b.est_ct * b.est_ct).epsilon(1e-14));
  CHECK(e.total.values.squaredNorm() == doctest::Approx(b.est_total * b.est_total).epsilon(1e-12));
  CHECK((e.total.values.array() >= 0).all());
  const Estimate es = estimate(space, fs, data, rule, &samples);
  CHECK(es.breakdown.est_total == doctest::Approx(b.est_total).epsilon(1e-14));

  const SemiSolution ss = solve_semi(space, data);
  const Estimate s = estimate(space, ss, data, rule, &samples);
  CHECK(s.breakdown.est_ct == 0.0);
  CHECK(s.breakdown.est_total * s.breakdown.est_total ==
        doctest::Approx(std::pow(s.breakdown.est_st, 2) + std::pow(s.breakdown.est_adj, 2)).epsilon(1e-14));
  CHECK(s.total.values.squaredNorm() == doctest::Approx(std::pow(s.breakdown.est_total, 2)).epsilon(1e-12));

  std::ostringstream os;
  write_indicator(os, e.total);
  std::istringstream is(os.str());
  Index id;
  double value;
  REQUIRE(static_cast<bool>(is >> id >> value));
  CHECK(id == 0);
  CHECK(value == doctest::Approx(e.total.values(0)).epsilon(1e-15));
}

TEST_CASE("exact errors") {
  const QuadRule rule = quad_rule(19);
  const ProblemData data{nullptr, nullptr, 0.1, 0.01, 5.0};

  SUBCASE("representable exact solution") {
    const Mesh m = build_unit_square(3);
    const P1Space space(m);
    const FeFunction z = FeFunction::p1(Eigen::VectorXd::Zero(space.n_dofs()));
    const ExactSolution exact{[](const Point&) { return 0.0; }, [](const Point&) { return 0.0; },
                              [](const Point&) { return Eigen::Vector2d::Zero(); },
                              [](const Point&) { return Eigen::Vector2d::Zero(); }};
    const ErrorReport r = exact_errors(space, z, z, [](const QuadPoint&) { return 0.01; }, exact, data, rule);
    CHECK(r.err_total == 0.0);
    CHECK(std::isinf(effectivity_index(EstimatorBreakdown{0, 0, 0, 1.0}, r)));
  }
  SUBCASE("interpolant of a smooth function against iterated Gauss-Legendre") {
    const Mesh m = build_unit_square(4);
    const P1Space space(m);
    const ScalarField s = [](const Point& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); };
    const auto grad = [](const Point& x) {
      return Eigen::Vector2d(pi * std::cos(pi * x.x()) * std::sin(pi * x.y()),
                             pi * std::sin(pi * x.x()) * std::cos(pi * x.y()));
    };
    const Eigen::VectorXd iv = interpolate(m, s);
    const FeFunction y = FeFunction::p1(space.restrict(iv));
    const FeFunction p = FeFunction::p1(space.restrict(2.0 * iv));
    const ExactSolution exact{s, [&](const Point& x) { return 2.0 * s(x); }, grad,
                              [&](const Point& x) { return Eigen::Vector2d(2.0 * grad(x)); }};
    const PointFunction control = [&](const QuadPoint& q) { return 0.01 + q.x.x(); };
    const ErrorReport r = exact_errors(space, y, p, control, exact, data, rule);

    double ey = 0.0, eu = 0.0;
    for (Index t = 0; t < m.n_elements(); ++t) {
      const auto& v = m.element(t).vertices;
      const Eigen::Vector2d gh = p1_gradient(m, iv, t);
      ey += iterated_gauss(m.vertex(v[0]), m.vertex(v[1]), m.vertex(v[2]),
                           [&](const Point& x) { return (grad(x) - gh).squaredNorm(); });
      eu += iterated_gauss(m.vertex(v[0]), m.vertex(v[1]), m.vertex(v[2]), [&](const Point& x) {
        return std::pow(std::clamp(2.0 * s(x) * s(x) / 0.1, 0.01, 5.0) - 0.01 - x.x(), 2);
      });
    }
    CHECK(std::abs(r.err_y_h1 - std::sqrt(ey)) <= 1e-8);
    CHECK(std::abs(r.err_p_h1 - 2.0 * std::sqrt(ey)) <= 1e-8);
    // the exact control has kinks where the bound becomes active
    CHECK(r.err_u_l2 == doctest::Approx(std::sqrt(eu)).epsilon(1e-3));
    CHECK(r.err_total * r.err_total ==
          doctest::Approx(r.err_y_h1 * r.err_y_h1 + r.err_p_h1 * r.err_p_h1 + r.err_u_l2 * r.err_u_l2).epsilon(1e-14));
    CHECK(r.element_y.sum() == doctest::Approx(ey).epsilon(1e-8));
    const EstimatorBreakdown est{0, 0, 0, 3.0};
    CHECK(effectivity_index(est, r) == doctest::Approx(3.0 / r.err_total).epsilon(1e-15));
  }
}
