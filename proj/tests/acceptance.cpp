// Example 1 end to end: rates, effectivity plateaus, uniform vs adaptive,
// reliability/efficiency boundedness, the manufactured-case oracle and the
// unit suites. One PASS/FAIL line per criterion; exit code 1 if any fails.
//
// usage: afem_acceptance [unit_test_binary ...]
//        afem_acceptance --calibrate

#include "afem/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <random>
#include <string>
#include <vector>

using namespace afem;

namespace {

// Global constant of the local efficiency spot check. Frozen from one
// `--calibrate` run (seed 1, Ndof up to 1e4, both schemes): largest ratio
// 4.04, times 1.5.
constexpr double kLocalC = 6.0;
constexpr int kSpotElements = 20;
constexpr unsigned kSpotSeed = 20240611;

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

bool near(double slope, double target, double tol) { return std::abs(slope - target) <= tol; }

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0, double e = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d, e);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct SpotCheck {
  double worst = 0.0;
  int checked = 0;
};

struct Run {
  LoopResult loop;
  RateSummary rates;
  SpotCheck spot;
  double seconds = 0.0;
};

// E_st,T and E_adj,T against the exact error on the patch of T plus the data
// oscillation there.
void spot_check(const ManufacturedCase& c, const Mesh& mesh, const Estimate& est, const ErrorReport& err,
                std::mt19937& rng, SpotCheck& out) {
  const QuadRule rule = quad_rule(19);
  const PointFunction f = field_coefficient(c.data.f);
  const PointFunction yd = field_coefficient(c.data.y_omega);
  std::uniform_int_distribution<Index> pick(0, mesh.n_elements() - 1);
  for (int k = 0; k < kSpotElements; ++k) {
    const Index t = pick(rng);
    std::set<Index> patch_set = star(mesh, t);
    patch_set.insert(t);
    const std::vector<Index> patch(patch_set.begin(), patch_set.end());
    double e2 = 0.0;
    for (Index s : patch) e2 += err.element_y[s] + err.element_p[s] + err.element_u[s];
    const double bound = std::sqrt(e2) + oscillation(mesh, f, patch, rule) + oscillation(mesh, yd, patch, rule);
    const double local = std::max(est.state.values[t], est.adjoint.values[t]);
    out.worst = std::max(out.worst, local / bound);
    ++out.checked;
  }
}

Run adaptive(const ManufacturedCase& c, Scheme scheme, double fraction, Index max_ndof, bool spot,
             unsigned seed = kSpotSeed) {
  const ExactSolution exact = c.exact();
  LoopOptions options;
  options.scheme = scheme;
  options.fraction = fraction;
  options.criteria.max_ndof = max_ndof;
  options.exact = &exact;
  Run run;
  std::mt19937 rng(seed);
  if (spot) {
    options.on_iteration = [&](const Mesh& mesh, const Estimate& est, const LoopRecord& rec) {
      spot_check(c, mesh, est, rec.errors, rng, run.spot);
    };
  }
  const auto start = std::chrono::steady_clock::now();
  run.loop = adaptive_loop(c.data, c.initial_mesh, options);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  run.rates = fit_rates(run.loop.records);
  const LoopRecord& last = run.loop.records.back();
  std::printf("  %s %s: %zu solves, final ndof %ld, %.1f s\n", scheme == Scheme::fully ? "fully" : "semi",
              fraction == 0.0 ? "uniform" : "adaptive", run.loop.records.size(), static_cast<long>(last.ndof),
              run.seconds);
  std::printf("    slopes y %.3f p %.3f u %.3f total %.3f est %.3f\n", run.rates.y, run.rates.p, run.rates.u,
              run.rates.total, run.rates.estimator);
  if (run.loop.diverged) std::printf("    diverged: %s\n", run.loop.diagnostic.c_str());
  return run;
}

void plateau(const Run& run, const char* name, bool& ok, std::string& detail) {
  const auto& r = run.loop.records;
  if (r.size() < 3) {
    ok = false;
    detail += std::string(name) + " too few iterations; ";
    return;
  }
  double lo = INFINITY, hi = 0.0;
  for (std::size_t i = r.size() - 3; i < r.size(); ++i) {
    lo = std::min(lo, r[i].errors.effectivity);
    hi = std::max(hi, r[i].errors.effectivity);
  }
  const double spread = (hi - lo) / lo;
  const double final = r.back().errors.effectivity;
  ok = ok && spread < 0.15 && final >= 2.0 && final <= 10.0;
  detail += std::string(name) + fmt(" final %.3f spread %.1f%%; ", final, 100 * spread);
}

void boundedness(const Run& run, const char* name, bool& ok, std::string& detail) {
  std::vector<double> rel, eff;
  for (const LoopRecord& r : run.loop.records) {
    rel.push_back(r.errors.err_total / r.estimator.est_total);
    eff.push_back(r.estimator.est_total / (r.errors.err_total + r.osc_f + r.osc_y_omega));
  }
  const double rel_ratio = *std::max_element(rel.begin(), rel.end()) / median(rel);
  const double eff_ratio = *std::max_element(eff.begin(), eff.end()) / median(eff);
  const bool local = run.spot.checked > 0 && run.spot.worst <= kLocalC;
  ok = ok && rel_ratio <= 2.0 && eff_ratio <= 2.0 && local;
  detail += std::string(name) +
            fmt(" err/est max/median %.3f, est/(err+osc) max/median %.3f, local %.3f <= C over ", rel_ratio, eff_ratio,
                run.spot.worst) +
            std::to_string(run.spot.checked) + " elements; ";
}

}  // namespace

int main(int argc, char** argv) {
  const ManufacturedCase c = example1();
  constexpr Index kMaxNdof = 100000;

  // How kLocalC was obtained: a smaller run with an unrelated seed.
  if (argc == 2 && std::string(argv[1]) == "--calibrate") {
    double worst = 0.0;
    for (Scheme scheme : {Scheme::fully, Scheme::semi})
      worst = std::max(worst, adaptive(c, scheme, 0.5, 10000, true, 1).spot.worst);
    std::printf("largest local ratio %.4f\n", worst);
    return 0;
  }

  const VerifyReport v = verify_case(c);

  const Run fully = adaptive(c, Scheme::fully, 0.5, kMaxNdof, true);
  const Run semi = adaptive(c, Scheme::semi, 0.5, kMaxNdof, true);
  const Run uniform = adaptive(c, Scheme::fully, 0.0, kMaxNdof, false);

  {
    const RateSummary& r = fully.rates;
    const bool ok = !fully.loop.diverged && near(r.y, -0.5, 0.1) && near(r.p, -0.5, 0.1) && near(r.u, -0.5, 0.1) &&
                    near(r.total, -0.5, 0.1) && near(r.estimator, -0.5, 0.1) &&
                    fully.loop.records.back().ndof >= kMaxNdof / 2;
    report(1, ok,
           fmt("fully slopes y %.3f p %.3f u %.3f total %.3f est %.3f (target -0.5 +- 0.1)", r.y, r.p, r.u, r.total,
               r.estimator));
  }
  {
    const RateSummary& r = semi.rates;
    const bool ok = !semi.loop.diverged && near(r.y, -0.5, 0.1) && near(r.p, -0.5, 0.1) &&
                    near(r.estimator, -0.5, 0.1) && near(r.u, -1.0, 0.2);
    report(2, ok,
           fmt("semi slopes y %.3f p %.3f est %.3f (target -0.5 +- 0.1), u %.3f (target -1 +- 0.2)", r.y, r.p,
               r.estimator, r.u));
  }
  {
    bool ok = true;
    std::string detail;
    plateau(fully, "fully", ok, detail);
    plateau(semi, "semi", ok, detail);
    report(3, ok, detail + "(spread < 15%, final in [2, 10])");
  }
  {
    const bool ok = !uniform.loop.diverged && std::abs(uniform.rates.total) < std::abs(fully.rates.total);
    report(4, ok, fmt("uniform total slope %.3f vs adaptive %.3f", uniform.rates.total, fully.rates.total));
  }
  {
    bool ok = true;
    std::string detail;
    boundedness(fully, "fully", ok, detail);
    boundedness(semi, "semi", ok, detail);
    report(5, ok, detail + fmt("C = %.2f", kLocalC));
  }
  report(6, v.passed,
         v.passed ? fmt("%.0f points, gradient %.2e, laplacian %.2e, harmonicity %.2e", v.points, v.max_gradient_error,
                        v.max_laplacian_error, v.harmonicity)
                  : v.failure);
  {
    const auto start = std::chrono::steady_clock::now();
    std::string failed;
    for (int i = 1; i < argc; ++i) {
      const std::string cmd = std::string("\"") + argv[i] + "\" > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) failed += std::string(" ") + argv[i];
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool ok = argc > 1 && failed.empty() && seconds <= 300.0;
    report(7, ok,
           std::to_string(argc - 1) + " unit suites" + (failed.empty() ? " passed" : ", failed:" + failed) +
               fmt(" in %.1f s (limit 300 s)", seconds));
  }

  std::printf("%s\n", failures ? "acceptance FAILED" : "acceptance passed");
  return failures ? 1 : 0;
}
