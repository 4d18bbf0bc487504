#include "afem/benchmark.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

using namespace afem;

namespace {

constexpr int kDiverged = 2;
constexpr int kUnverified = 3;
constexpr int kConfig = 4;

struct LoopFlags {
  std::string scheme = "fully";
  std::string example = "lshape";
  double marking = 0.5;
  int iters = 0;
  int levels = 2;
  std::string which = "total";
};

void add_loop_flags(CLI::App* cmd, LoopFlags& f) {
  cmd->add_option("--scheme", f.scheme, "fully or semi")->check(CLI::IsMember({"fully", "semi"}));
  cmd->add_option("--example", f.example, "benchmark example");
  cmd->add_option("--marking", f.marking, "max-marking fraction");
  cmd->add_option("--iters", f.iters, "adaptive iterations before dumping")->check(CLI::NonNegativeNumber);
  cmd->add_option("--levels", f.levels, "uniform refinements of the initial mesh")->check(CLI::Range(0, 12));
}

// Runs the loop and hands over the last mesh and its indicators.
template <typename Sink>
int last_iteration(const LoopFlags& f, Sink&& sink) {
  RunConfig config;
  config.scheme = parse_scheme(f.scheme);
  config.example = f.example;
  config.marking = f.marking;
  config.initial_levels = f.levels;
  config.criteria.max_iterations = f.iters;
  const ManufacturedCase c = make_case(config);
  LoopOptions options;
  options.scheme = config.scheme;
  options.fraction = config.marking;
  options.criteria = config.criteria;
  std::optional<Mesh> mesh;
  std::optional<Estimate> est;
  options.on_iteration = [&](const Mesh& m, const Estimate& e, const LoopRecord&) {
    mesh = m;
    est = e;
  };
  const LoopResult r = adaptive_loop(c.data, c.initial_mesh, options);
  if (r.diverged) {
    std::cerr << "error: " << r.diagnostic << "\n";
    return kDiverged;
  }
  sink(*mesh, *est);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive finite elements for bilinear optimal control"};
  app.require_subcommand(1);

  RunConfig config;
  std::string scheme = "fully";
  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "adaptive loop with exact errors, CSV output");
  auto* scheme_opt = run_cmd->add_option("--scheme", scheme, "fully or semi")->check(CLI::IsMember({"fully", "semi"}));
  auto* example_opt = run_cmd->add_option("--example", config.example, "benchmark example");
  auto* marking_opt = run_cmd->add_option("--marking", config.marking, "max-marking fraction, 0 marks all");
  auto* ndof_opt = run_cmd->add_option("--max-ndof", config.criteria.max_ndof, "largest mesh to solve");
  auto* iters_opt = run_cmd->add_option("--max-iters", config.criteria.max_iterations, "refinement steps");
  auto* quad_opt = run_cmd->add_option("--quad-degree", config.quad_degree, "quadrature degree");
  auto* out_opt = run_cmd->add_option("--out", config.out, "CSV path (stdout when omitted)");
  auto* uniform_opt = run_cmd->add_flag("--uniform", config.uniform, "refine every element");
  run_cmd->add_option("--config", config_path, "key = value file; flags override it");

  std::string verify_example = "lshape";
  auto* verify_cmd = app.add_subcommand("verify", "finite-difference check of the manufactured solution");
  verify_cmd->add_option("--example", verify_example, "benchmark example");

  LoopFlags mesh_flags;
  auto* mesh_cmd = app.add_subcommand("mesh-dump", "write the mesh after some adaptive iterations");
  add_loop_flags(mesh_cmd, mesh_flags);

  LoopFlags ind_flags;
  auto* ind_cmd = app.add_subcommand("indicator-dump", "write `element_id value` indicator lines");
  add_loop_flags(ind_cmd, ind_flags);
  ind_cmd->add_option("--which", ind_flags.which, "state, adjoint, control or total")
      ->check(CLI::IsMember({"state", "adjoint", "control", "total"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*run_cmd) {
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot read config file " + config_path);
        RunConfig file = parse_config(in);
        // command-line flags win
        if (*scheme_opt) file.scheme = parse_scheme(scheme);
        if (*example_opt) file.example = config.example;
        if (*marking_opt) file.marking = config.marking;
        if (*ndof_opt) file.criteria.max_ndof = config.criteria.max_ndof;
        if (*iters_opt) file.criteria.max_iterations = config.criteria.max_iterations;
        if (*quad_opt) file.quad_degree = config.quad_degree;
        if (*out_opt) file.out = config.out;
        if (*uniform_opt) file.uniform = config.uniform;
        config = file;
      } else {
        config.scheme = parse_scheme(scheme);
      }
      config.validate();

      std::ofstream file;
      std::ostream* csv = &std::cout;
      std::ostream* log = &std::cerr;
      if (!config.out.empty()) {
        file.open(config.out);
        if (!file) throw ConfigError("cannot write " + config.out);
        csv = &file;
        log = &std::cout;
      }
      const RunSummary s = run(config, csv);
      write_summary(*log, s);
      return s.diverged ? kDiverged : 0;
    }
    if (*verify_cmd) {
      RunConfig c;
      c.example = verify_example;
      const VerifyReport r = verify_case(make_case(c));
      std::cout << "points " << r.points << "\n"
                << "max gradient error " << r.max_gradient_error << "\n"
                << "max laplacian error " << r.max_laplacian_error << "\n"
                << "max identity residual " << r.max_consistency << "\n"
                << "max boundary value " << r.max_boundary_value << "\n"
                << "corner factor laplacian " << r.harmonicity << "\n";
      if (!r.passed) {
        std::cout << "FAILED: " << r.failure << "\n";
        return kUnverified;
      }
      std::cout << "passed\n";
      return 0;
    }
    if (*mesh_cmd) {
      return last_iteration(mesh_flags, [](const Mesh& m, const Estimate&) { write_mesh(std::cout, m); });
    }
    if (*ind_cmd) {
      return last_iteration(ind_flags, [&](const Mesh&, const Estimate& e) {
        const std::string& w = ind_flags.which;
        write_indicator(std::cout, w == "state" ? e.state : w == "adjoint" ? e.adjoint : w == "control" ? e.control : e.total);
      });
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const VerificationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnverified;
  }
  return 0;
}
