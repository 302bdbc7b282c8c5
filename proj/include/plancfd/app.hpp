#pragma once

// Command-line front end. Exit codes:
//   0 success, 1 validation tolerance exceeded, 2 usage, 3 divergence, 4 I/O.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "plancfd/bench.hpp"
#include "plancfd/config.hpp"
#include "plancfd/diagnostics.hpp"
#include "plancfd/errors.hpp"
#include "plancfd/kernels.hpp"
#include "plancfd/parallel.hpp"
#include "plancfd/plan.hpp"
#include "plancfd/timeloop.hpp"

namespace plancfd {

enum ExitCode { kExitOk = 0, kExitValidation = 1, kExitUsage = 2, kExitDivergence = 3, kExitIo = 4 };

/// Tolerance for the cross-plan check in validate mode.
inline constexpr double kValidateTolerance = 1e-10;

/// Parsed command line: either a config or an early exit (help, parse error).
struct ParsedArgs {
  RunConfig config;
  bool exit_now = false;
  int exit_code = kExitOk;
};

inline ParsedArgs parse_config(int argc, const char* const* argv, std::ostream& out = std::cout,
                               std::ostream& err = std::cerr) {
  CLI::App app{"Explicit fourth-order compressible Navier-Stokes solver with selectable kernel plans"};
  app.set_help_flag("-h,--help", "Show this help");
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> opts;
  const std::map<std::string, std::string> help = {
      {"mode", "validate | run | bench | scaling"},
      {"grid", "points per axis, N or NxNxN"},
      {"lengths", "domain lengths Lx,Ly,Lz"},
      {"plan", "bl | ra | rs | sn | ss"},
      {"dt", "time step"},
      {"iterations", "outer iterations"},
      {"workers", "worker threads"},
      {"re", "Reynolds number"},
      {"mach", "Mach number"},
      {"pr", "Prandtl number"},
      {"gamma", "ratio of specific heats"},
      {"out", "output directory"},
      {"cadence", "diagnostics every N iterations"},
      {"bench-grids", "bench grids, comma separated"},
      {"bench-plans", "bench plans, comma separated"},
      {"bench-iterations", "timed iterations per bench cell"},
      {"warmup", "untimed iterations per bench cell"},
      {"repeats", "timed repeats per bench cell (fastest kept)"},
      {"scaling-grid", "strong-scaling grid"},
      {"scaling-workers", "worker counts, comma separated"},
      {"weak-per-worker", "weak-scaling points per worker"},
      {"scaling-iterations", "timed iterations per scaling point"}};
  for (const auto& key : config_keys()) {
    if (key == "auto-dt" || key == "print-schedule") continue;
    opts[key] = app.add_option("--" + key, flag_values[key], help.at(key));
  }
  bool auto_dt = false, print_schedule = false;
  opts["auto-dt"] = app.add_flag("--auto-dt", auto_dt, "derive dt from the grid (3.385e-3 at 64, halved per doubling)");
  opts["print-schedule"] = app.add_flag("--print-schedule", print_schedule, "print the lowered kernel schedule");
  std::string config_file;
  app.add_option("--config", config_file, "key=value configuration file");

  ParsedArgs parsed;
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    parsed.exit_now = true;
    parsed.exit_code = app.exit(e, out, err);
    return parsed;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    parsed.exit_now = true;
    parsed.exit_code = kExitUsage;
    return parsed;
  }
  ConfigValues values;
  if (!config_file.empty()) values = read_config_file(config_file);
  for (const auto& [key, opt] : opts) {
    if (opt->count() == 0) continue;
    if (key == "auto-dt") values[key] = auto_dt ? "true" : "false";
    else if (key == "print-schedule") values[key] = print_schedule ? "true" : "false";
    else values[key] = flag_values[key];
  }
  parsed.config = resolve(values);
  return parsed;
}

inline void write_resolved_config(const RunConfig& c) {
  std::error_code ec;
  std::filesystem::create_directories(c.out, ec);
  if (ec) throw IoError("cannot create output directory " + c.out + ": " + ec.message());
  const std::string path = (std::filesystem::path(c.out) / "config.resolved").string();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << format_config(c);
  if (!f) throw IoError("failed writing " + path);
}

inline PhysicalConstants constants_of(const RunConfig& c) {
  return make_constants(c.gamma, c.mach, c.prandtl, c.reynolds);
}

inline Grid grid_of(const RunConfig& c) { return make_grid(c.npoints, c.lengths, kSolverHalo); }

/// max over the five conservative fields of |a - b|_inf / |a|_inf.
inline double relative_state_difference(const ConservativeState& a, const ConservativeState& b) {
  auto rel = [](const Field& x, const Field& y) {
    const double scale = reduce_max_abs(x);
    const double diff = max_abs_difference(x, y);
    return scale > 0.0 ? diff / scale : diff;
  };
  double m = rel(a.rho, b.rho);
  for (int i = 0; i < 3; ++i) m = std::max(m, rel(a.rhou[i], b.rhou[i]));
  return std::max(m, rel(a.rhoE, b.rhoE));
}

inline int run_mode(const RunConfig& c, std::ostream& out) {
  const Grid g = grid_of(c);
  const PhysicalConstants pc = constants_of(c);
  RKScheme scheme;
  scheme.dt = c.dt;
  Solver solver(taylor_green_init(g, pc), pc, build_plan(c.plan), scheme);
  out << "run: grid " << detail::format_grid(c.npoints) << ", plan " << to_string(c.plan) << ", dt "
      << detail::format_double(c.dt) << ", " << c.iterations << " iterations, " << c.workers << " workers\n";
  const RunReport report = solver.run(c.iterations, c.cadence, &out);
  const std::string path = (std::filesystem::path(c.out) / "timeseries.csv").string();
  write_timeseries(report.records, path);
  out << "loop seconds: " << report.loop_seconds << "\n";
  out << "wrote " << path << " (" << report.records.size() << " rows)\n";
  if (!report.ok()) throw *report.divergence;
  return kExitOk;
}

inline int validate_mode(const RunConfig& c, std::ostream& out) {
  const Grid g = grid_of(c);
  const PhysicalConstants pc = constants_of(c);
  RKScheme scheme;
  scheme.dt = c.dt;
  const ConservativeState initial = taylor_green_init(g, pc);
  std::vector<ConservativeState> finals;
  for (PlanName p : kAllPlans) {
    Solver solver(initial, pc, build_plan(p), scheme);
    for (int n = 0; n < c.iterations; ++n) solver.step();
    finals.push_back(solver.state());
  }
  double worst = 0.0;
  for (std::size_t a = 0; a < finals.size(); ++a)
    for (std::size_t b = a + 1; b < finals.size(); ++b) {
      const double d = relative_state_difference(finals[a], finals[b]);
      out << "  " << to_string(kAllPlans[a]) << " vs " << to_string(kAllPlans[b]) << ": " << d << "\n";
      worst = std::max(worst, d);
    }
  const bool pass = worst <= kValidateTolerance;
  out << "max cross-plan deviation after " << c.iterations << " iterations on " << detail::format_grid(c.npoints)
      << ": " << worst << " (tolerance " << kValidateTolerance << ") " << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kExitOk : kExitValidation;
}

inline int bench_mode(const RunConfig& c, std::ostream& out) {
  BenchOptions opt;
  opt.warmup = c.warmup;
  opt.repeats = c.repeats;
  opt.constants = constants_of(c);
  const auto records = bench_variants(c.bench_grids, c.bench_plans, c.bench_iterations, c.workers, opt);
  const std::filesystem::path dir(c.out);
  write_bench_csv(records, (dir / "bench.csv").string());
  write_table_csv(records, (dir / "table.csv").string());
  const bool have_bl = std::find(c.bench_plans.begin(), c.bench_plans.end(), PlanName::BL) != c.bench_plans.end();
  if (have_bl) write_speedup_csv(records, (dir / "speedup.csv").string());
  for (const auto& r : records)
    out << grid_label(r.grid) << " " << to_string(r.plan) << " " << r.loop_seconds << " s\n";
  if (have_bl) {
    const auto s = speedups(records);
    for (const auto& g : c.bench_grids) {
      auto it = s.find({g, PlanName::SS});
      if (it != s.end())
        out << "BL/SS run-time ratio at " << grid_label(g) << ": " << it->second << " (reference: 2.05 at 128^3)\n";
    }
  }
  out << "wrote bench.csv, table.csv" << (have_bl ? ", speedup.csv" : "") << " to " << c.out << "\n";
  return kExitOk;
}

inline int scaling_mode(const RunConfig& c, std::ostream& out) {
  BenchOptions opt;
  opt.warmup = c.warmup;
  opt.repeats = c.repeats;
  opt.constants = constants_of(c);
  const std::filesystem::path dir(c.out);
  const auto strong = strong_scaling(c.scaling_grid, c.plan, c.scaling_workers, c.scaling_iterations, opt);
  write_scaling_csv(strong.series, (dir / "scaling.csv").string());
  out << "strong scaling, " << grid_label(c.scaling_grid) << ":\n";
  for (const auto& p : strong.series)
    out << "  workers " << p.workers << ": " << p.runtime << " s, normalized " << p.normalized << ", ideal " << p.ideal
        << "\n";
  const auto weak = weak_scaling(c.weak_per_worker, c.plan, c.scaling_workers, c.scaling_iterations, opt);
  write_scaling_csv(weak.series, (dir / "weak_scaling.csv").string());
  out << "weak scaling, " << grid_label(c.weak_per_worker) << " per worker:\n";
  for (const auto& p : weak.series)
    out << "  workers " << p.workers << " (" << grid_label(p.grid) << "): " << p.runtime << " s, normalized "
        << p.normalized << "\n";
  return kExitOk;
}

inline int run_app(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    const ParsedArgs parsed = parse_config(argc, argv, out, err);
    if (parsed.exit_now) return parsed.exit_code;
    const RunConfig& c = parsed.config;
    set_workers(c.workers);
    write_resolved_config(c);
    if (c.print_schedule) out << format_schedule(lower_plan(build_plan(c.plan)));
    switch (c.mode) {
      case Mode::Run: return run_mode(c, out);
      case Mode::Validate: return validate_mode(c, out);
      case Mode::Bench: return bench_mode(c, out);
      case Mode::Scaling: return scaling_mode(c, out);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    err << "solver diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace plancfd
