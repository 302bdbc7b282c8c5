#pragma once

// Timing harness: per-variant run-time tables, BL-normalized speed-ups and
// strong/weak scaling sweeps over worker counts.
//
// Every table cell starts from the same Taylor-Green state, runs `warmup`
// untimed iterations, is reset to that state, and then times `iterations`
// iterations of the time loop alone.

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <new>
#include <stdexcept>
#include <string>
#include <vector>

#include "plancfd/diagnostics.hpp"
#include "plancfd/errors.hpp"
#include "plancfd/kernels.hpp"
#include "plancfd/parallel.hpp"
#include "plancfd/plan.hpp"
#include "plancfd/timeloop.hpp"

namespace plancfd {

using GridSize = std::array<int, 3>;

struct TimingRecord {
  GridSize grid{};
  PlanName plan = PlanName::BL;
  int workers = 1;
  int iterations = 0;
  double loop_seconds = 0.0;
  double final_ke = 0.0;

  double seconds_per_iteration() const { return iterations > 0 ? loop_seconds / iterations : 0.0; }
};

struct BenchOptions {
  int warmup = 2;
  int repeats = 1;  // the fastest repeat is kept
  PhysicalConstants constants = make_constants();
};

inline std::string grid_label(const GridSize& g) {
  return std::to_string(g[0]) + "x" + std::to_string(g[1]) + "x" + std::to_string(g[2]);
}

/// dt from the halving rule, keyed to the finest axis.
inline double bench_dt(const GridSize& g) { return default_dt(*std::max_element(g.begin(), g.end())); }

inline TimingRecord time_variant(const GridSize& size, PlanName plan, int iterations, int nworkers,
                                 const BenchOptions& opt = {}) {
  if (iterations < 1) throw ConfigError("bench iterations must be at least 1");
  if (nworkers < 1) throw ConfigError("workers must be at least 1");
  set_workers(nworkers);
  try {
    const Grid g = make_grid(size, {kTwoPi, kTwoPi, kTwoPi}, kSolverHalo);
    const ConservativeState initial = taylor_green_init(g, opt.constants);
    RKScheme scheme;
    scheme.dt = bench_dt(size);
    Solver solver(initial, opt.constants, build_plan(plan), scheme);
    for (int i = 0; i < opt.warmup; ++i) solver.step();
    TimingRecord rec{size, plan, nworkers, iterations, 0.0, 0.0};
    for (int r = 0; r < std::max(1, opt.repeats); ++r) {
      solver.reset(initial);
      const RunReport report = solver.run(iterations, iterations);
      if (!report.ok()) throw *report.divergence;
      rec.loop_seconds = r == 0 ? report.loop_seconds : std::min(rec.loop_seconds, report.loop_seconds);
      rec.final_ke = report.records.back().kinetic_energy;
    }
    return rec;
  } catch (const std::bad_alloc&) {
    throw std::runtime_error("out of memory benchmarking grid " + grid_label(size) + " plan " + to_string(plan));
  }
}

/// One record per (grid, plan), grids outermost.
inline std::vector<TimingRecord> bench_variants(const std::vector<GridSize>& grids, const std::vector<PlanName>& plans,
                                                int iterations, int nworkers, const BenchOptions& opt = {}) {
  std::vector<TimingRecord> out;
  for (const auto& g : grids)
    for (PlanName p : plans) out.push_back(time_variant(g, p, iterations, nworkers, opt));
  return out;
}

namespace detail {
inline std::FILE* open_csv(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot open " + path + " for writing");
  return f;
}
inline void close_csv(std::FILE* f, const std::string& path) {
  if (std::ferror(f) != 0 || std::fclose(f) != 0) throw IoError("failed writing " + path);
}

/// grid -> plan -> seconds, keeping grid order of first appearance.
struct Table {
  std::vector<GridSize> grids;
  std::vector<PlanName> plans;
  std::map<std::pair<GridSize, PlanName>, double> seconds;
};

inline Table tabulate(const std::vector<TimingRecord>& records) {
  Table t;
  for (const auto& r : records) {
    if (std::find(t.grids.begin(), t.grids.end(), r.grid) == t.grids.end()) t.grids.push_back(r.grid);
    t.seconds[{r.grid, r.plan}] = r.loop_seconds;
  }
  for (PlanName p : kAllPlans)
    for (const auto& r : records)
      if (r.plan == p) {
        t.plans.push_back(p);
        break;
      }
  return t;
}
}  // namespace detail

/// Nx,Ny,Nz,plan,workers,iterations,loop_seconds
inline void write_bench_csv(const std::vector<TimingRecord>& records, const std::string& path) {
  std::FILE* f = detail::open_csv(path);
  std::fprintf(f, "Nx,Ny,Nz,plan,workers,iterations,loop_seconds\n");
  for (const auto& r : records)
    std::fprintf(f, "%d,%d,%d,%s,%d,%d,%.6f\n", r.grid[0], r.grid[1], r.grid[2], to_string(r.plan).c_str(), r.workers,
                 r.iterations, r.loop_seconds);
  detail::close_csv(f, path);
}

/// Run times with one row per grid and one column per plan.
inline void write_table_csv(const std::vector<TimingRecord>& records, const std::string& path) {
  const auto t = detail::tabulate(records);
  std::FILE* f = detail::open_csv(path);
  std::fprintf(f, "Nx,Ny,Nz");
  for (PlanName p : t.plans) std::fprintf(f, ",%s", to_string(p).c_str());
  std::fprintf(f, "\n");
  for (const auto& g : t.grids) {
    std::fprintf(f, "%d,%d,%d", g[0], g[1], g[2]);
    for (PlanName p : t.plans) {
      auto it = t.seconds.find({g, p});
      if (it == t.seconds.end()) {
        std::fprintf(f, ",");
      } else {
        std::fprintf(f, ",%.6f", it->second);
      }
    }
    std::fprintf(f, "\n");
  }
  detail::close_csv(f, path);
}

/// speedup(plan) = t(BL) / t(plan) per grid. Requires BL in every row.
inline std::map<std::pair<GridSize, PlanName>, double> speedups(const std::vector<TimingRecord>& records) {
  const auto t = detail::tabulate(records);
  std::map<std::pair<GridSize, PlanName>, double> out;
  for (const auto& g : t.grids) {
    auto bl = t.seconds.find({g, PlanName::BL});
    if (bl == t.seconds.end()) throw ConfigError("speed-up table needs a BL timing for grid " + grid_label(g));
    for (PlanName p : t.plans) {
      auto it = t.seconds.find({g, p});
      if (it != t.seconds.end()) out[{g, p}] = p == PlanName::BL ? 1.0 : bl->second / it->second;
    }
  }
  return out;
}

inline void write_speedup_csv(const std::vector<TimingRecord>& records, const std::string& path) {
  const auto t = detail::tabulate(records);
  const auto s = speedups(records);
  std::FILE* f = detail::open_csv(path);
  std::fprintf(f, "Nx,Ny,Nz");
  for (PlanName p : t.plans) std::fprintf(f, ",%s", to_string(p).c_str());
  std::fprintf(f, "\n");
  for (const auto& g : t.grids) {
    std::fprintf(f, "%d,%d,%d", g[0], g[1], g[2]);
    for (PlanName p : t.plans) {
      auto it = s.find({g, p});
      if (it == s.end()) {
        std::fprintf(f, ",");
      } else {
        std::fprintf(f, ",%.6f", it->second);
      }
    }
    std::fprintf(f, "\n");
  }
  detail::close_csv(f, path);
}

struct ScalingPoint {
  int workers = 1;
  GridSize grid{};
  double runtime = 0.0;
  double normalized = 1.0;
  double ideal = 1.0;
};

struct ScalingResult {
  std::vector<TimingRecord> records;
  std::vector<ScalingPoint> series;
};

/// Fixed global grid. normalized = runtime / runtime(first entry);
/// ideal = workers(first) / workers.
inline ScalingResult strong_scaling(const GridSize& grid, PlanName plan, const std::vector<int>& worker_list,
                                    int iterations, const BenchOptions& opt = {}) {
  if (worker_list.empty()) throw ConfigError("worker list is empty");
  ScalingResult out;
  for (int w : worker_list) out.records.push_back(time_variant(grid, plan, iterations, w, opt));
  const double base = out.records.front().loop_seconds;
  for (const auto& r : out.records)
    out.series.push_back({r.workers, r.grid, r.loop_seconds, r.loop_seconds / base,
                          static_cast<double>(worker_list.front()) / r.workers});
  return out;
}

/// Factors `workers` over the three axes, largest prime factors first, each
/// going to the axis with the smallest factor so far (lowest axis on ties):
/// 2 -> (2,1,1), 4 -> (2,2,1), 8 -> (2,2,2).
inline GridSize decomposition(int workers) {
  if (workers < 1) throw ConfigError("workers must be at least 1");
  std::vector<int> primes;
  for (int n = workers, p = 2; n > 1;) {
    if (n % p == 0) {
      primes.push_back(p);
      n /= p;
    } else {
      ++p;
    }
  }
  std::sort(primes.rbegin(), primes.rend());
  GridSize f{1, 1, 1};
  for (int p : primes) *std::min_element(f.begin(), f.end()) *= p;
  return f;
}

/// Per-worker share fixed; the global grid is the share times decomposition().
/// normalized = runtime / runtime(first entry); ideal = 1.
inline ScalingResult weak_scaling(const GridSize& per_worker, PlanName plan, const std::vector<int>& worker_list,
                                  int iterations, const BenchOptions& opt = {}) {
  if (worker_list.empty()) throw ConfigError("worker list is empty");
  ScalingResult out;
  for (int w : worker_list) {
    const GridSize f = decomposition(w);
    const GridSize global{per_worker[0] * f[0], per_worker[1] * f[1], per_worker[2] * f[2]};
    out.records.push_back(time_variant(global, plan, iterations, w, opt));
  }
  const double base = out.records.front().loop_seconds;
  for (const auto& r : out.records) out.series.push_back({r.workers, r.grid, r.loop_seconds, r.loop_seconds / base, 1.0});
  return out;
}

/// workers,runtime,normalized,ideal
inline void write_scaling_csv(const std::vector<ScalingPoint>& series, const std::string& path) {
  std::FILE* f = detail::open_csv(path);
  std::fprintf(f, "workers,runtime,normalized,ideal\n");
  for (const auto& p : series) std::fprintf(f, "%d,%.6f,%.6f,%.6f\n", p.workers, p.runtime, p.normalized, p.ideal);
  detail::close_csv(f, path);
}

}  // namespace plancfd
