#pragma once

// Run configuration: defaults, a key=value file and command-line flags, in
// increasing precedence. Keys in the file are the long flag names without
// the leading dashes, e.g.
//
//   # comment
//   mode = run
//   grid = 64
//   plan = ss
//
// All values pass through resolve(), so a malformed value reports its key
// whichever source it came from.

#include <algorithm>
#include <array>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "plancfd/errors.hpp"
#include "plancfd/mesh.hpp"
#include "plancfd/plan.hpp"
#include "plancfd/timeloop.hpp"

namespace plancfd {

enum class Mode { Validate, Run, Bench, Scaling };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::Validate: return "validate";
    case Mode::Run: return "run";
    case Mode::Bench: return "bench";
    case Mode::Scaling: return "scaling";
  }
  return "?";
}

struct RunConfig {
  Mode mode = Mode::Run;
  std::array<int, 3> npoints{64, 64, 64};
  std::array<double, 3> lengths{kTwoPi, kTwoPi, kTwoPi};
  PlanName plan = PlanName::SS;
  double gamma = 1.4;
  double mach = 0.1;
  double prandtl = 0.71;
  double reynolds = 1600.0;
  double dt = 3.385e-3;
  bool auto_dt = false;
  int iterations = 500;
  int workers = 1;
  int cadence = 10;
  std::string out = "out";
  bool print_schedule = false;

  // bench
  std::vector<std::array<int, 3>> bench_grids{{32, 32, 32}, {48, 48, 48}, {64, 64, 64}, {96, 96, 96}};
  std::vector<PlanName> bench_plans{kAllPlans.begin(), kAllPlans.end()};
  int bench_iterations = 100;
  int warmup = 2;
  int repeats = 1;

  // scaling
  std::array<int, 3> scaling_grid{96, 96, 96};
  std::vector<int> scaling_workers{1, 2, 4, 8};
  std::array<int, 3> weak_per_worker{32, 32, 32};
  int scaling_iterations = 20;
};

/// Raw key -> value text, before validation.
using ConfigValues = std::map<std::string, std::string>;

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "mode",          "grid",           "lengths",         "plan",         "dt",
      "auto-dt",       "iterations",     "workers",         "re",           "mach",
      "pr",            "gamma",          "out",             "cadence",      "print-schedule",
      "bench-grids",   "bench-plans",    "bench-iterations", "warmup",      "repeats",
      "scaling-grid",  "scaling-workers", "weak-per-worker", "scaling-iterations"};
  return keys;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE || !std::isfinite(x))
    throw ConfigError(key + ": '" + v + "' is not a number");
  return x;
}

inline int parse_int(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE || x < -2147483647L || x > 2147483647L)
    throw ConfigError(key + ": '" + v + "' is not an integer");
  return static_cast<int>(x);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": '" + v + "' is not a boolean");
}

/// "64" or "64x32x32".
inline std::array<int, 3> parse_grid(const std::string& key, const std::string& v) {
  const auto parts = split(v, 'x');
  std::array<int, 3> g{};
  if (parts.size() == 1) {
    g.fill(parse_int(key, parts[0]));
  } else if (parts.size() == 3) {
    for (int a = 0; a < 3; ++a) g[static_cast<std::size_t>(a)] = parse_int(key, parts[static_cast<std::size_t>(a)]);
  } else {
    throw ConfigError(key + ": '" + v + "' is not N or NxNxN");
  }
  for (int n : g)
    if (n < 5) throw ConfigError(key + ": every axis needs at least 5 points");
  return g;
}

inline std::string format_grid(const std::array<int, 3>& g) {
  return std::to_string(g[0]) + "x" + std::to_string(g[1]) + "x" + std::to_string(g[2]);
}

/// Shortest text that parses back to x.
inline std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

}  // namespace detail

/// Reads a key=value file. Blank lines and '#' comments are ignored.
inline ConfigValues read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  ConfigValues v;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    v[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  return v;
}

/// Validated configuration from raw values layered over the defaults.
inline RunConfig resolve(const ConfigValues& values) {
  using namespace detail;
  for (const auto& [k, v] : values) {
    if (std::find(config_keys().begin(), config_keys().end(), k) == config_keys().end())
      throw ConfigError(k + ": unknown key");
  }
  RunConfig c;
  auto get = [&](const char* key) -> const std::string* {
    auto it = values.find(key);
    return it == values.end() ? nullptr : &it->second;
  };
  if (auto v = get("mode")) {
    if (*v == "validate") c.mode = Mode::Validate;
    else if (*v == "run") c.mode = Mode::Run;
    else if (*v == "bench") c.mode = Mode::Bench;
    else if (*v == "scaling") c.mode = Mode::Scaling;
    else throw ConfigError("mode: '" + *v + "' is not one of {validate, run, bench, scaling}");
  }
  if (auto v = get("grid")) c.npoints = parse_grid("grid", *v);
  if (auto v = get("lengths")) {
    const auto parts = split(*v, ',');
    if (parts.size() != 3) throw ConfigError("lengths: expected three comma-separated values");
    for (int a = 0; a < 3; ++a) {
      c.lengths[static_cast<std::size_t>(a)] = parse_double("lengths", parts[static_cast<std::size_t>(a)]);
      if (!(c.lengths[static_cast<std::size_t>(a)] > 0.0)) throw ConfigError("lengths: must be positive");
    }
  }
  if (auto v = get("plan")) {
    try {
      c.plan = parse_plan_name(*v);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("plan: ") + e.what());
    }
  }
  if (auto v = get("gamma")) c.gamma = parse_double("gamma", *v);
  if (auto v = get("mach")) c.mach = parse_double("mach", *v);
  if (auto v = get("pr")) c.prandtl = parse_double("pr", *v);
  if (auto v = get("re")) c.reynolds = parse_double("re", *v);
  if (!(c.gamma > 1.0)) throw ConfigError("gamma: must exceed 1");
  if (!(c.mach > 0.0)) throw ConfigError("mach: must be positive");
  if (!(c.prandtl > 0.0)) throw ConfigError("pr: must be positive");
  if (!(c.reynolds > 0.0)) throw ConfigError("re: must be positive");

  if (auto v = get("auto-dt")) c.auto_dt = parse_bool("auto-dt", *v);
  const double auto_value = default_dt(*std::max_element(c.npoints.begin(), c.npoints.end()));
  if (auto v = get("dt")) {
    c.dt = parse_double("dt", *v);
    if (!(c.dt > 0.0)) throw ConfigError("dt: must be positive");
    if (c.auto_dt && std::abs(c.dt - auto_value) > 1e-12 * auto_value)
      throw ConfigError("dt: " + *v + " contradicts auto-dt, which gives " + format_double(auto_value) + " for grid " +
                        format_grid(c.npoints));
  } else {
    c.dt = auto_value;
  }

  if (auto v = get("iterations")) c.iterations = parse_int("iterations", *v);
  if (c.iterations < 0) throw ConfigError("iterations: must be non-negative");
  if (auto v = get("workers")) c.workers = parse_int("workers", *v);
  if (c.workers < 1) throw ConfigError("workers: must be at least 1");
  if (auto v = get("cadence")) c.cadence = parse_int("cadence", *v);
  if (c.cadence < 1) throw ConfigError("cadence: must be at least 1");
  if (auto v = get("out")) {
    if (v->empty()) throw ConfigError("out: empty path");
    c.out = *v;
  }
  if (auto v = get("print-schedule")) c.print_schedule = parse_bool("print-schedule", *v);

  if (auto v = get("bench-grids")) {
    c.bench_grids.clear();
    for (const auto& g : split(*v, ',')) c.bench_grids.push_back(parse_grid("bench-grids", g));
    if (c.bench_grids.empty()) throw ConfigError("bench-grids: empty list");
  }
  if (auto v = get("bench-plans")) {
    c.bench_plans.clear();
    for (const auto& p : split(*v, ',')) {
      try {
        c.bench_plans.push_back(parse_plan_name(p));
      } catch (const std::exception& e) {
        throw ConfigError(std::string("bench-plans: ") + e.what());
      }
    }
    if (c.bench_plans.empty()) throw ConfigError("bench-plans: empty list");
  }
  if (auto v = get("bench-iterations")) c.bench_iterations = parse_int("bench-iterations", *v);
  if (c.bench_iterations < 1) throw ConfigError("bench-iterations: must be at least 1");
  if (auto v = get("warmup")) c.warmup = parse_int("warmup", *v);
  if (c.warmup < 0) throw ConfigError("warmup: must be non-negative");
  if (auto v = get("repeats")) c.repeats = parse_int("repeats", *v);
  if (c.repeats < 1) throw ConfigError("repeats: must be at least 1");
  if (auto v = get("scaling-grid")) c.scaling_grid = parse_grid("scaling-grid", *v);
  if (auto v = get("scaling-workers")) {
    c.scaling_workers.clear();
    for (const auto& w : split(*v, ',')) {
      c.scaling_workers.push_back(parse_int("scaling-workers", w));
      if (c.scaling_workers.back() < 1) throw ConfigError("scaling-workers: must be at least 1");
    }
    if (c.scaling_workers.empty()) throw ConfigError("scaling-workers: empty list");
  }
  if (auto v = get("weak-per-worker")) c.weak_per_worker = parse_grid("weak-per-worker", *v);
  if (auto v = get("scaling-iterations")) c.scaling_iterations = parse_int("scaling-iterations", *v);
  if (c.scaling_iterations < 1) throw ConfigError("scaling-iterations: must be at least 1");
  return c;
}

/// key=value text that resolve(read_config_file(...)) maps back to `c`.
inline std::string format_config(const RunConfig& c) {
  using namespace detail;
  std::ostringstream os;
  os << "mode = " << to_string(c.mode) << "\n";
  os << "grid = " << format_grid(c.npoints) << "\n";
  os << "lengths = " << format_double(c.lengths[0]) << "," << format_double(c.lengths[1]) << ","
     << format_double(c.lengths[2]) << "\n";
  os << "plan = " << to_string(c.plan) << "\n";
  os << "gamma = " << format_double(c.gamma) << "\n";
  os << "mach = " << format_double(c.mach) << "\n";
  os << "pr = " << format_double(c.prandtl) << "\n";
  os << "re = " << format_double(c.reynolds) << "\n";
  os << "dt = " << format_double(c.dt) << "\n";
  os << "auto-dt = " << (c.auto_dt ? "true" : "false") << "\n";
  os << "iterations = " << c.iterations << "\n";
  os << "workers = " << c.workers << "\n";
  os << "cadence = " << c.cadence << "\n";
  os << "out = " << c.out << "\n";
  os << "print-schedule = " << (c.print_schedule ? "true" : "false") << "\n";
  os << "bench-grids = ";
  for (std::size_t i = 0; i < c.bench_grids.size(); ++i) os << (i ? "," : "") << format_grid(c.bench_grids[i]);
  os << "\nbench-plans = ";
  for (std::size_t i = 0; i < c.bench_plans.size(); ++i) os << (i ? "," : "") << to_string(c.bench_plans[i]);
  os << "\nbench-iterations = " << c.bench_iterations << "\n";
  os << "warmup = " << c.warmup << "\n";
  os << "repeats = " << c.repeats << "\n";
  os << "scaling-grid = " << format_grid(c.scaling_grid) << "\n";
  os << "scaling-workers = ";
  for (std::size_t i = 0; i < c.scaling_workers.size(); ++i) os << (i ? "," : "") << c.scaling_workers[i];
  os << "\nweak-per-worker = " << format_grid(c.weak_per_worker) << "\n";
  os << "scaling-iterations = " << c.scaling_iterations << "\n";
  return os.str();
}

inline bool operator==(const RunConfig& a, const RunConfig& b) { return format_config(a) == format_config(b); }

}  // namespace plancfd
