#pragma once

// Three-stage low-storage Runge-Kutta in save-state form:
//
//   save-state:  q0 = q
//   substep k:   q  = q0 + alpha[k] dt R(q),   k = 0, 1, 2
//
// with alpha = (1/3, 1/2, 1). Two registers of conservative fields are live
// (q and q0) plus the residual.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "plancfd/diagnostics.hpp"
#include "plancfd/errors.hpp"
#include "plancfd/kernels.hpp"
#include "plancfd/mesh.hpp"
#include "plancfd/physics.hpp"
#include "plancfd/plan.hpp"

namespace plancfd {

struct RKScheme {
  static constexpr int stages = 3;
  std::array<double, 3> alpha{1.0 / 3.0, 1.0 / 2.0, 1.0};
  double dt = 3.385e-3;
};

/// Reference step 3.385e-3 at 64 points per axis, halved per doubling.
inline double default_dt(int npoints) {
  if (npoints <= 0) throw ConfigError("grid size must be positive");
  return 3.385e-3 * (64.0 / npoints);
}

/// One outer iteration on anything exposing save_state(),
/// evaluate_residual(k) and update(coeff, k).
template <class System>
void advance(System& sys, const RKScheme& scheme) {
  sys.save_state();
  for (int k = 0; k < RKScheme::stages; ++k) {
    sys.evaluate_residual(k);
    sys.update(scheme.alpha[static_cast<std::size_t>(k)] * scheme.dt, k);
  }
}

/// du/dt = lambda u, the surrogate the stability polynomial is read from.
struct LinearScalarSystem {
  double lambda = -1.0;
  double u = 1.0;
  double saved = 0.0;
  double r = 0.0;

  void save_state() { saved = u; }
  void evaluate_residual(int) { r = lambda * u; }
  void update(double coeff, int) { u = saved + coeff * r; }
};

struct RunReport {
  std::vector<DiagnosticsRecord> records;
  int iterations_completed = 0;
  double loop_seconds = 0.0;
  std::optional<DivergenceError> divergence;

  bool ok() const { return !divergence.has_value(); }
};

/// Solver state across iterations: the conservative state, its saved copy,
/// the residual and the evaluator that owns the plan's work arrays.
class Solver {
 public:
  Solver(ConservativeState state, const PhysicalConstants& c, const KernelPlan& plan, RKScheme scheme)
      : state_(std::move(state)),
        saved_(state_.grid()),
        residual_(state_.grid()),
        evaluator_(state_.grid(), plan),
        constants_(c),
        scheme_(scheme) {
    if (!(scheme.dt > 0.0)) throw ConfigError("dt must be positive");
  }

  const ConservativeState& state() const { return state_; }
  ConservativeState& state() { return state_; }
  const SavedState& saved() const { return saved_; }
  const Residual& residual() const { return residual_; }
  ResidualEvaluator& evaluator() { return evaluator_; }
  const RKScheme& scheme() const { return scheme_; }
  int iteration() const { return iteration_; }
  int substep() const { return substep_; }
  double time() const { return iteration_ * scheme_.dt; }

  /// Restart from a new initial state on the same grid, keeping allocations.
  void reset(const ConservativeState& initial) {
    if (!(initial.grid() == state_.grid())) throw ConfigError("reset state is on a different grid");
    state_.rho = initial.rho;
    state_.rhou = initial.rhou;
    state_.rhoE = initial.rhoE;
    iteration_ = 0;
    substep_ = 0;
  }

  void save_state() { saved_.copy_from(state_); }

  void evaluate_residual(int k) {
    substep_ = k;
    try {
      evaluator_.evaluate(state_, residual_, constants_);
    } catch (const DivergenceError& e) {
      throw DivergenceError(e.reason(), iteration_, k);
    }
  }

  void update(double coeff, int) { evaluator_.update(state_, saved_, residual_, coeff); }

  /// One outer iteration.
  void step() {
    advance(*this, scheme_);
    ++iteration_;
  }

  /// niter iterations. Diagnostics are sampled at iteration 0, every
  /// `cadence` iterations and at the end; none when niter is 0. Only the
  /// iteration loop is timed. A divergence stops the run and is returned in
  /// the report together with the records gathered so far.
  RunReport run(int niter, int cadence, std::ostream* progress = nullptr) {
    if (niter < 0) throw ConfigError("iterations must be non-negative");
    if (cadence < 1) throw ConfigError("diagnostics cadence must be at least 1");
    RunReport report;
    if (niter == 0) return report;
    const int start = iteration_;
    auto sample = [&] {
      if (!(reduce_min(state_.rho) > 0.0)) throw DivergenceError("non-positive density", iteration_, -1);
      report.records.push_back(make_record(state_, time()));
      if (progress) {
        char line[160];
        std::snprintf(line, sizeof line, "iter %d  t=%.6f  ke=%.10e  enstrophy=%.10e\n", iteration_, time(),
                      report.records.back().kinetic_energy, report.records.back().enstrophy);
        *progress << line << std::flush;
      }
    };
    double timed = 0.0;
    try {
      sample();
      for (int n = 0; n < niter; ++n) {
        const auto t0 = std::chrono::steady_clock::now();
        step();
        timed += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const int done = iteration_ - start;
        if (done % cadence == 0 || done == niter) sample();
      }
    } catch (const DivergenceError& e) {
      report.divergence = e;
    }
    report.iterations_completed = iteration_ - start;
    report.loop_seconds = timed;
    return report;
  }

 private:
  static double reduce_min(const Field& f) {
    const Grid& g = f.grid();
    double m = f(0, 0, 0);
    for (int i = 0; i < g.npoints[0]; ++i)
      for (int j = 0; j < g.npoints[1]; ++j)
        for (int k = 0; k < g.npoints[2]; ++k) m = std::min(m, f(i, j, k));
    return m;
  }

  ConservativeState state_;
  SavedState saved_;
  Residual residual_;
  ResidualEvaluator evaluator_;
  PhysicalConstants constants_;
  RKScheme scheme_;
  int iteration_ = 0;
  int substep_ = 0;
};

}  // namespace plancfd
