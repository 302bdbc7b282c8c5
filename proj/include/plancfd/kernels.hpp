#pragma once

// Executes a lowered kernel plan: primitive loops, product stages, derivative
// store loops, halo exchanges, the fused residual loop and the update loops.
//
// The residual arithmetic exists once, in residual_point(). What differs
// between plans is the derivative source it is instantiated with:
//   FETCH   read a work array filled by an earlier store loop
//   LOCAL   evaluate every derivative once per point into a local array
//   INLINE  evaluate the stencil at every occurrence
// Every source evaluates a derivative with the same point kernel from
// stencil.hpp, so all plans produce the same floating-point results.

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "plancfd/errors.hpp"
#include "plancfd/mesh.hpp"
#include "plancfd/physics.hpp"
#include "plancfd/plan.hpp"
#include "plancfd/stencil.hpp"

namespace plancfd {

namespace detail {

/// Pre-resolved pointers and weights for evaluating one catalogue derivative.
struct Recipe {
  DerivativeOrder order = DerivativeOrder::First;
  const double* a = nullptr;      // operand (or product scratch)
  const double* b = nullptr;      // second product factor, if any
  const double* inner = nullptr;  // stored inner derivative for composed terms
  std::ptrdiff_t s = 0;
  std::ptrdiff_t s_inner = 0;
  const Weights5* w = nullptr;
  const Weights5* w_inner = nullptr;

  /// Stencil applications this evaluation costs.
  int cost() const {
    const bool composed = order == DerivativeOrder::Mixed || order == DerivativeOrder::Repeated;
    return composed && !inner ? 5 : 1;
  }

  double operator()(std::ptrdiff_t n) const {
    switch (order) {
      case DerivativeOrder::First:
        return b ? d1_product(a + n, b + n, s, *w) : d1(a + n, s, *w);
      case DerivativeOrder::Second:
        return d2(a + n, s, *w);
      case DerivativeOrder::Mixed:
      case DerivativeOrder::Repeated:
        return inner ? d1(inner + n, s, *w) : d11(a + n, s_inner, *w_inner, s, *w);
    }
    return 0.0;
  }
};

struct KernelInputs {
  std::array<const double*, 10> operand{};  // indexed by Operand
  std::array<const double*, kNumDerivatives> stored{};
  std::array<Recipe, kNumDerivatives> recipe{};
};

/// Point values the residual needs besides derivatives.
struct PointState {
  double rho;
  std::array<double, 3> rhou;
  double rhoE;
  std::array<double, 3> u;
};

template <Storage Gradients, Storage Others, bool Count>
class PointDerivatives {
 public:
  PointDerivatives(const KernelInputs& in, std::ptrdiff_t n) : in_(in), n_(n) {
    if constexpr (Gradients == Storage::Local)
      for (int id = 0; id < 9; ++id) local_[id] = evaluate(id);
    if constexpr (Others == Storage::Local)
      for (int id = 9; id < kNumDerivatives; ++id) local_[id] = evaluate(id);
  }

  double du(int i, int j) { return get<Gradients>(du_id(i, j)); }
  double drho(int j) { return get<Others>(drho_id(j)); }
  double drhou(int i, int j) { return get<Others>(drhou_id(i, j)); }
  double drhoE(int j) { return get<Others>(drhoE_id(j)); }
  double dp(int j) { return get<Others>(dp_id(j)); }
  double momflux(int i, int j) { return get<Others>(momflux_id(i, j)); }
  double enflux(int j) { return get<Others>(enflux_id(j)); }
  double pu(int j) { return get<Others>(pu_id(j)); }
  double d2u(int i, int j) { return get<Others>(d2u_id(i, j)); }
  double mixed(int m, int a, int b) { return get<Others>(mixed_id(m, a, b)); }
  double ddu(int i, int j) { return get<Others>(ddu_id(i, j)); }
  double d2T(int j) { return get<Others>(d2T_id(j)); }

  long applications = 0;

 private:
  double evaluate(int id) {
    const Recipe& r = in_.recipe[static_cast<std::size_t>(id)];
    if constexpr (Count) applications += r.cost();
    return r(n_);
  }

  template <Storage S>
  double get(int id) {
    if constexpr (S == Storage::Fetch) {
      return in_.stored[static_cast<std::size_t>(id)][n_];
    } else if constexpr (S == Storage::Local) {
      return local_[static_cast<std::size_t>(id)];
    } else {
      return evaluate(id);
    }
  }

  const KernelInputs& in_;
  std::ptrdiff_t n_;
  std::array<double, kNumDerivatives> local_{};
};

}  // namespace detail

/// The expanded residual at one point; see navier_stokes_residual() for the
/// term list, which enumerates the derivative calls below in the same order.
template <class Derivs>
inline void residual_point(Derivs& d, const detail::PointState& q, const PhysicalConstants& c,
                           std::array<double, 5>& out) {
  auto compact = [&](int m, int a, int b) { return a == b ? d.d2u(m, a) : d.mixed(m, a, b); };
  auto wide = [&](int m, int a, int b) { return a == b ? d.ddu(m, a) : d.mixed(m, a, b); };

  double mass = 0.0;
  for (int j = 0; j < 3; ++j) mass += 0.5 * (d.drhou(j, j) + q.u[j] * d.drho(j) + q.rho * d.du(j, j));
  out[0] = -mass;

  for (int i = 0; i < 3; ++i) {
    double conv = 0.0;
    for (int j = 0; j < 3; ++j)
      conv += 0.5 * (d.momflux(i, j) + q.u[j] * d.drhou(i, j) + q.rhou[i] * d.du(j, j));
    const double grad_p = d.dp(i);
    double lap = 0.0, cross = 0.0, dil = 0.0;
    for (int j = 0; j < 3; ++j) lap += d.d2u(i, j);
    for (int j = 0; j < 3; ++j) cross += compact(j, i, j);
    for (int k = 0; k < 3; ++k) dil += compact(k, i, k);
    const double visc = c.inv_re * (lap + cross - (2.0 / 3.0) * dil);
    out[static_cast<std::size_t>(1 + i)] = -conv - grad_p + visc;
  }

  double conv = 0.0;
  for (int j = 0; j < 3; ++j) conv += 0.5 * (d.enflux(j) + q.u[j] * d.drhoE(j) + q.rhoE * d.du(j, j));
  double pwork = 0.0;
  for (int j = 0; j < 3; ++j) pwork += d.pu(j);
  double cond = 0.0;
  for (int j = 0; j < 3; ++j) cond += d.d2T(j);
  Gradient3 grad;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) grad[i][j] = d.du(i, j);
  const SymmetricTensor tau = stress_tensor(grad, c);
  double work = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) work += tau(i, j) * d.du(i, j);
  for (int i = 0; i < 3; ++i) {
    double lap = 0.0, cross = 0.0, dil = 0.0;
    for (int j = 0; j < 3; ++j) lap += d.ddu(i, j);
    for (int j = 0; j < 3; ++j) cross += wide(j, i, j);
    for (int k = 0; k < 3; ++k) dil += wide(k, i, k);
    work += q.u[i] * (c.inv_re * (lap + cross - (2.0 / 3.0) * dil));
  }
  out[4] = -conv - pwork + c.heat_coeff * cond + work;
}

/// Halo width a schedule needs. A composed derivative evaluated from u rather
/// than from a stored gradient reaches two points beyond the inner stencil,
/// and D_j(D_j u) does so along a single axis.
inline int required_halo(const Schedule& s) {
  for (const auto& d : derivative_catalogue())
    if (d.order == DerivativeOrder::Repeated && !s.stored[static_cast<std::size_t>(du_id(0, 0))] &&
        s.storage[static_cast<std::size_t>(d.id)] != Storage::Fetch)
      return 4;
  return 2;
}

/// Halo width that lets every shipped plan run on one grid.
inline constexpr int kSolverHalo = 4;

/// Runs the schedule of one kernel plan and owns its work arrays.
class ResidualEvaluator {
 public:
  ResidualEvaluator(const Grid& grid, const KernelPlan& plan)
      : grid_(grid), schedule_(lower_plan(plan)), weights_(StencilWeights::for_grid(grid)) {
    if (grid.halo < required_halo(schedule_))
      throw ConfigError("plan " + to_string(plan.name) + " needs halo width " + std::to_string(required_halo(schedule_)) +
                        ", grid has " + std::to_string(grid.halo));
    stored_.resize(kNumDerivatives);
    for (int id = 0; id < kNumDerivatives; ++id)
      if (schedule_.stored[static_cast<std::size_t>(id)]) stored_[static_cast<std::size_t>(id)].emplace(grid);
    for (int s = 0; s < schedule_.scratch_slots; ++s) scratch_.emplace_back(grid);
  }

  const Schedule& schedule() const { return schedule_; }
  const Grid& grid() const { return grid_; }

  /// Grid-sized arrays this evaluator allocated (stored derivatives + scratch).
  int work_arrays() const {
    int n = static_cast<int>(scratch_.size());
    for (const auto& f : stored_) n += f.has_value();
    return n;
  }

  /// Primitive variables and residual. Conservative halos must be current.
  /// Throws DivergenceError without a location on non-finite values.
  void evaluate(ConservativeState& s, Residual& r, const PhysicalConstants& c) {
    for (const auto& step : schedule_.steps) {
      if (step.phase != Phase::Residual) continue;
      if (step.kind == ScheduleStep::Kind::HaloExchange) {
        for (int id : step.exchange_derivatives) halo_exchange(*stored_[static_cast<std::size_t>(id)]);
        continue;
      }
      switch (step.group_kind) {
        case GroupKind::PrimitivesVelocity: eval_velocity(s); break;
        case GroupKind::PrimitivesPressure: eval_pressure(s, c); break;
        case GroupKind::PrimitivesTemperature: eval_temperature(s, c); break;
        case GroupKind::PrimitivesFused: eval_primitives_fused(s, c); break;
        case GroupKind::ProductStage: run_product_stage(s, step); break;
        case GroupKind::StoreDerivatives: run_store(s, step); break;
        case GroupKind::Residual: run_residual(s, r, c); break;
        case GroupKind::Update: break;
      }
    }
  }

  /// conservative = saved + coeff * residual, then refresh conservative halos.
  void update(ConservativeState& s, const SavedState& saved, const Residual& r, double coeff) {
    for (const auto& step : schedule_.steps) {
      if (step.phase != Phase::Update) continue;
      if (step.kind == ScheduleStep::Kind::HaloExchange) {
        halo_exchange(s.rho);
        for (auto& f : s.rhou) halo_exchange(f);
        halo_exchange(s.rhoE);
        continue;
      }
      struct Target {
        double* q;
        const double* q0;
        const double* dq;
      };
      std::vector<Target> targets;
      for (int v : step.variables) {
        switch (v) {
          case 0: targets.push_back({s.rho.data(), saved.rho.data(), r.d_rho.data()}); break;
          case 4: targets.push_back({s.rhoE.data(), saved.rhoE.data(), r.d_rhoE.data()}); break;
          default:
            targets.push_back({s.rhou[v - 1].data(), saved.rhou[v - 1].data(), r.d_rhou[v - 1].data()});
        }
      }
      for_each_interior(grid_, [&](int, int, int, std::ptrdiff_t n) {
        for (const auto& t : targets) t.q[n] = t.q0[n] + coeff * t.dq[n];
      });
    }
  }

  /// In counting mode every stencil evaluation is tallied.
  void set_counting(bool on) { counting_ = on; }
  long stencil_applications() const { return applications_; }
  void reset_applications() { applications_ = 0; }

 private:
  detail::KernelInputs inputs(const ConservativeState& s) const {
    detail::KernelInputs in;
    in.operand = {s.rho.data(),  s.rhou[0].data(), s.rhou[1].data(), s.rhou[2].data(), s.rhoE.data(),
                  s.u[0].data(), s.u[1].data(),    s.u[2].data(),    s.p.data(),       s.T.data()};
    for (int id = 0; id < kNumDerivatives; ++id)
      if (stored_[static_cast<std::size_t>(id)]) in.stored[static_cast<std::size_t>(id)] = stored_[static_cast<std::size_t>(id)]->data();
    const auto strides = grid_.strides();
    for (const auto& d : derivative_catalogue()) {
      detail::Recipe r;
      r.order = d.order;
      r.a = in.operand[static_cast<std::size_t>(d.target)];
      if (d.is_product()) r.b = in.operand[static_cast<std::size_t>(*d.factor)];
      r.s = strides[static_cast<std::size_t>(d.axis)];
      r.w = d.order == DerivativeOrder::Second ? &weights_.second[static_cast<std::size_t>(d.axis)]
                                               : &weights_.first[static_cast<std::size_t>(d.axis)];
      if (d.is_composed()) {
        const int m = static_cast<int>(d.target) - static_cast<int>(Operand::u0);
        r.inner = in.stored[static_cast<std::size_t>(du_id(m, d.inner_axis))];
        r.s_inner = strides[static_cast<std::size_t>(d.inner_axis)];
        r.w_inner = &weights_.first[static_cast<std::size_t>(d.inner_axis)];
      }
      in.recipe[static_cast<std::size_t>(d.id)] = r;
    }
    return in;
  }

  void run_product_stage(const ConservativeState& s, const ScheduleStep& step) {
    const auto& d = derivative(step.derivatives.at(0));
    const double* a = operand(s, d.target);
    const double* b = operand(s, *d.factor);
    double* out = scratch_.at(static_cast<std::size_t>(step.scratch_slot)).data();
    for_each_padded(grid_, [&](std::ptrdiff_t n) { out[n] = a[n] * b[n]; });
  }

  void run_store(const ConservativeState& s, const ScheduleStep& step) {
    detail::KernelInputs in = inputs(s);
    if (step.scratch_slot >= 0) {
      // products were formed by the preceding product stage
      for (int id : step.derivatives) {
        auto& r = in.recipe[static_cast<std::size_t>(id)];
        r.a = scratch_.at(static_cast<std::size_t>(step.scratch_slot)).data();
        r.b = nullptr;
      }
    }
    std::vector<std::pair<const detail::Recipe*, double*>> jobs;
    for (int id : step.derivatives)
      jobs.emplace_back(&in.recipe[static_cast<std::size_t>(id)], stored_[static_cast<std::size_t>(id)]->data());
    long cost_per_point = 0;
    for (const auto& [rec, out] : jobs) cost_per_point += rec->cost();
    for_each_interior(grid_, [&](int, int, int, std::ptrdiff_t n) {
      for (const auto& [rec, out] : jobs) out[n] = (*rec)(n);
    });
    if (counting_) applications_ += cost_per_point * static_cast<long>(grid_.interior_size());
  }

  template <Storage G, Storage O, bool Count>
  void residual_loop(const detail::KernelInputs& in, const ConservativeState& s, Residual& r,
                     const PhysicalConstants& c) {
    const Grid& g = grid_;
    const double* rho = s.rho.data();
    const double* m0 = s.rhou[0].data();
    const double* m1 = s.rhou[1].data();
    const double* m2 = s.rhou[2].data();
    const double* rhoE = s.rhoE.data();
    const double* u0 = s.u[0].data();
    const double* u1 = s.u[1].data();
    const double* u2 = s.u[2].data();
    double* out_rho = r.d_rho.data();
    double* out_m0 = r.d_rhou[0].data();
    double* out_m1 = r.d_rhou[1].data();
    double* out_m2 = r.d_rhou[2].data();
    double* out_E = r.d_rhoE.data();
    long apps = 0;
    bool finite = true;
    const int n0 = g.npoints[0], n1 = g.npoints[1], n2 = g.npoints[2];
#pragma omp parallel for schedule(static) reduction(+ : apps) reduction(&& : finite)
    for (int i = 0; i < n0; ++i) {
      for (int j = 0; j < n1; ++j) {
        std::ptrdiff_t n = g.index(i, j, 0);
        for (int k = 0; k < n2; ++k, ++n) {
          detail::PointDerivatives<G, O, Count> d(in, n);
          const detail::PointState q{rho[n], {m0[n], m1[n], m2[n]}, rhoE[n], {u0[n], u1[n], u2[n]}};
          std::array<double, 5> o;
          residual_point(d, q, c, o);
          out_rho[n] = o[0];
          out_m0[n] = o[1];
          out_m1[n] = o[2];
          out_m2[n] = o[3];
          out_E[n] = o[4];
          finite = finite && std::isfinite(o[0]) && std::isfinite(o[1]) && std::isfinite(o[2]) &&
                   std::isfinite(o[3]) && std::isfinite(o[4]);
          if constexpr (Count) apps += d.applications;
        }
      }
    }
    if (Count) applications_ += apps;
    if (!finite) throw DivergenceError("non-finite residual");
  }

  template <Storage G, Storage O>
  void residual_dispatch_count(const detail::KernelInputs& in, const ConservativeState& s, Residual& r,
                               const PhysicalConstants& c) {
    if (counting_) {
      residual_loop<G, O, true>(in, s, r, c);
    } else {
      residual_loop<G, O, false>(in, s, r, c);
    }
  }

  template <Storage G>
  void residual_dispatch_other(const detail::KernelInputs& in, const ConservativeState& s, Residual& r,
                               const PhysicalConstants& c) {
    switch (schedule_.other_storage()) {
      case Storage::Fetch: residual_dispatch_count<G, Storage::Fetch>(in, s, r, c); break;
      case Storage::Local: residual_dispatch_count<G, Storage::Local>(in, s, r, c); break;
      case Storage::Inline: residual_dispatch_count<G, Storage::Inline>(in, s, r, c); break;
    }
  }

  void run_residual(const ConservativeState& s, Residual& r, const PhysicalConstants& c) {
    const detail::KernelInputs in = inputs(s);
    switch (schedule_.gradient_storage()) {
      case Storage::Fetch: residual_dispatch_other<Storage::Fetch>(in, s, r, c); break;
      case Storage::Local: residual_dispatch_other<Storage::Local>(in, s, r, c); break;
      case Storage::Inline: residual_dispatch_other<Storage::Inline>(in, s, r, c); break;
    }
  }

  static const double* operand(const ConservativeState& s, Operand o) {
    switch (o) {
      case Operand::rho: return s.rho.data();
      case Operand::rhou0: return s.rhou[0].data();
      case Operand::rhou1: return s.rhou[1].data();
      case Operand::rhou2: return s.rhou[2].data();
      case Operand::rhoE: return s.rhoE.data();
      case Operand::u0: return s.u[0].data();
      case Operand::u1: return s.u[1].data();
      case Operand::u2: return s.u[2].data();
      case Operand::p: return s.p.data();
      case Operand::T: return s.T.data();
    }
    return nullptr;
  }

  Grid grid_;
  Schedule schedule_;
  StencilWeights weights_;
  std::vector<std::optional<Field>> stored_;
  std::vector<Field> scratch_;
  bool counting_ = false;
  long applications_ = 0;
};

/// Primitive recovery plus residual under the given plan.
inline Residual assemble_residual(ConservativeState& state, const PhysicalConstants& c, const KernelPlan& plan) {
  ResidualEvaluator ev(state.grid(), plan);
  Residual r(state.grid());
  ev.evaluate(state, r, c);
  return r;
}

}  // namespace plancfd
