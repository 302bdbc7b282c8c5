#pragma once

// Kernel plans.
//
// The residual of the Navier-Stokes system is written once, as a fixed list of
// derivative terms (the catalogue below). A KernelPlan says, for every
// derivative, whether it lives in a grid-sized work array (FETCH), in a
// per-point local computed once (LOCAL) or is re-expanded at each use
// (INLINE), and lists the grid loops that produce the work arrays. Lowering
// turns a plan into an ordered schedule the executor runs.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "plancfd/errors.hpp"

namespace plancfd {

enum class PlanName { BL, RA, RS, SN, SS };

inline constexpr std::array<PlanName, 5> kAllPlans = {PlanName::BL, PlanName::RA, PlanName::RS,
                                                      PlanName::SN, PlanName::SS};

inline std::string to_string(PlanName p) {
  switch (p) {
    case PlanName::BL: return "BL";
    case PlanName::RA: return "RA";
    case PlanName::RS: return "RS";
    case PlanName::SN: return "SN";
    case PlanName::SS: return "SS";
  }
  return "?";
}

inline PlanName parse_plan_name(std::string_view text) {
  std::string up(text);
  for (auto& ch : up) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  for (PlanName p : kAllPlans)
    if (to_string(p) == up) return p;
  throw ConfigError("unknown plan '" + std::string(text) + "'; expected one of {bl, ra, rs, sn, ss}");
}

// ---------------------------------------------------------------------------
// Derivative catalogue

/// Grid quantities a derivative can act on.
enum class Operand : std::uint8_t { rho, rhou0, rhou1, rhou2, rhoE, u0, u1, u2, p, T };

inline std::string to_string(Operand o) {
  static constexpr std::array<const char*, 10> names = {"rho", "rhou0", "rhou1", "rhou2", "rhoE",
                                                        "u0",  "u1",    "u2",    "p",     "T"};
  return names[static_cast<std::size_t>(o)];
}

inline Operand momentum(int i) { return static_cast<Operand>(1 + i); }
inline Operand velocity(int i) { return static_cast<Operand>(5 + i); }

enum class DerivativeOrder {
  First,     // D(f, x_a); f may be a product of two operands
  Second,    // compact 5-point d2f/dx_a^2
  Mixed,     // D(D(f, x_a), x_b), a < b
  Repeated,  // D(D(f, x_a), x_a), the wide second derivative
};

struct DerivativeDescriptor {
  int id = 0;
  DerivativeOrder order = DerivativeOrder::First;
  Operand target = Operand::rho;
  std::optional<Operand> factor;  // set for products target*factor
  int axis = 0;                   // outer (or only) axis
  int inner_axis = 0;             // Mixed / Repeated only
  std::string label;

  bool is_product() const { return factor.has_value(); }
  bool is_composed() const {
    return order == DerivativeOrder::Mixed || order == DerivativeOrder::Repeated;
  }
  /// D(u_i, x_j): the set the RS and SS plans keep in work arrays.
  bool is_velocity_gradient() const {
    return order == DerivativeOrder::First && !factor &&
           (target == Operand::u0 || target == Operand::u1 || target == Operand::u2);
  }
  std::string product_label() const {
    return to_string(target) + "*" + to_string(*factor);
  }
};

inline constexpr int kNumDerivatives = 69;

// Catalogue indices. i, j, m are velocity/momentum components; a, b axes.
constexpr int du_id(int i, int j) { return 3 * i + j; }
constexpr int drho_id(int j) { return 9 + j; }
constexpr int drhou_id(int i, int j) { return 12 + 3 * i + j; }
constexpr int drhoE_id(int j) { return 21 + j; }
constexpr int dp_id(int j) { return 24 + j; }
constexpr int momflux_id(int i, int j) { return 27 + 3 * i + j; }  // D(rhou_i*u_j, x_j)
constexpr int enflux_id(int j) { return 36 + j; }                  // D(rhoE*u_j, x_j)
constexpr int pu_id(int j) { return 39 + j; }                      // D(p*u_j, x_j)
constexpr int d2u_id(int i, int j) { return 42 + 3 * i + j; }
constexpr int mixed_id(int m, int a, int b) {
  const int lo = a < b ? a : b;
  const int hi = a < b ? b : a;
  const int pair = lo == 0 ? hi - 1 : 2;
  return 51 + 2 * pair + (m == lo ? 0 : 1);
}
constexpr int ddu_id(int i, int j) { return 57 + 3 * i + j; }
constexpr int d2T_id(int j) { return 66 + j; }

inline const std::vector<DerivativeDescriptor>& derivative_catalogue() {
  static const std::vector<DerivativeDescriptor> catalogue = [] {
    std::vector<DerivativeDescriptor> c(kNumDerivatives);
    auto axis_name = [](int a) { return "x" + std::to_string(a); };
    auto first = [&](int id, Operand f, int a) {
      c[id] = {id, DerivativeOrder::First, f, std::nullopt, a, a,
               "D(" + to_string(f) + "," + axis_name(a) + ")"};
    };
    auto product = [&](int id, Operand f, Operand g, int a) {
      c[id] = {id, DerivativeOrder::First, f, g, a, a,
               "D(" + to_string(f) + "*" + to_string(g) + "," + axis_name(a) + ")"};
    };
    auto second = [&](int id, Operand f, int a) {
      c[id] = {id, DerivativeOrder::Second, f, std::nullopt, a, a,
               "D2(" + to_string(f) + "," + axis_name(a) + ")"};
    };
    auto composed = [&](int id, DerivativeOrder o, Operand f, int inner, int outer) {
      c[id] = {id, o, f, std::nullopt, outer, inner,
               "D(D(" + to_string(f) + "," + axis_name(inner) + ")," + axis_name(outer) + ")"};
    };
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        first(du_id(i, j), velocity(i), j);
        first(drhou_id(i, j), momentum(i), j);
        product(momflux_id(i, j), momentum(i), velocity(j), j);
        second(d2u_id(i, j), velocity(i), j);
        composed(ddu_id(i, j), DerivativeOrder::Repeated, velocity(i), j, j);
      }
    for (int j = 0; j < 3; ++j) {
      first(drho_id(j), Operand::rho, j);
      first(drhoE_id(j), Operand::rhoE, j);
      first(dp_id(j), Operand::p, j);
      product(enflux_id(j), Operand::rhoE, velocity(j), j);
      product(pu_id(j), Operand::p, velocity(j), j);
      second(d2T_id(j), Operand::T, j);
    }
    for (int a = 0; a < 3; ++a)
      for (int b = a + 1; b < 3; ++b) {
        composed(mixed_id(a, a, b), DerivativeOrder::Mixed, velocity(a), a, b);
        composed(mixed_id(b, a, b), DerivativeOrder::Mixed, velocity(b), a, b);
      }
    return c;
  }();
  return catalogue;
}

inline const DerivativeDescriptor& derivative(int id) { return derivative_catalogue().at(id); }

inline std::optional<int> find_derivative(std::string_view label) {
  for (const auto& d : derivative_catalogue())
    if (d.label == label) return d.id;
  return std::nullopt;
}

/// The nine D(u_i, x_j).
inline std::set<int> velocity_gradient_ids() {
  std::set<int> s;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s.insert(du_id(i, j));
  return s;
}

// ---------------------------------------------------------------------------
// Residual term list

enum class Equation { Mass, Momentum0, Momentum1, Momentum2, Energy };

inline std::string to_string(Equation e) {
  switch (e) {
    case Equation::Mass: return "mass";
    case Equation::Momentum0: return "momentum0";
    case Equation::Momentum1: return "momentum1";
    case Equation::Momentum2: return "momentum2";
    case Equation::Energy: return "energy";
  }
  return "?";
}

struct TermOccurrence {
  Equation equation;
  int derivative;
  std::string role;
};

/// Every derivative occurrence in the expanded residual, in evaluation order.
///
///   mass      -sum_j 1/2[D_j(rho u_j) + u_j D_j rho + rho D_j u_j]
///   momentum  -sum_j 1/2[D_j(rho u_i u_j) + u_j D_j(rho u_i) + rho u_i D_j u_j]
///             - D_i p + V_i
///   energy    -sum_j 1/2[D_j(rho E u_j) + u_j D_j(rho E) + rho E D_j u_j]
///             - sum_j D_j(p u_j) + k sum_j D2_j T
///             + tau_ij D_j u_i + u_i W_i
///
/// V_i = (1/Re)[sum_j D2_j u_i + sum_j D_iD_j u_j - 2/3 sum_k D_iD_k u_k] uses
/// the compact second derivative on the diagonal. W_i is the same expansion
/// with the diagonal taken as D_j(D_j u_i).
struct ResidualSpec {
  std::vector<TermOccurrence> terms;

  /// Number of occurrences of each catalogue derivative.
  std::array<int, kNumDerivatives> use_counts() const {
    std::array<int, kNumDerivatives> n{};
    for (const auto& t : terms) ++n[static_cast<std::size_t>(t.derivative)];
    return n;
  }
};

inline ResidualSpec navier_stokes_residual() {
  ResidualSpec spec;
  auto add = [&](Equation e, int d, std::string role) { spec.terms.push_back({e, d, std::move(role)}); };
  auto compact = [](int m, int a, int b) { return a == b ? d2u_id(m, a) : mixed_id(m, a, b); };
  auto wide = [](int m, int a, int b) { return a == b ? ddu_id(m, a) : mixed_id(m, a, b); };

  for (int j = 0; j < 3; ++j) {
    add(Equation::Mass, drhou_id(j, j), "convective flux");
    add(Equation::Mass, drho_id(j), "convective advective");
    add(Equation::Mass, du_id(j, j), "convective dilatation");
  }
  for (int i = 0; i < 3; ++i) {
    const auto eq = static_cast<Equation>(1 + i);
    for (int j = 0; j < 3; ++j) {
      add(eq, momflux_id(i, j), "convective flux");
      add(eq, drhou_id(i, j), "convective advective");
      add(eq, du_id(j, j), "convective dilatation");
    }
    add(eq, dp_id(i), "pressure gradient");
    for (int j = 0; j < 3; ++j) add(eq, d2u_id(i, j), "viscous laplacian");
    for (int j = 0; j < 3; ++j) add(eq, compact(j, i, j), "viscous cross");
    for (int k = 0; k < 3; ++k) add(eq, compact(k, i, k), "viscous dilatation");
  }
  for (int j = 0; j < 3; ++j) {
    add(Equation::Energy, enflux_id(j), "convective flux");
    add(Equation::Energy, drhoE_id(j), "convective advective");
    add(Equation::Energy, du_id(j, j), "convective dilatation");
  }
  for (int j = 0; j < 3; ++j) add(Equation::Energy, pu_id(j), "pressure work");
  for (int j = 0; j < 3; ++j) add(Equation::Energy, d2T_id(j), "heat conduction");
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) add(Equation::Energy, du_id(i, j), "stress tensor");
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) add(Equation::Energy, du_id(i, j), "viscous dissipation");
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) add(Equation::Energy, ddu_id(i, j), "viscous work laplacian");
    for (int j = 0; j < 3; ++j) add(Equation::Energy, wide(j, i, j), "viscous work cross");
    for (int k = 0; k < 3; ++k) add(Equation::Energy, wide(k, i, k), "viscous work dilatation");
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Plans

enum class Storage { Fetch, Local, Inline };

inline std::string to_string(Storage s) {
  switch (s) {
    case Storage::Fetch: return "FETCH";
    case Storage::Local: return "LOCAL";
    case Storage::Inline: return "INLINE";
  }
  return "?";
}

enum class GroupKind {
  PrimitivesVelocity,
  PrimitivesPressure,
  PrimitivesTemperature,
  PrimitivesFused,
  ProductStage,
  StoreDerivatives,
  Residual,
  Update,
};

/// One assignment inside a grid loop. Names follow a small convention:
/// state and primitive fields by operand name, "wk:<label>" for derivative
/// work arrays, "tmp:<a*b>" for product scratch, "res:<var>" for residuals and
/// "saved:<var>" for the start-of-step copy.
struct Statement {
  std::string writes;
  std::vector<std::string> reads;           // same-point reads
  std::vector<std::string> neighbor_reads;  // stencil reads, need current halos
};

struct LoopGroup {
  std::string name;
  GroupKind kind = GroupKind::Residual;
  std::vector<int> derivatives;  // ProductStage / StoreDerivatives
  std::vector<int> variables;    // Update: 0 rho, 1-3 rhou, 4 rhoE
  std::vector<Statement> statements;
};

struct KernelPlan {
  PlanName name = PlanName::BL;
  bool store_derivatives = false;
  std::set<int> derivatives_to_store;
  bool local_variables = false;
  std::vector<LoopGroup> loop_groups;

  /// Storage class of a catalogue derivative under this plan.
  Storage storage(int id) const {
    if (store_derivatives || derivatives_to_store.count(id)) return Storage::Fetch;
    return local_variables ? Storage::Local : Storage::Inline;
  }
};

inline const std::array<std::string, 5>& conservative_names() {
  static const std::array<std::string, 5> n = {"rho", "rhou0", "rhou1", "rhou2", "rhoE"};
  return n;
}

inline std::string work_name(int id) { return "wk:" + derivative(id).label; }
inline std::string scratch_name(int id) { return "tmp:" + derivative(id).product_label(); }

namespace detail {

/// What a stencil for derivative `id` reads at neighbouring points when it is
/// evaluated from grid data (not fetched). Composed derivatives read the stored
/// inner derivative when velocity gradients are kept in work arrays.
inline std::vector<std::string> stencil_sources(int id, bool gradients_stored,
                                                bool product_from_scratch) {
  const auto& d = derivative(id);
  if (d.is_composed()) {
    if (gradients_stored) {
      const int m = static_cast<int>(d.target) - static_cast<int>(Operand::u0);
      return {work_name(du_id(m, d.inner_axis))};
    }
    return {to_string(d.target)};
  }
  if (d.is_product()) {
    if (product_from_scratch) return {scratch_name(id)};
    return {to_string(d.target), to_string(*d.factor)};
  }
  return {to_string(d.target)};
}

inline void add_unique(std::vector<std::string>& v, const std::string& s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

}  // namespace detail

inline LoopGroup make_primitives_grouped_velocity() {
  LoopGroup g{"primitives:velocity", GroupKind::PrimitivesVelocity, {}, {}, {}};
  for (int i = 0; i < 3; ++i) g.statements.push_back({to_string(velocity(i)), {"rho", to_string(momentum(i))}, {}});
  return g;
}

inline LoopGroup make_primitives_grouped_pressure() {
  return {"primitives:pressure", GroupKind::PrimitivesPressure, {}, {},
          {{"p", {"rhoE", "rho", "u0", "u1", "u2"}, {}}}};
}

inline LoopGroup make_primitives_grouped_temperature() {
  return {"primitives:temperature", GroupKind::PrimitivesTemperature, {}, {}, {{"T", {"p", "rho"}, {}}}};
}

/// u_i, p and T from the conservative variables only.
inline LoopGroup make_primitives_fused() {
  LoopGroup g{"primitives:fused", GroupKind::PrimitivesFused, {}, {}, {}};
  const std::vector<std::string> cons = {"rho", "rhou0", "rhou1", "rhou2", "rhoE"};
  for (int i = 0; i < 3; ++i) g.statements.push_back({to_string(velocity(i)), {"rho", to_string(momentum(i))}, {}});
  g.statements.push_back({"p", cons, {}});
  g.statements.push_back({"T", cons, {}});
  return g;
}

/// Stage one of a stored product derivative: the product into scratch.
inline LoopGroup make_product_stage(int id) {
  const auto& d = derivative(id);
  return {"product:" + d.product_label(), GroupKind::ProductStage, {id}, {},
          {{scratch_name(id), {to_string(d.target), to_string(*d.factor)}, {}}}};
}

/// A loop evaluating the listed derivatives into work arrays.
inline LoopGroup make_store_group(std::string name, const std::vector<int>& ids, bool gradients_stored) {
  LoopGroup g{std::move(name), GroupKind::StoreDerivatives, ids, {}, {}};
  for (int id : ids) {
    g.statements.push_back({work_name(id), {}, detail::stencil_sources(id, gradients_stored, true)});
  }
  return g;
}

/// The residual loop; reads follow from each derivative's storage class.
inline LoopGroup make_residual_group(const KernelPlan& plan) {
  const bool grads_stored = plan.storage(du_id(0, 0)) == Storage::Fetch;
  std::vector<std::string> reads = {"rho", "rhou0", "rhou1", "rhou2", "rhoE", "u0", "u1", "u2", "p"};
  std::vector<std::string> neighbor;
  for (const auto& d : derivative_catalogue()) {
    if (plan.storage(d.id) == Storage::Fetch) {
      detail::add_unique(reads, work_name(d.id));
    } else {
      for (const auto& s : detail::stencil_sources(d.id, grads_stored, false)) detail::add_unique(neighbor, s);
    }
  }
  LoopGroup g{"residual", GroupKind::Residual, {}, {}, {}};
  for (const auto& v : conservative_names()) g.statements.push_back({"res:" + v, reads, neighbor});
  return g;
}

inline LoopGroup make_update_group(std::string name, const std::vector<int>& vars) {
  LoopGroup g{std::move(name), GroupKind::Update, {}, vars, {}};
  for (int v : vars) {
    const auto& n = conservative_names()[static_cast<std::size_t>(v)];
    g.statements.push_back({n, {"saved:" + n, "res:" + n}, {}});
  }
  return g;
}

/// The five shipped plans.
inline KernelPlan build_plan(PlanName name) {
  KernelPlan plan;
  plan.name = name;
  const auto& cat = derivative_catalogue();
  switch (name) {
    case PlanName::BL:
      plan.store_derivatives = true;
      for (const auto& d : cat) plan.derivatives_to_store.insert(d.id);
      break;
    case PlanName::RA:
      break;
    case PlanName::SN:
      plan.local_variables = true;
      break;
    case PlanName::RS:
      plan.derivatives_to_store = velocity_gradient_ids();
      break;
    case PlanName::SS:
      plan.derivatives_to_store = velocity_gradient_ids();
      plan.local_variables = true;
      break;
  }

  auto& groups = plan.loop_groups;
  if (name == PlanName::BL) {
    groups.push_back(make_primitives_grouped_velocity());
    groups.push_back(make_primitives_grouped_pressure());
    groups.push_back(make_primitives_grouped_temperature());
    // first derivatives of single fields
    for (const auto& d : cat)
      if (d.order == DerivativeOrder::First && !d.is_product()) groups.push_back(make_store_group(d.label, {d.id}, true));
    // products in two stages through a reused scratch array
    for (const auto& d : cat)
      if (d.is_product()) {
        groups.push_back(make_product_stage(d.id));
        groups.push_back(make_store_group(d.label, {d.id}, true));
      }
    for (const auto& d : cat)
      if (d.order == DerivativeOrder::Second) groups.push_back(make_store_group(d.label, {d.id}, true));
    for (const auto& d : cat)
      if (d.is_composed()) groups.push_back(make_store_group(d.label, {d.id}, true));
    groups.push_back(make_residual_group(plan));
    for (int v = 0; v < 5; ++v) groups.push_back(make_update_group("update:" + conservative_names()[v], {v}));
  } else {
    groups.push_back(make_primitives_fused());
    if (!plan.derivatives_to_store.empty()) {
      std::vector<int> ids(plan.derivatives_to_store.begin(), plan.derivatives_to_store.end());
      groups.push_back(make_store_group("store:velocity-gradients", ids, true));
    }
    groups.push_back(make_residual_group(plan));
    groups.push_back(make_update_group("update", {0, 1, 2, 3, 4}));
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Race-freedom validation

struct RaceViolation {
  int group = 0;
  std::string group_name;
  std::string statement;  // the field whose evaluation reads...
  std::string field;      // ...this field, written in the same loop
};

struct RaceReport {
  std::vector<RaceViolation> violations;
  bool ok() const { return violations.empty(); }

  std::string to_string() const {
    std::ostringstream os;
    for (const auto& v : violations)
      os << "group " << v.group << " (" << v.group_name << "): " << v.statement << " reads " << v.field
         << ", which the same loop writes\n";
    return os.str();
  }
};

/// No field may be written and read in the same loop.
inline RaceReport validate_race_freedom(const KernelPlan& plan) {
  RaceReport report;
  for (std::size_t gi = 0; gi < plan.loop_groups.size(); ++gi) {
    const auto& g = plan.loop_groups[gi];
    std::set<std::string> writes;
    for (const auto& s : g.statements) writes.insert(s.writes);
    for (const auto& s : g.statements) {
      auto check = [&](const std::string& r) {
        if (writes.count(r)) report.violations.push_back({static_cast<int>(gi), g.name, s.writes, r});
      };
      for (const auto& r : s.reads) check(r);
      for (const auto& r : s.neighbor_reads) check(r);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Lowering

enum class Phase { Residual, Update };

struct ScheduleStep {
  enum class Kind { Loop, HaloExchange };

  Kind kind = Kind::Loop;
  Phase phase = Phase::Residual;
  int group = -1;  // index into plan.loop_groups for loops
  GroupKind group_kind = GroupKind::Residual;
  std::string name;
  std::vector<int> derivatives;
  std::vector<int> variables;
  int scratch_slot = -1;                // ProductStage writes, product stores read
  std::vector<int> exchange_derivatives;  // HaloExchange of work arrays
  bool exchange_conservative = false;     // HaloExchange of rho, rhou, rhoE
};

struct Schedule {
  PlanName plan = PlanName::BL;
  std::vector<ScheduleStep> steps;
  std::array<Storage, kNumDerivatives> storage{};
  std::array<bool, kNumDerivatives> stored{};
  int scratch_slots = 0;
  bool grouped_primitives = false;

  int stored_count() const { return static_cast<int>(std::count(stored.begin(), stored.end(), true)); }

  /// Grid-sized arrays needed beyond the state, residual and saved copy.
  int workarray_budget() const { return stored_count() + scratch_slots; }

  Storage gradient_storage() const { return storage[du_id(0, 0)]; }
  Storage other_storage() const { return storage[drho_id(0)]; }
};

/// Orders the plan's loops into an executable schedule: assigns scratch
/// slots, inserts halo exchanges before stencil reads of work arrays and
/// checks every read is produced earlier. Throws ConfigError otherwise.
inline Schedule lower_plan(const KernelPlan& plan, const ResidualSpec& spec = navier_stokes_residual()) {
  if (auto race = validate_race_freedom(plan); !race.ok()) {
    throw ConfigError("plan " + to_string(plan.name) + " has race conditions:\n" + race.to_string());
  }
  Schedule sched;
  sched.plan = plan.name;

  const auto uses = spec.use_counts();
  for (int id = 0; id < kNumDerivatives; ++id) sched.storage[id] = plan.storage(id);

  // The compiled residual kernels take one storage class for the velocity
  // gradients and one for everything else.
  for (int id = 0; id < kNumDerivatives; ++id) {
    const Storage expected = derivative(id).is_velocity_gradient() ? sched.gradient_storage() : sched.other_storage();
    if (sched.storage[id] != expected) {
      throw ConfigError("plan " + to_string(plan.name) + ": " + derivative(id).label + " is " +
                        to_string(sched.storage[id]) + " but its class uses " + to_string(expected));
    }
  }

  // availability: name -> halo current?
  std::map<std::string, bool> available;
  for (const auto& n : conservative_names()) {
    available[n] = true;
    available["saved:" + n] = false;
  }

  // last loop reading each scratch product, for slot release
  std::map<std::string, std::size_t> last_reader;
  for (std::size_t gi = 0; gi < plan.loop_groups.size(); ++gi)
    for (const auto& s : plan.loop_groups[gi].statements)
      for (const auto& r : s.neighbor_reads)
        if (r.rfind("tmp:", 0) == 0) last_reader[r] = gi;

  std::deque<int> free_slots;  // front = freed longest ago
  std::map<std::string, int> slot_of;
  bool seen_residual = false;
  bool seen_primitives = false;

  for (std::size_t gi = 0; gi < plan.loop_groups.size(); ++gi) {
    const auto& g = plan.loop_groups[gi];
    const bool update = g.kind == GroupKind::Update;
    if (update && !seen_residual) {
      throw ConfigError("plan " + to_string(plan.name) + ": update loop '" + g.name + "' precedes the residual");
    }
    if (!update && seen_residual) {
      throw ConfigError("plan " + to_string(plan.name) + ": loop '" + g.name + "' follows the residual");
    }

    std::vector<int> to_exchange;
    for (const auto& s : g.statements) {
      for (const auto& r : s.reads) {
        if (!available.count(r)) {
          throw ConfigError("plan " + to_string(plan.name) + ": loop '" + g.name + "' reads " + r +
                            " before it is produced");
        }
      }
      for (const auto& r : s.neighbor_reads) {
        auto it = available.find(r);
        if (it == available.end()) {
          throw ConfigError("plan " + to_string(plan.name) + ": loop '" + g.name + "' reads " + r +
                            " before it is produced");
        }
        if (!it->second) {
          if (r.rfind("wk:", 0) != 0) {
            throw ConfigError("plan " + to_string(plan.name) + ": loop '" + g.name + "' needs halos of " + r);
          }
          const int id = *find_derivative(r.substr(3));
          if (std::find(to_exchange.begin(), to_exchange.end(), id) == to_exchange.end()) to_exchange.push_back(id);
        }
      }
    }
    if (!to_exchange.empty()) {
      std::sort(to_exchange.begin(), to_exchange.end());
      ScheduleStep h;
      h.kind = ScheduleStep::Kind::HaloExchange;
      h.name = "halo";
      h.exchange_derivatives = to_exchange;
      sched.steps.push_back(h);
      for (int id : to_exchange) available[work_name(id)] = true;
    }

    ScheduleStep step;
    step.kind = ScheduleStep::Kind::Loop;
    step.phase = update ? Phase::Update : Phase::Residual;
    step.group = static_cast<int>(gi);
    step.group_kind = g.kind;
    step.name = g.name;
    step.derivatives = g.derivatives;
    step.variables = g.variables;

    switch (g.kind) {
      case GroupKind::PrimitivesVelocity:
      case GroupKind::PrimitivesPressure:
      case GroupKind::PrimitivesTemperature:
        sched.grouped_primitives = true;
        seen_primitives = true;
        for (const auto& s : g.statements) available[s.writes] = true;
        break;
      case GroupKind::PrimitivesFused:
        seen_primitives = true;
        for (const auto& s : g.statements) available[s.writes] = true;
        break;
      case GroupKind::ProductStage: {
        const int id = g.derivatives.at(0);
        if (!derivative(id).is_product()) {
          throw ConfigError("plan " + to_string(plan.name) + ": '" + g.name + "' is not a product");
        }
        int slot;
        if (!free_slots.empty()) {
          slot = free_slots.front();
          free_slots.pop_front();
        } else {
          slot = sched.scratch_slots++;
        }
        slot_of[scratch_name(id)] = slot;
        step.scratch_slot = slot;
        available[scratch_name(id)] = true;  // evaluated over the padded array
        break;
      }
      case GroupKind::StoreDerivatives:
        for (int id : g.derivatives) {
          if (sched.storage[id] != Storage::Fetch) {
            throw ConfigError("plan " + to_string(plan.name) + ": loop '" + g.name + "' stores " +
                              derivative(id).label + " which the plan marks " + to_string(sched.storage[id]));
          }
          if (sched.stored[id]) {
            throw ConfigError("plan " + to_string(plan.name) + ": " + derivative(id).label + " is stored twice");
          }
          sched.stored[id] = true;
          available[work_name(id)] = false;  // interior only until exchanged
          if (derivative(id).is_product()) step.scratch_slot = slot_of.at(scratch_name(id));
        }
        break;
      case GroupKind::Residual:
        if (!seen_primitives) {
          throw ConfigError("plan " + to_string(plan.name) + ": residual precedes the primitive variables");
        }
        for (int id = 0; id < kNumDerivatives; ++id) {
          if (sched.storage[id] == Storage::Fetch && !sched.stored[id] && uses[static_cast<std::size_t>(id)] > 0) {
            throw ConfigError("plan " + to_string(plan.name) + ": residual fetches " + derivative(id).label +
                              " but no earlier loop stores it");
          }
        }
        for (const auto& s : g.statements) available[s.writes] = false;
        seen_residual = true;
        break;
      case GroupKind::Update:
        break;
    }
    sched.steps.push_back(step);

    // release scratch whose last reader just ran
    for (auto it = slot_of.begin(); it != slot_of.end();) {
      auto lr = last_reader.find(it->first);
      if (lr != last_reader.end() && lr->second == gi) {
        free_slots.push_back(it->second);
        available.erase(it->first);
        it = slot_of.erase(it);
      } else {
        ++it;
      }
    }
  }
  if (!seen_residual) throw ConfigError("plan " + to_string(plan.name) + " has no residual loop");
  if (sched.steps.empty() || sched.steps.back().phase != Phase::Update) {
    throw ConfigError("plan " + to_string(plan.name) + " has no update loop");
  }
  for (int v = 0; v < 5; ++v) {
    bool updated = false;
    for (const auto& g : plan.loop_groups)
      if (g.kind == GroupKind::Update && std::count(g.variables.begin(), g.variables.end(), v)) updated = true;
    if (!updated) throw ConfigError("plan " + to_string(plan.name) + " never updates " + conservative_names()[v]);
  }

  ScheduleStep halo;
  halo.kind = ScheduleStep::Kind::HaloExchange;
  halo.phase = Phase::Update;
  halo.name = "halo";
  halo.exchange_conservative = true;
  sched.steps.push_back(halo);
  return sched;
}

inline int workarray_budget(const KernelPlan& plan) { return lower_plan(plan).workarray_budget(); }

/// Human-readable listing: loop order, then the storage class of each
/// derivative with its use count in the residual.
inline std::string format_schedule(const Schedule& s, const ResidualSpec& spec = navier_stokes_residual()) {
  std::ostringstream os;
  os << "plan " << to_string(s.plan) << "\n";
  os << "work arrays " << s.workarray_budget() << " (stored " << s.stored_count() << ", scratch "
     << s.scratch_slots << ")\n";
  os << "steps\n";
  int n = 0;
  for (const auto& st : s.steps) {
    os << "  " << n++ << " ";
    if (st.kind == ScheduleStep::Kind::HaloExchange) {
      os << "halo";
      if (st.exchange_conservative) os << " rho rhou0 rhou1 rhou2 rhoE";
      for (int id : st.exchange_derivatives) os << " " << work_name(id);
    } else {
      os << (st.phase == Phase::Residual ? "loop " : "update ") << st.name;
      if (st.scratch_slot >= 0) os << " [scratch " << st.scratch_slot << "]";
      if (st.group_kind == GroupKind::StoreDerivatives && st.derivatives.size() > 1) {
        os << " ->";
        for (int id : st.derivatives) os << " " << derivative(id).label;
      }
    }
    os << "\n";
  }
  os << "derivatives\n";
  const auto uses = spec.use_counts();
  for (const auto& d : derivative_catalogue()) {
    os << "  " << d.label << " " << to_string(s.storage[static_cast<std::size_t>(d.id)]) << " uses "
       << uses[static_cast<std::size_t>(d.id)] << "\n";
  }
  return os.str();
}

}  // namespace plancfd
