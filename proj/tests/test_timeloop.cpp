#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include "plancfd/diagnostics.hpp"
#include "plancfd/timeloop.hpp"

using namespace plancfd;

namespace {

/// Linear system with complex lambda; the amplification after one step is the
/// stability polynomial evaluated at z = lambda dt.
struct ComplexLinear {
  std::complex<double> lambda, u{1.0, 0.0}, saved, r;
  void save_state() { saved = u; }
  void evaluate_residual(int) { r = lambda * u; }
  void update(double coeff, int) { u = saved + coeff * r; }
};

ConservativeState run_tgv(const ConservativeState& init, const PhysicalConstants& c, PlanName p, double t_end,
                          int nsteps) {
  RKScheme scheme;
  scheme.dt = t_end / nsteps;
  Solver s(init, c, build_plan(p), scheme);
  for (int n = 0; n < nsteps; ++n) s.step();
  return s.state();
}

double state_error(const ConservativeState& a, const ConservativeState& b) {
  double e = max_abs_difference(a.rho, b.rho);
  for (int i = 0; i < 3; ++i) e = std::max(e, max_abs_difference(a.rhou[i], b.rhou[i]));
  return std::max(e, max_abs_difference(a.rhoE, b.rhoE));
}

bool bitwise_equal(const Field& a, const Field& b) {
  const Grid& g = a.grid();
  for (int i = 0; i < g.npoints[0]; ++i)
    for (int j = 0; j < g.npoints[1]; ++j)
      for (int k = 0; k < g.npoints[2]; ++k)
        if (a(i, j, k) != b(i, j, k)) return false;
  return true;
}

bool bitwise_equal(const ConservativeState& a, const ConservativeState& b) {
  if (!bitwise_equal(a.rho, b.rho) || !bitwise_equal(a.rhoE, b.rhoE)) return false;
  for (int i = 0; i < 3; ++i)
    if (!bitwise_equal(a.rhou[i], b.rhou[i])) return false;
  return true;
}

}  // namespace

TEST(RK, Coefficients) {
  RKScheme s;
  EXPECT_EQ(RKScheme::stages, 3);
  EXPECT_EQ(s.alpha[0], 1.0 / 3.0);
  EXPECT_EQ(s.alpha[1], 0.5);
  EXPECT_EQ(s.alpha[2], 1.0);
}

TEST(RK, DefaultDt) {
  EXPECT_DOUBLE_EQ(default_dt(64), 3.385e-3);
  EXPECT_DOUBLE_EQ(default_dt(128), 1.6925e-3);
  EXPECT_DOUBLE_EQ(default_dt(32), 6.77e-3);
  EXPECT_THROW(default_dt(0), ConfigError);
}

TEST(RK, StabilityPolynomial) {
  const std::complex<double> zs[] = {{-1.0, 0.0}, {0.0, 1.0}, {-0.5, 1.2}, {-2.0, -0.3}, {0.25, 0.0}, {-2.5, 0.0}};
  for (auto z : zs) {
    ComplexLinear sys;
    sys.lambda = z;
    RKScheme scheme;
    scheme.dt = 1.0;
    advance(sys, scheme);
    const auto expected = 1.0 + z + z * z / 2.0 + z * z * z / 6.0;
    EXPECT_LE(std::abs(sys.u - expected), 1e-13) << z;
  }
}

TEST(RK, RealLinearThirdOrder) {
  double prev = 0.0;
  for (int n : {10, 20, 40}) {
    LinearScalarSystem sys;
    RKScheme scheme;
    scheme.dt = 1.0 / n;
    for (int i = 0; i < n; ++i) advance(sys, scheme);
    const double e = std::abs(sys.u - std::exp(-1.0));
    if (prev > 0.0) {
      EXPECT_GT(prev / e, 7.0);
    }
    prev = e;
  }
}

TEST(RK, TemporalOrderOnSolver) {
  // Smooth Taylor-Green flow on 16^3, against a 1600-step reference.
  const Grid g = make_periodic_cube(16, kSolverHalo);
  const auto c = make_constants();
  const auto init = taylor_green_init(g, c);
  const double t_end = 1.0;
  const auto ref = run_tgv(init, c, PlanName::SS, t_end, 1600);
  const double e1 = state_error(run_tgv(init, c, PlanName::SS, t_end, 50), ref);
  const double e2 = state_error(run_tgv(init, c, PlanName::SS, t_end, 100), ref);
  const double e3 = state_error(run_tgv(init, c, PlanName::SS, t_end, 200), ref);
  EXPECT_GE(e1 / e2, 4.0) << e1 << " " << e2;
  EXPECT_GE(e2 / e3, 4.0) << e2 << " " << e3;
}

TEST(Solver, QuiescentStateIsSteady) {
  const Grid g = make_periodic_cube(8, kSolverHalo);
  const auto c = make_constants();
  ConservativeState s(g);
  for (std::size_t n = 0; n < g.padded_size(); ++n) {
    s.rho.data()[n] = 1.3;
    s.rhoE.data()[n] = 2.0;
  }
  for (PlanName p : kAllPlans) {
    Solver solver(s, c, build_plan(p), RKScheme{});
    for (int i = 0; i < 3; ++i) solver.step();
    EXPECT_TRUE(bitwise_equal(solver.state(), s)) << to_string(p);
  }
}

TEST(Solver, SavedStateIsStartOfStep) {
  const Grid g = make_periodic_cube(8, kSolverHalo);
  const auto c = make_constants();
  Solver solver(taylor_green_init(g, c), c, build_plan(PlanName::SS), RKScheme{});
  solver.step();
  const ConservativeState before = solver.state();
  solver.step();
  EXPECT_TRUE(bitwise_equal(solver.saved().rho, before.rho));
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(bitwise_equal(solver.saved().rhou[i], before.rhou[i]));
  EXPECT_TRUE(bitwise_equal(solver.saved().rhoE, before.rhoE));
  EXPECT_FALSE(bitwise_equal(solver.state().rhou[0], before.rhou[0]));
}

TEST(Solver, PlansAgreeAfterOneStep) {
  const Grid g = make_periodic_cube(16, kSolverHalo);
  const auto c = make_constants();
  const auto init = taylor_green_init(g, c);
  const auto bl = run_tgv(init, c, PlanName::BL, default_dt(16), 1);
  for (PlanName p : kAllPlans) EXPECT_LE(state_error(run_tgv(init, c, p, default_dt(16), 1), bl), 1e-14) << to_string(p);
}

TEST(Solver, BitwiseReproducible) {
  const Grid g = make_periodic_cube(12, kSolverHalo);
  const auto c = make_constants();
  const auto init = taylor_green_init(g, c);
  EXPECT_TRUE(bitwise_equal(run_tgv(init, c, PlanName::SN, 0.05, 5), run_tgv(init, c, PlanName::SN, 0.05, 5)));
}

TEST(Solver, ZeroIterationsGiveEmptyReport) {
  const Grid g = make_periodic_cube(6, kSolverHalo);
  const auto c = make_constants();
  const auto init = taylor_green_init(g, c);
  Solver solver(init, c, build_plan(PlanName::SS), RKScheme{});
  const auto report = solver.run(0, 10);
  EXPECT_TRUE(report.ok());
  EXPECT_TRUE(report.records.empty());
  EXPECT_EQ(report.iterations_completed, 0);
  EXPECT_EQ(report.loop_seconds, 0.0);
  EXPECT_TRUE(bitwise_equal(solver.state(), init));
  EXPECT_THROW(solver.run(-1, 1), ConfigError);
  EXPECT_THROW(solver.run(1, 0), ConfigError);
}

TEST(Solver, SamplingCadence) {
  const Grid g = make_periodic_cube(6, kSolverHalo);
  const auto c = make_constants();
  Solver solver(taylor_green_init(g, c), c, build_plan(PlanName::SS), RKScheme{});
  std::ostringstream progress;
  const auto report = solver.run(7, 3, &progress);
  ASSERT_EQ(report.records.size(), 4u);  // 0, 3, 6, 7
  EXPECT_EQ(report.records[0].time, 0.0);
  EXPECT_DOUBLE_EQ(report.records[1].time, 3 * 3.385e-3);
  EXPECT_DOUBLE_EQ(report.records[3].time, 7 * 3.385e-3);
  EXPECT_EQ(report.iterations_completed, 7);
  EXPECT_GT(report.loop_seconds, 0.0);
  EXPECT_NE(progress.str().find("iter 7"), std::string::npos);
}

TEST(Solver, ResetRestoresInitialState) {
  const Grid g = make_periodic_cube(8, kSolverHalo);
  const auto c = make_constants();
  const auto init = taylor_green_init(g, c);
  Solver solver(init, c, build_plan(PlanName::RS), RKScheme{});
  for (int i = 0; i < 2; ++i) solver.step();
  const ConservativeState after_two = solver.state();
  solver.reset(init);
  EXPECT_EQ(solver.iteration(), 0);
  EXPECT_TRUE(bitwise_equal(solver.state(), init));
  for (int i = 0; i < 2; ++i) solver.step();
  EXPECT_TRUE(bitwise_equal(solver.state(), after_two));
  EXPECT_THROW(solver.reset(taylor_green_init(make_periodic_cube(6, kSolverHalo), c)), ConfigError);
}

TEST(Solver, MassDrift) {
  const Grid g = make_periodic_cube(32, kSolverHalo);
  const auto c = make_constants();
  RKScheme scheme;
  scheme.dt = default_dt(32);
  Solver solver(taylor_green_init(g, c), c, build_plan(PlanName::SS), scheme);
  const double m0 = conservation_sums(solver.state()).mass;
  for (int i = 0; i < 100; ++i) solver.step();
  const double m1 = conservation_sums(solver.state()).mass;
  EXPECT_LE(std::abs(m1 - m0) / std::abs(m0), 1e-10);
}

TEST(Solver, DivergenceCarriesLocation) {
  const Grid g = make_periodic_cube(8, kSolverHalo);
  const auto c = make_constants();
  auto init = taylor_green_init(g, c);
  Solver solver(init, c, build_plan(PlanName::SS), RKScheme{});
  solver.step();
  solver.step();
  solver.state().rhoE(3, 3, 3) = std::numeric_limits<double>::quiet_NaN();
  halo_exchange(solver.state().rhoE);
  try {
    solver.step();
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.iteration(), 2);
    EXPECT_EQ(e.substep(), 0);
  }
}

TEST(Solver, RunReportsDivergence) {
  const Grid g = make_periodic_cube(8, kSolverHalo);
  const auto c = make_constants();
  auto init = taylor_green_init(g, c);
  RKScheme scheme;
  scheme.dt = 5.0;  // far beyond the stability limit
  Solver solver(init, c, build_plan(PlanName::SS), scheme);
  const auto report = solver.run(50, 1);
  EXPECT_FALSE(report.ok());
  EXPECT_LT(report.iterations_completed, 50);
  EXPECT_FALSE(report.records.empty());
}

TEST(Solver, RejectsBadDt) {
  const Grid g = make_periodic_cube(6, kSolverHalo);
  const auto c = make_constants();
  RKScheme scheme;
  scheme.dt = 0.0;
  EXPECT_THROW(Solver(taylor_green_init(g, c), c, build_plan(PlanName::SS), scheme), ConfigError);
}
