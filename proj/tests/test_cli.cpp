#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "plancfd/app.hpp"

using namespace plancfd;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("plancfd_cli_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "plancfd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_app(static_cast<int>(argv.size()), argv.data(), out, err);
  set_workers(1);
  return {code, out.str(), err.str()};
}

RunConfig parse(std::vector<std::string> args) {
  args.insert(args.begin(), "plancfd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const auto p = parse_config(static_cast<int>(argv.size()), argv.data(), out, err);
  EXPECT_FALSE(p.exit_now) << err.str();
  return p.config;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, Defaults) {
  const RunConfig c = parse({});
  EXPECT_EQ(c.mode, Mode::Run);
  EXPECT_EQ(c.npoints, (std::array<int, 3>{64, 64, 64}));
  EXPECT_EQ(c.plan, PlanName::SS);
  EXPECT_DOUBLE_EQ(c.dt, 3.385e-3);
  EXPECT_EQ(c.reynolds, 1600.0);
  EXPECT_EQ(c.mach, 0.1);
  EXPECT_EQ(c.prandtl, 0.71);
  EXPECT_EQ(c.gamma, 1.4);
  EXPECT_EQ(c.workers, 1);
  EXPECT_NEAR(c.lengths[1], 2 * 3.14159265358979323846, 1e-15);
}

TEST(Config, AutoDt) {
  EXPECT_DOUBLE_EQ(parse({"--grid", "128", "--auto-dt"}).dt, 1.6925e-3);
  EXPECT_DOUBLE_EQ(parse({"--grid", "32"}).dt, 6.77e-3);
  EXPECT_DOUBLE_EQ(parse({"--grid", "32", "--dt", "0.001"}).dt, 0.001);
  EXPECT_THROW(parse({"--grid", "32", "--auto-dt", "--dt", "0.001"}), ConfigError);
}

TEST(Config, GridForms) {
  EXPECT_EQ(parse({"--grid", "16x24x32"}).npoints, (std::array<int, 3>{16, 24, 32}));
  EXPECT_THROW(parse({"--grid", "4"}), ConfigError);
  EXPECT_THROW(parse({"--grid", "16x16"}), ConfigError);
}

TEST(Config, UnknownPlanIsUsageError) {
  const auto r = run({"--plan", "XX", "--out", temp_dir("badplan").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("plan"), std::string::npos);
  EXPECT_NE(r.err.find("bl, ra, rs, sn, ss"), std::string::npos) << r.err;
}

TEST(Config, MalformedNumbersNameTheKey) {
  for (const auto& [flag, key] : std::vector<std::pair<std::string, std::string>>{
           {"--re", "re"}, {"--dt", "dt"}, {"--iterations", "iterations"}, {"--mach", "mach"}}) {
    try {
      parse({flag, "abc"});
      FAIL() << flag;
    } catch (const ConfigError& e) {
      EXPECT_EQ(std::string(e.what()).rfind(key + ":", 0), 0u) << e.what();
    }
  }
  const auto r = run({"--re", "1e"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("re:"), std::string::npos);
}

TEST(Config, UnknownFlagIsUsageError) { EXPECT_EQ(run({"--bogus", "1"}).code, kExitUsage); }

TEST(Config, FlagsOverrideFile) {
  const auto dir = temp_dir("layer");
  const auto file = dir / "run.cfg";
  std::ofstream(file) << "# comment\nplan = rs\ngrid = 32\nre = 800  # trailing\niterations=7\n";
  const RunConfig c = parse({"--config", file.string(), "--plan", "sn"});
  EXPECT_EQ(c.plan, PlanName::SN);
  EXPECT_EQ(c.npoints[0], 32);
  EXPECT_EQ(c.reynolds, 800.0);
  EXPECT_EQ(c.iterations, 7);

  std::ofstream(file) << "colour = blue\n";
  try {
    parse({"--config", file.string()});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("colour"), std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST(Config, ResolvedRoundTrip) {
  const auto dir = temp_dir("resolved");
  RunConfig c = parse({"--grid", "12x16x20", "--plan", "ra", "--dt", "0.0012345678901234567", "--re", "1234.5",
                       "--bench-grids", "8,10x12x14", "--bench-plans", "bl,ss", "--scaling-workers", "1,3",
                       "--out", dir.string()});
  const auto file = dir / "copy.cfg";
  std::ofstream(file) << format_config(c);
  const RunConfig back = resolve(read_config_file(file.string()));
  EXPECT_EQ(back, c);
  EXPECT_EQ(back.dt, c.dt);
  EXPECT_EQ(format_config(back), format_config(c));
  std::filesystem::remove_all(dir);
}

TEST(Cli, ValidateModePasses) {
  const auto dir = temp_dir("validate");
  const auto r = run({"--mode", "validate", "--grid", "12", "--iterations", "2", "--out", dir.string()});
  EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "config.resolved"));
  const RunConfig back = resolve(read_config_file((dir / "config.resolved").string()));
  EXPECT_EQ(back.mode, Mode::Validate);
  EXPECT_EQ(back.npoints[2], 12);
  std::filesystem::remove_all(dir);
}

TEST(Cli, RunModeWritesTimeseries) {
  const auto dir = temp_dir("run");
  const auto r = run({"--grid", "10", "--iterations", "4", "--cadence", "2", "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto recs = read_timeseries((dir / "timeseries.csv").string());
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].time, 0.0);
  EXPECT_NEAR(recs[0].kinetic_energy, 0.125, 5e-3);
  std::filesystem::remove_all(dir);
}

TEST(Cli, RunIsDeterministic) {
  const auto a = temp_dir("det_a");
  const auto b = temp_dir("det_b");
  ASSERT_EQ(run({"--grid", "10", "--iterations", "3", "--plan", "bl", "--out", a.string()}).code, kExitOk);
  ASSERT_EQ(run({"--grid", "10", "--iterations", "3", "--plan", "bl", "--out", b.string()}).code, kExitOk);
  EXPECT_EQ(slurp(a / "timeseries.csv"), slurp(b / "timeseries.csv"));
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST(Cli, DivergenceExitCode) {
  const auto dir = temp_dir("diverge");
  const auto r = run({"--grid", "8", "--iterations", "40", "--dt", "5", "--out", dir.string()});
  EXPECT_EQ(r.code, kExitDivergence) << r.out;
  EXPECT_NE(r.err.find("iteration"), std::string::npos) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "timeseries.csv"));
  std::filesystem::remove_all(dir);
}

TEST(Cli, UnwritableOutputIsIoError) {
  EXPECT_EQ(run({"--grid", "8", "--iterations", "1", "--out", "/proc/plancfd-cannot-write"}).code, kExitIo);
}

TEST(Cli, BenchModeWritesCsvs) {
  const auto dir = temp_dir("bench");
  const auto r = run({"--mode", "bench", "--bench-grids", "8", "--bench-plans", "bl,sn,ss", "--bench-iterations",
                      "1", "--warmup", "0", "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* f : {"bench.csv", "table.csv", "speedup.csv"}) EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  EXPECT_NE(slurp(dir / "speedup.csv").find("8,8,8,1.000000,"), std::string::npos);
  EXPECT_NE(r.out.find("2.05"), std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST(Cli, ScalingModeWritesCsvs) {
  const auto dir = temp_dir("scaling");
  const auto r = run({"--mode", "scaling", "--scaling-grid", "8", "--weak-per-worker", "6", "--scaling-workers", "1,2",
                      "--scaling-iterations", "1", "--warmup", "0", "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(slurp(dir / "scaling.csv").rfind("workers,runtime,normalized,ideal\n1,", 0), 0u);
  EXPECT_TRUE(std::filesystem::exists(dir / "weak_scaling.csv"));
  std::filesystem::remove_all(dir);
}

TEST(Binary, ExitCodes) {
  const auto dir = temp_dir("binary");
  const std::string exe = PLANCFD_CLI;
  const std::string quiet = " > /dev/null 2>&1";
  EXPECT_EQ(shell(exe + " --help" + quiet), 0);
  EXPECT_EQ(shell(exe + " --plan XX --out " + dir.string() + quiet), 2);
  EXPECT_EQ(shell(exe + " --mode validate --grid 8 --iterations 1 --out " + dir.string() + quiet), 0);
  EXPECT_EQ(shell(exe + " --grid 8 --iterations 1 --print-schedule --out " + dir.string() + " > " +
                  (dir / "stdout.txt").string() + " 2>&1"),
            0);
  EXPECT_NE(slurp(dir / "stdout.txt").find("plan SS"), std::string::npos);
  std::filesystem::remove_all(dir);
}
