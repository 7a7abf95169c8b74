#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "orient/errors.hpp"
#include "orient/harness.hpp"

namespace orient {
namespace {

namespace fs = std::filesystem;

ScenarioConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

ScenarioConfig tiny_config() {
  ScenarioConfig cfg;
  cfg.system = {SystemKind::kNonlinearTwist, Eigen::Vector3d::UnitZ(), 0.0, 1.0};
  cfg.process_noise_z = {-20.0, -20.0, -20.0};
  cfg.measurement_noise_z = {-30.0, -30.0, -30.0};
  cfg.steps = 5;
  cfg.runs = 4;
  cfg.seed = 3;
  cfg.particles = 500;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("orient_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(Config, ParsesAllKeys) {
  const ScenarioConfig cfg = parse(
      "# comment\n"
      "system = fixed-rotation(0, 0, 2, 0.25)  # trailing comment\n"
      "process_noise_z = -30, -20, -10\n"
      "process_noise_m = zero-mean\n"
      "measurement_noise_z = -5,-5,-5\n"
      "steps = 12\n"
      "runs = 3\n"
      "seed = 99\n"
      "particles = 250\n"
      "table_path = t.csv\n"
      "output = results\n"
      "record_timing = true\n");
  EXPECT_EQ(cfg.system.kind, SystemKind::kFixedRotation);
  EXPECT_DOUBLE_EQ(cfg.system.angle, 0.25);
  EXPECT_EQ(cfg.system.axis, Eigen::Vector3d(0, 0, 2));
  EXPECT_EQ(cfg.process_noise_z, (std::array<double, 3>{-30, -20, -10}));
  EXPECT_EQ(cfg.measurement_noise_z, (std::array<double, 3>{-5, -5, -5}));
  EXPECT_EQ(cfg.steps, 12);
  EXPECT_EQ(cfg.runs, 3);
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_EQ(cfg.particles, 250u);
  EXPECT_EQ(cfg.table_path, "t.csv");
  EXPECT_EQ(cfg.output, "results");
  EXPECT_TRUE(cfg.record_timing);
}

TEST(Config, Defaults) {
  const ScenarioConfig cfg = parse("");
  EXPECT_EQ(cfg.system.kind, SystemKind::kIdentity);
  EXPECT_EQ(cfg.steps, 50);
  EXPECT_EQ(cfg.runs, 100);
  EXPECT_EQ(cfg.particles, 10000u);
  EXPECT_EQ(cfg.process_noise_m, zero_mean_frame());
  EXPECT_FALSE(cfg.record_timing);
}

TEST(Config, ExplicitFrame) {
  const ScenarioConfig cfg = parse("process_noise_m = 0,1,0,0, 1,0,0,0, 0,0,1,0, 0,0,0,1\n");
  EXPECT_EQ(cfg.process_noise_m(0, 1), 1.0);
  EXPECT_THROW(parse("process_noise_m = 1,1,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1\n"), ConfigError);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse("bogus = 1\n"), ConfigError);
  EXPECT_THROW(parse("steps = 0\n"), ConfigError);
  EXPECT_THROW(parse("runs = -2\n"), ConfigError);
  EXPECT_THROW(parse("steps = 1.5\n"), ConfigError);
  EXPECT_THROW(parse("process_noise_z = -1, -2, -3\n"), ConfigError);
  EXPECT_THROW(parse("measurement_noise_z = -1, -2, 1\n"), ConfigError);
  EXPECT_THROW(parse("system = warp(3)\n"), ConfigError);
  EXPECT_THROW(parse("system = fixed-rotation(0,0,0,1)\n"), ConfigError);
  EXPECT_THROW(parse("steps 10\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/orient.cfg"), ConfigError);
}

TEST(Systems, AreAntipodallySymmetric) {
  Rng rng(1);
  const SystemSpec specs[] = {{},
                              {SystemKind::kFixedRotation, Eigen::Vector3d(1, 0, 1), 0.4, 0.0},
                              {SystemKind::kNonlinearTwist, Eigen::Vector3d::UnitZ(), 0.0, 2.0}};
  for (const auto& spec : specs) {
    const SystemFunction g = make_system(spec);
    for (int i = 0; i < 1000; ++i) {
      const UnitQuaternion x(oracle::random_unit(rng));
      ASSERT_TRUE(same_rotation(g(-x), -g(x), 1e-12));
    }
  }
}

TEST(Systems, TwistIsNonlinear) {
  const SystemFunction g = make_system({SystemKind::kNonlinearTwist, {}, 0.0, 1.0});
  const UnitQuaternion x = UnitQuaternion::from_axis_angle({1, 0, 0}, 1.0);
  EXPECT_GT(angular_distance(g(x), x), 0.1);
  EXPECT_TRUE(same_rotation(g(UnitQuaternion()), UnitQuaternion()));
}

TEST(Seeds, DistinctAndStable) {
  EXPECT_EQ(derive_seed(1, 0), derive_seed(1, 0));
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
}

TEST(Simulate, ZeroNoiseIdentityIsConstant) {
  // Each step rotates by about 2 sqrt(3 / (-2 z)): ~0.08 rad at z = -900,
  // accumulating as a random walk. Check that scale, and constancy at the
  // concentration floor.
  ScenarioConfig cfg;
  cfg.process_noise_z = {-900.0, -900.0, -900.0};
  cfg.steps = 200;
  Rng rng(2);
  const Trajectory t = simulate_trajectory(cfg, rng);
  double mean_step = 0.0;
  for (int k = 1; k < cfg.steps; ++k) {
    mean_step += angular_distance(t.truth[k - 1], t.truth[k]) / (cfg.steps - 1);
  }
  EXPECT_NEAR(mean_step, 0.075, 0.01);

  cfg.process_noise_z = {kDefaultZFloor, kDefaultZFloor, kDefaultZFloor};
  cfg.steps = 50;
  const Trajectory u = simulate_trajectory(cfg, rng);
  for (const auto& x : u.truth) {
    EXPECT_LT(angular_distance(x, u.truth[0]), 0.01);
  }
}

TEST(Simulate, NearDeterministicMeasurements) {
  ScenarioConfig cfg = tiny_config();
  cfg.measurement_noise_z = {-1e6, -1e6, -1e6};
  Rng rng(3);
  const Trajectory t = simulate_trajectory(cfg, rng);
  for (std::size_t k = 0; k < t.truth.size(); ++k) {
    EXPECT_LT(angular_distance(t.truth[k], t.measurements[k]), 0.01);
  }
}

TEST(Simulate, ReproducibleForSeed) {
  const ScenarioConfig cfg = tiny_config();
  Rng a(5);
  Rng b(5);
  const Trajectory ta = simulate_trajectory(cfg, a);
  const Trajectory tb = simulate_trajectory(cfg, b);
  for (std::size_t k = 0; k < ta.truth.size(); ++k) {
    EXPECT_EQ(ta.truth[k].vec(), tb.truth[k].vec());
    EXPECT_EQ(ta.measurements[k].vec(), tb.measurements[k].vec());
  }
}

TEST(Metric, AntipodallyInvariant) {
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    const UnitQuaternion e(oracle::random_unit(rng));
    const UnitQuaternion t(oracle::random_unit(rng));
    const double d = angular_distance(e, t);
    EXPECT_EQ(d, angular_distance(-e, t));
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, M_PI);
  }
}

TEST(Experiment, StrongMeasurementSingleStep) {
  ScenarioConfig cfg = tiny_config();
  cfg.steps = 1;
  cfg.runs = 1;
  cfg.measurement_noise_z = {-2e4, -2e4, -2e4};
  cfg.particles = 1000000;
  const RunResult r = run_single(cfg, 0);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_TRUE(r.failures.empty());
  for (const auto& row : r.rows) {
    EXPECT_LT(row.angular_error, 0.05) << kFilterNames[row.filter];
  }
}

TEST(Experiment, RunPrefixIsStable) {
  ScenarioConfig cfg = tiny_config();
  cfg.runs = 2;
  const ExperimentResult small = run_experiment(cfg);
  cfg.runs = 4;
  const ExperimentResult big = run_experiment(cfg);
  for (int r = 0; r < 2; ++r) {
    ASSERT_EQ(small.runs[r].rows.size(), big.runs[r].rows.size());
    for (std::size_t k = 0; k < small.runs[r].rows.size(); ++k) {
      EXPECT_EQ(small.runs[r].rows[k].angular_error, big.runs[r].rows[k].angular_error);
    }
  }
}

TEST(Experiment, SummaryStatistics) {
  std::vector<RunResult> runs(1);
  for (int k = 0; k < 10; ++k) {
    runs[0].rows.push_back({0, k, 0, 0.1 * (k + 1), 2.0});
  }
  const auto s = summarize(runs);
  EXPECT_NEAR(s[0].mean_err, 0.55, 1e-15);
  EXPECT_NEAR(s[0].median_err, 0.55, 1e-15);
  EXPECT_NEAR(s[0].p90_err, 0.9, 1e-15);
  EXPECT_NEAR(s[0].mean_ms, 2.0, 1e-15);
}

TEST(Experiment, WritesCsvFiles) {
  const fs::path dir = scratch("csv");
  const ScenarioConfig cfg = tiny_config();
  const ExperimentResult result = run_experiment(cfg);
  write_results(result, dir);
  const std::string metrics = slurp(dir / "metrics.csv");
  EXPECT_EQ(metrics.rfind("run,step,filter,angular_error_rad,ms_per_step\n", 0), 0u);
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 1 + cfg.runs * cfg.steps * 3);
  const std::string summary = slurp(dir / "summary.csv");
  EXPECT_EQ(summary.rfind("filter,mean_err,median_err,p90_err,mean_ms\nbingham,", 0), 0u);
  EXPECT_TRUE(fs::exists(dir / "failures.csv"));
  EXPECT_TRUE(fs::exists(dir / "trajectory.csv"));
  for (const auto& run : result.runs) {
    for (const auto& row : run.rows) {
      EXPECT_GE(row.angular_error, 0.0);
      EXPECT_LE(row.angular_error, M_PI);
    }
  }
}

TEST(Experiment, UnwritableOutputIsIoError) {
  const fs::path dir = scratch("blocked");
  std::ofstream(dir / "file") << "x";
  EXPECT_THROW(write_results(ExperimentResult{}, dir / "file" / "sub"), IoError);
}

TEST(PrepareTable, BuildsThenLoads) {
  const fs::path dir = scratch("table");
  ScenarioConfig cfg;
  EXPECT_FALSE(prepare_table(cfg).has_value());
  cfg.table_path = (dir / "t.csv").string();
  const auto built = prepare_table(cfg);
  ASSERT_TRUE(built.has_value());
  const auto loaded = prepare_table(cfg);
  ASSERT_TRUE(loaded.has_value());
  EXPECT_EQ(built->nodes().size(), loaded->nodes().size());
}

// ---------------------------------------------------------------------------
// CLI

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ORIENT_BENCH_EXE) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  std::ofstream(dir / "good.cfg") << "system = nonlinear-twist(1.0)\nsteps = 3\nruns = 2\nparticles = 200\n";
  std::ofstream(dir / "bad.cfg") << "steps = 3\nspeed = 4\n";
  std::ofstream(dir / "blocker") << "x";

  EXPECT_EQ(run_cli("run --config " + (dir / "good.cfg").string() + " --out " + (dir / "out").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "summary.csv"));
  EXPECT_EQ(run_cli("run --config " + (dir / "bad.cfg").string() + " --out " + (dir / "out2").string()), 2);
  EXPECT_EQ(run_cli("run --config " + (dir / "missing.cfg").string()), 2);
  EXPECT_EQ(run_cli("run --config " + (dir / "good.cfg").string() + " --out " + (dir / "blocker" / "x").string()),
            1);
  EXPECT_EQ(run_cli("table --out " + (dir / "t.csv").string() + " --axis-min -10 --axis-points 3"), 0);
  EXPECT_NE(slurp(dir / "t.csv").find("# bingham-normconst v1"), std::string::npos);
}

TEST(Cli, OverridesApply) {
  const fs::path dir = scratch("cli_override");
  std::ofstream(dir / "c.cfg") << "steps = 3\nruns = 2\nparticles = 100\n";
  EXPECT_EQ(run_cli("run --config " + (dir / "c.cfg").string() + " --out " + (dir / "o").string() +
                    " --runs 1 --steps 2 --seed 5"),
            0);
  const std::string metrics = slurp(dir / "o" / "metrics.csv");
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 1 + 1 * 2 * 3);
}

}  // namespace
}  // namespace orient
