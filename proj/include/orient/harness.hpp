#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "orient/baselines.hpp"
#include "orient/bingham.hpp"
#include "orient/filter.hpp"

namespace orient {

enum class SystemKind { kIdentity, kFixedRotation, kNonlinearTwist };

struct SystemSpec {
  SystemKind kind = SystemKind::kIdentity;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  double angle = 0.0;
  double gain = 0.0;
};

/// identity: g(x) = x. fixed-rotation: g(x) = q ⊕ x for the configured
/// axis/angle. nonlinear-twist: x is rotated further about its own axis by
/// gain * x1 * |vector part|, which keeps g(-x) = -g(x).
SystemFunction make_system(const SystemSpec& spec);

struct ScenarioConfig {
  SystemSpec system;
  std::array<double, 3> process_noise_z = {-50.0, -50.0, -50.0};
  Mat4 process_noise_m = zero_mean_frame();
  std::array<double, 3> measurement_noise_z = {-50.0, -50.0, -50.0};
  int steps = 50;
  int runs = 100;
  std::uint64_t seed = 1;
  std::size_t particles = 10000;
  /// Empty: no table. Otherwise loaded, or built and written if missing.
  std::string table_path;
  std::string output = "out";
  /// Off by default so repeated runs give byte-identical CSVs.
  bool record_timing = false;

  BinghamDistribution process_noise() const;
  /// Orientation is always the zero-mean frame.
  BinghamDistribution measurement_noise() const;
};

/// Parses `key = value` lines; `#` starts a comment. Throws ConfigError on
/// unknown keys, malformed values, or violated invariants.
ScenarioConfig parse_config(std::istream& in);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Seed of run `run` derived from the master seed (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t run);

struct Trajectory {
  std::vector<UnitQuaternion> truth;
  std::vector<UnitQuaternion> measurements;
};

/// x_0 uniform; x_{t+1} = g(x_t) ⊕ w_t; z_t = x_t ⊕ v_t.
Trajectory simulate_trajectory(const ScenarioConfig& cfg, Rng& rng);

inline constexpr std::array<const char*, 3> kFilterNames = {"bingham", "ukf", "pf"};

struct MetricRow {
  int run = 0;
  int step = 0;
  int filter = 0;  // index into kFilterNames
  double angular_error = 0.0;
  double ms_per_step = 0.0;
};

struct FailureRecord {
  int run = 0;
  int step = 0;
  int filter = 0;
  std::string message;
};

struct FilterSummary {
  double mean_err = 0.0;
  double median_err = 0.0;
  double p90_err = 0.0;
  double mean_ms = 0.0;
};

struct RunResult {
  Trajectory trajectory;
  std::vector<MetricRow> rows;
  std::vector<FailureRecord> failures;
};

struct ExperimentResult {
  std::vector<RunResult> runs;
  std::array<FilterSummary, 3> summary;
  std::size_t failure_count() const;
};

/// One Monte Carlo run of all three filters on a shared measurement sequence.
RunResult run_single(const ScenarioConfig& cfg, int run, const FitOptions& fit = {});

/// All runs (in parallel) plus the per-filter summary. Writes nothing.
ExperimentResult run_experiment(const ScenarioConfig& cfg, const FitOptions& fit = {});

/// Writes metrics.csv, summary.csv, failures.csv and trajectory.csv into `dir`.
void write_results(const ExperimentResult& result, const std::filesystem::path& dir);

std::array<FilterSummary, 3> summarize(const std::vector<RunResult>& runs);

}  // namespace orient

namespace orient {

/// Loads cfg.table_path, or builds it on the default grid and writes it when
/// the file does not exist yet. Empty when no table is configured.
std::optional<NormConstTable> prepare_table(const ScenarioConfig& cfg);

}  // namespace orient
