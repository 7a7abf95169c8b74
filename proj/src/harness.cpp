#include "orient/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include "orient/errors.hpp"

namespace orient {

// ---------------------------------------------------------------------------
// System functions

SystemFunction make_system(const SystemSpec& spec) {
  switch (spec.kind) {
    case SystemKind::kIdentity:
      return [](const UnitQuaternion& x) { return x; };
    case SystemKind::kFixedRotation: {
      const UnitQuaternion q = UnitQuaternion::from_axis_angle(spec.axis, spec.angle);
      return [q](const UnitQuaternion& x) { return compose(q, x); };
    }
    case SystemKind::kNonlinearTwist: {
      const double gain = spec.gain;
      return [gain](const UnitQuaternion& x) {
        const Eigen::Vector3d v = x.vector_part();
        const double n = v.norm();
        if (n == 0.0) {
          return x;
        }
        // x1 flips sign with x, so the twist is the same rotation for x and -x.
        return compose(x, UnitQuaternion::from_axis_angle(v / n, gain * x.scalar() * n));
      };
    }
  }
  throw InvalidArgument("unknown system kind");
}

BinghamDistribution ScenarioConfig::process_noise() const {
  const auto& z = process_noise_z;
  return {process_noise_m, ConcentrationDiag(z[0], z[1], z[2])};
}

BinghamDistribution ScenarioConfig::measurement_noise() const {
  const auto& z = measurement_noise_z;
  return BinghamDistribution::zero_mean(ConcentrationDiag(z[0], z[1], z[2]));
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(trim(text), &used);
    if (used != trim(text).size() || !std::isfinite(v)) {
      throw std::invalid_argument(text);
    }
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  }
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    out.push_back(parse_double(key, cell));
  }
  return out;
}

long long parse_integer(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) {
      throw std::invalid_argument(text);
    }
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
  }
}

std::array<double, 3> parse_z(const std::string& key, const std::string& text) {
  const std::vector<double> v = parse_list(key, text);
  if (v.size() != 3) {
    throw ConfigError(key + ": expected three comma-separated values z1, z2, z3");
  }
  try {
    ConcentrationDiag(v[0], v[1], v[2]);
  } catch (const InvalidArgument& e) {
    throw ConfigError(key + ": " + e.what());
  }
  return {v[0], v[1], v[2]};
}

// "name" or "name(a, b, ...)".
std::pair<std::string, std::vector<double>> parse_call(const std::string& key, const std::string& text) {
  const auto open = text.find('(');
  if (open == std::string::npos) {
    return {trim(text), {}};
  }
  if (text.back() != ')') {
    throw ConfigError(key + ": missing ')' in '" + text + "'");
  }
  return {trim(text.substr(0, open)), parse_list(key, text.substr(open + 1, text.size() - open - 2))};
}

SystemSpec parse_system(const std::string& text) {
  const auto [name, args] = parse_call("system", text);
  SystemSpec spec;
  if (name == "identity" && args.empty()) {
    spec.kind = SystemKind::kIdentity;
  } else if (name == "fixed-rotation" && args.size() == 4) {
    spec.kind = SystemKind::kFixedRotation;
    spec.axis = Eigen::Vector3d(args[0], args[1], args[2]);
    spec.angle = args[3];
    if (spec.axis.norm() == 0.0) {
      throw ConfigError("system: fixed-rotation axis must be nonzero");
    }
  } else if (name == "nonlinear-twist" && args.size() == 1) {
    spec.kind = SystemKind::kNonlinearTwist;
    spec.gain = args[0];
  } else {
    throw ConfigError("system: expected identity, fixed-rotation(ax, ay, az, angle) or nonlinear-twist(gain), got '" +
                      text + "'");
  }
  return spec;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "on") {
    return true;
  }
  if (text == "false" || text == "0" || text == "off") {
    return false;
  }
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

}  // namespace

ScenarioConfig parse_config(std::istream& in) {
  ScenarioConfig cfg;
  using Setter = std::function<void(const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"system", [&](const std::string& v) { cfg.system = parse_system(v); }},
      {"process_noise_z", [&](const std::string& v) { cfg.process_noise_z = parse_z("process_noise_z", v); }},
      {"process_noise_m",
       [&](const std::string& v) {
         if (v == "zero-mean") {
           cfg.process_noise_m = zero_mean_frame();
           return;
         }
         const std::vector<double> m = parse_list("process_noise_m", v);
         if (m.size() != 16) {
           throw ConfigError("process_noise_m: expected 'zero-mean' or 16 row-major values");
         }
         for (int r = 0; r < 4; ++r) {
           for (int c = 0; c < 4; ++c) {
             cfg.process_noise_m(r, c) = m[4 * r + c];
           }
         }
       }},
      {"measurement_noise_z",
       [&](const std::string& v) { cfg.measurement_noise_z = parse_z("measurement_noise_z", v); }},
      {"steps", [&](const std::string& v) { cfg.steps = static_cast<int>(parse_integer("steps", v)); }},
      {"runs", [&](const std::string& v) { cfg.runs = static_cast<int>(parse_integer("runs", v)); }},
      {"seed", [&](const std::string& v) { cfg.seed = static_cast<std::uint64_t>(parse_integer("seed", v)); }},
      {"particles",
       [&](const std::string& v) {
         const long long n = parse_integer("particles", v);
         if (n < 1) {
           throw ConfigError("particles must be >= 1");
         }
         cfg.particles = static_cast<std::size_t>(n);
       }},
      {"table_path", [&](const std::string& v) { cfg.table_path = v; }},
      {"output", [&](const std::string& v) { cfg.output = v; }},
      {"record_timing", [&](const std::string& v) { cfg.record_timing = parse_bool("record_timing", v); }},
  };

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    it->second(value);
  }

  if (cfg.steps < 1 || cfg.runs < 1) {
    throw ConfigError("steps and runs must be >= 1");
  }
  try {
    cfg.process_noise();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("process noise: ") + e.what());
  }
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file " + path.string());
  }
  return parse_config(in);
}

std::optional<NormConstTable> prepare_table(const ScenarioConfig& cfg) {
  if (cfg.table_path.empty()) {
    return std::nullopt;
  }
  if (std::filesystem::exists(cfg.table_path)) {
    return NormConstTable::load(cfg.table_path);
  }
  return build_table(default_table_axis(), cfg.table_path);
}

// ---------------------------------------------------------------------------
// Simulation

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t run) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(master) ^ run);
}

Trajectory simulate_trajectory(const ScenarioConfig& cfg, Rng& rng) {
  const SystemFunction g = make_system(cfg.system);
  const BinghamSampler process(cfg.process_noise());
  const BinghamSampler measurement(cfg.measurement_noise());
  const BinghamSampler initial(BinghamDistribution::uniform());

  Trajectory traj;
  traj.truth.reserve(static_cast<std::size_t>(cfg.steps));
  traj.measurements.reserve(static_cast<std::size_t>(cfg.steps));
  UnitQuaternion x = initial(rng);
  for (int t = 0; t < cfg.steps; ++t) {
    if (t > 0) {
      x = compose(g(x), process(rng));
    }
    traj.truth.push_back(x);
    traj.measurements.push_back(compose(x, measurement(rng)));
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Experiment

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

}  // namespace

RunResult run_single(const ScenarioConfig& cfg, int run, const FitOptions& fit) {
  const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(run));
  Rng sim_rng(derive_seed(seed, 0));
  Rng pf_rng(derive_seed(seed, 1));

  RunResult result;
  result.trajectory = simulate_trajectory(cfg, sim_rng);

  const SystemFunction g = make_system(cfg.system);
  const BinghamDistribution process = cfg.process_noise();
  const BinghamDistribution measurement = cfg.measurement_noise();
  const Mat4 process_cov = tangent_noise_covariance(process);
  const Mat4 meas_cov = tangent_noise_covariance(measurement);

  const FilterState bingham_prior{BinghamDistribution::uniform(), 0};
  const UkfState ukf_prior{};
  FilterState bingham = bingham_prior;
  UkfState ukf = ukf_prior;
  ParticleSet pf = make_particles(BinghamDistribution::uniform(), pf_rng, cfg.particles);

  for (int t = 0; t < cfg.steps; ++t) {
    const UnitQuaternion& z = result.trajectory.measurements[static_cast<std::size_t>(t)];
    const UnitQuaternion& truth = result.trajectory.truth[static_cast<std::size_t>(t)];
    std::array<UnitQuaternion, 3> estimate;
    std::array<double, 3> ms{};

    auto guarded = [&](int filter, const std::function<void()>& step, const std::function<void()>& reset) {
      const auto start = Clock::now();
      try {
        step();
      } catch (const Error& e) {
        result.failures.push_back({run, t, filter, e.what()});
        reset();
      }
      ms[filter] = elapsed_ms(start);
    };

    guarded(
        0,
        [&] {
          FilterState prior = t > 0 ? predict(bingham, g, process, fit) : bingham;
          bingham = update(prior, z, measurement);
        },
        [&] { bingham = update(bingham_prior, z, measurement); });
    estimate[0] = mode(bingham.estimate).q;

    guarded(
        1,
        [&] {
          UkfState prior = t > 0 ? ukf_predict(ukf, g, process_cov) : ukf;
          // Vector-space update: bring z into the hemisphere of the prior mean.
          const UnitQuaternion zz = prior.mean.dot(z.vec()) < 0.0 ? -z : z;
          ukf = ukf_update(prior, zz, meas_cov);
        },
        [&] { ukf = ukf_prior; });
    estimate[1] = UnitQuaternion(ukf.mean);

    guarded(
        2,
        [&] {
          ParticleSet prior = t > 0 ? pf_predict(pf, g, process, pf_rng) : pf;
          pf = pf_update(prior, z, measurement, pf_rng);
          if (pf.reinitialized) {
            result.failures.push_back({run, t, 2, "all particle weights vanished; reinitialized"});
            pf.reinitialized = false;
          }
        },
        [&] { pf = make_particles(BinghamDistribution::uniform(), pf_rng, cfg.particles); });
    estimate[2] = pf.estimate();

    for (int f = 0; f < 3; ++f) {
      result.rows.push_back({run, t, f, angular_distance(estimate[f], truth), cfg.record_timing ? ms[f] : 0.0});
    }
  }
  return result;
}

std::size_t ExperimentResult::failure_count() const {
  std::size_t n = 0;
  for (const auto& r : runs) {
    n += r.failures.size();
  }
  return n;
}

std::array<FilterSummary, 3> summarize(const std::vector<RunResult>& runs) {
  std::array<std::vector<double>, 3> errors;
  std::array<double, 3> ms_total{};
  for (const auto& run : runs) {
    for (const auto& row : run.rows) {
      errors[row.filter].push_back(row.angular_error);
      ms_total[row.filter] += row.ms_per_step;
    }
  }
  std::array<FilterSummary, 3> out;
  for (int f = 0; f < 3; ++f) {
    auto& e = errors[f];
    if (e.empty()) {
      continue;
    }
    double sum = 0.0;
    for (double v : e) {
      sum += v;
    }
    std::sort(e.begin(), e.end());
    const std::size_t n = e.size();
    out[f].mean_err = sum / static_cast<double>(n);
    out[f].median_err = n % 2 == 1 ? e[n / 2] : 0.5 * (e[n / 2 - 1] + e[n / 2]);
    // Nearest-rank percentile.
    const auto rank = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(n)));
    out[f].p90_err = e[std::max<std::size_t>(rank, 1) - 1];
    out[f].mean_ms = ms_total[f] / static_cast<double>(n);
  }
  return out;
}

ExperimentResult run_experiment(const ScenarioConfig& cfg, const FitOptions& fit) {
  ExperimentResult result;
  result.runs.resize(static_cast<std::size_t>(cfg.runs));

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(cfg.runs));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int r = next++; r < cfg.runs; r = next++) {
      result.runs[static_cast<std::size_t>(r)] = run_single(cfg, r, fit);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < workers; ++i) {
      pool.emplace_back(work);
    }
  }
  result.summary = summarize(result.runs);
  return result;
}

// ---------------------------------------------------------------------------
// Output

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  return out;
}

std::string csv_escape(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    out += c == '"' ? std::string("\"\"") : std::string(1, c);
  }
  return out + "\"";
}

}  // namespace

void write_results(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  }

  auto metrics = open_csv(dir / "metrics.csv");
  metrics << "run,step,filter,angular_error_rad,ms_per_step\n";
  for (const auto& run : result.runs) {
    for (const auto& row : run.rows) {
      metrics << row.run << ',' << row.step << ',' << kFilterNames[row.filter] << ',' << fmt(row.angular_error)
              << ',' << fmt(row.ms_per_step) << '\n';
    }
  }

  auto summary = open_csv(dir / "summary.csv");
  summary << "filter,mean_err,median_err,p90_err,mean_ms\n";
  for (int f = 0; f < 3; ++f) {
    const auto& s = result.summary[f];
    summary << kFilterNames[f] << ',' << fmt(s.mean_err) << ',' << fmt(s.median_err) << ',' << fmt(s.p90_err)
            << ',' << fmt(s.mean_ms) << '\n';
  }

  auto failures = open_csv(dir / "failures.csv");
  failures << "run,step,filter,error\n";
  for (const auto& run : result.runs) {
    for (const auto& f : run.failures) {
      failures << f.run << ',' << f.step << ',' << kFilterNames[f.filter] << ',' << csv_escape(f.message) << '\n';
    }
  }

  auto traj = open_csv(dir / "trajectory.csv");
  traj << "run,step,x1,x2,x3,x4,z1,z2,z3,z4\n";
  for (std::size_t r = 0; r < result.runs.size(); ++r) {
    const auto& t = result.runs[r].trajectory;
    for (std::size_t k = 0; k < t.truth.size(); ++k) {
      traj << r << ',' << k;
      for (int i = 0; i < 4; ++i) {
        traj << ',' << fmt(t.truth[k][i]);
      }
      for (int i = 0; i < 4; ++i) {
        traj << ',' << fmt(t.measurements[k][i]);
      }
      traj << '\n';
    }
  }

  for (auto* s : {&metrics, &summary, &failures, &traj}) {
    s->flush();
    if (!*s) {
      throw IoError("failed writing results to " + dir.string());
    }
  }
}

}  // namespace orient
