#include "orient/baselines.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "orient/errors.hpp"
#include "orient/linalg.hpp"

namespace orient {

namespace {

struct SigmaPoints {
  std::array<Vec4, 9> points;
  std::array<double, 9> weights{};
};

SigmaPoints sigma_points(const Vec4& mean, const Mat4& cov, double kappa) {
  constexpr double n = 4.0;
  const Eigen::LLT<Mat4> llt((n + kappa) * cov);
  if (llt.info() != Eigen::Success) {
    throw CholeskyFailure("UKF covariance is not positive definite");
  }
  const Mat4 root = llt.matrixL();
  SigmaPoints sp;
  sp.points[0] = mean;
  sp.weights[0] = kappa / (n + kappa);
  for (int i = 0; i < 4; ++i) {
    sp.points[1 + i] = mean + root.col(i);
    sp.points[5 + i] = mean - root.col(i);
    sp.weights[1 + i] = sp.weights[5 + i] = 0.5 / (n + kappa);
  }
  return sp;
}

Vec4 normalized(const Vec4& v) { return UnitQuaternion(v).vec(); }

}  // namespace

UkfState ukf_predict(const UkfState& state, const SystemFunction& g, const Mat4& process_cov, double kappa) {
  const SigmaPoints sp = sigma_points(state.mean, state.covariance, kappa);
  std::array<Vec4, 9> y;
  Vec4 mean = Vec4::Zero();
  for (int i = 0; i < 9; ++i) {
    y[i] = g(UnitQuaternion(sp.points[i])).vec();
    mean += sp.weights[i] * y[i];
  }
  Mat4 cov = Mat4::Zero();
  for (int i = 0; i < 9; ++i) {
    const Vec4 d = y[i] - mean;
    cov.noalias() += sp.weights[i] * d * d.transpose();
  }
  UkfState out;
  out.mean = normalized(mean);
  const Mat4 l = left_matrix(out.mean);
  out.covariance = symmetrize(cov + l * process_cov * l.transpose());
  return out;
}

UkfState ukf_update(const UkfState& state, const UnitQuaternion& z, const Mat4& meas_cov, double kappa) {
  const SigmaPoints sp = sigma_points(state.mean, state.covariance, kappa);
  // h(x) = x, so the measurement sigma points equal the state sigma points.
  Vec4 z_pred = Vec4::Zero();
  for (int i = 0; i < 9; ++i) {
    z_pred += sp.weights[i] * sp.points[i];
  }
  Mat4 s = Mat4::Zero();
  Mat4 cross = Mat4::Zero();
  for (int i = 0; i < 9; ++i) {
    const Vec4 dz = sp.points[i] - z_pred;
    const Vec4 dx = sp.points[i] - state.mean;
    s.noalias() += sp.weights[i] * dz * dz.transpose();
    cross.noalias() += sp.weights[i] * dx * dz.transpose();
  }
  const Mat4 l = left_matrix(state.mean);
  s = symmetrize(s + l * meas_cov * l.transpose());
  const Eigen::LLT<Mat4> llt(s);
  if (llt.info() != Eigen::Success) {
    throw CholeskyFailure("UKF innovation covariance is not positive definite");
  }
  const Mat4 gain = llt.solve(cross.transpose()).transpose();

  UkfState out;
  out.mean = normalized(state.mean + gain * (z.vec() - z_pred));
  out.covariance = symmetrize(state.covariance - gain * s * gain.transpose());
  return out;
}

UkfState ukf_step(const UkfState& state, const SystemFunction& g, const Mat4& process_cov,
                  const UnitQuaternion& z, const Mat4& meas_cov, double kappa) {
  return ukf_update(ukf_predict(state, g, process_cov, kappa), z, meas_cov, kappa);
}

Mat4 tangent_noise_covariance(const BinghamDistribution& noise) {
  const Vec4 m = mode(noise).q.vec();
  const Mat4 proj = Mat4::Identity() - m * m.transpose();
  return symmetrize(proj * covariance(noise).matrix() * proj + 1e-9 * m * m.transpose());
}

// ---------------------------------------------------------------------------

double ParticleSet::effective_sample_size() const {
  double s = 0.0;
  for (double w : weights) {
    s += w * w;
  }
  return s > 0.0 ? 1.0 / s : 0.0;
}

Mat4 ParticleSet::scatter() const {
  Mat4 s = Mat4::Zero();
  for (std::size_t j = 0; j < particles.size(); ++j) {
    s.noalias() += weights[j] * particles[j].vec() * particles[j].vec().transpose();
  }
  return symmetrize(s);
}

UnitQuaternion ParticleSet::estimate() const {
  return UnitQuaternion(Vec4(symmetric_eigen(scatter()).vectors.col(3)));
}

ParticleSet make_particles(const BinghamDistribution& prior, Rng& rng, std::size_t n) {
  ParticleSet ps;
  ps.particles = random_sample(prior, rng, n);
  ps.weights.assign(n, 1.0 / static_cast<double>(n));
  return ps;
}

ParticleSet pf_predict(const ParticleSet& ps, const SystemFunction& g, const BinghamDistribution& process_noise,
                       Rng& rng) {
  const BinghamSampler sampler(process_noise);
  ParticleSet out;
  out.weights = ps.weights;
  out.particles.reserve(ps.size());
  for (const auto& p : ps.particles) {
    out.particles.push_back(compose(g(p), sampler(rng)));
  }
  return out;
}

namespace {

void systematic_resample(ParticleSet& ps, Rng& rng) {
  const std::size_t n = ps.size();
  std::uniform_real_distribution<double> unit(0.0, 1.0 / static_cast<double>(n));
  const double start = unit(rng);
  std::vector<UnitQuaternion> chosen;
  chosen.reserve(n);
  double cumulative = ps.weights[0];
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double target = start + static_cast<double>(i) / static_cast<double>(n);
    while (target > cumulative && j + 1 < n) {
      cumulative += ps.weights[++j];
    }
    chosen.push_back(ps.particles[j]);
  }
  ps.particles = std::move(chosen);
  ps.weights.assign(n, 1.0 / static_cast<double>(n));
}

}  // namespace

ParticleSet pf_update(const ParticleSet& ps, const UnitQuaternion& z, const BinghamDistribution& meas_noise,
                      Rng& rng) {
  const std::size_t n = ps.size();
  const Mat4& a = meas_noise.exponent_matrix();
  std::vector<double> logw(n);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    const Vec4 v = compose(conjugate(ps.particles[j]), z).vec();
    logw[j] = std::log(ps.weights[j]) + v.dot(a * v);
    top = std::max(top, logw[j]);
  }

  ParticleSet out;
  out.particles = ps.particles;
  out.weights.resize(n);
  double total = 0.0;
  if (std::isfinite(top)) {
    for (std::size_t j = 0; j < n; ++j) {
      out.weights[j] = std::exp(logw[j] - top);
      total += out.weights[j];
    }
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    ParticleSet fresh = make_particles(BinghamDistribution::uniform(), rng, n);
    fresh.reinitialized = true;
    return fresh;
  }
  for (double& w : out.weights) {
    w /= total;
  }
  if (out.effective_sample_size() < 0.5 * static_cast<double>(n)) {
    systematic_resample(out, rng);
  }
  return out;
}

ParticleSet pf_step(const ParticleSet& ps, const SystemFunction& g, const BinghamDistribution& process_noise,
                    const UnitQuaternion& z, const BinghamDistribution& meas_noise, Rng& rng) {
  return pf_update(pf_predict(ps, g, process_noise, rng), z, meas_noise, rng);
}

}  // namespace orient
