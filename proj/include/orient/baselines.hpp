#pragma once

#include <cstddef>
#include <vector>

#include "orient/bingham.hpp"
#include "orient/filter.hpp"

namespace orient {

// ---------------------------------------------------------------------------
// Quaternion UKF: unscented transform in R^4 with renormalization.

struct UkfState {
  Vec4 mean = Vec4::UnitX();
  Mat4 covariance = Mat4::Identity() / 4.0;
};

/// kappa = 3 - n would be -1 for n = 4; 0.5 keeps the central weight positive.
inline constexpr double kUkfKappa = 0.5;

/// Noise covariances are given in the frame of the identity rotation and
/// rotated to the current mean: Q_global = L(mean) Q L(mean)'.
UkfState ukf_predict(const UkfState& state, const SystemFunction& g, const Mat4& process_cov,
                     double kappa = kUkfKappa);
/// Measurement z = x ⊕ v with h(x) = x.
UkfState ukf_update(const UkfState& state, const UnitQuaternion& z, const Mat4& meas_cov,
                    double kappa = kUkfKappa);
/// Predict then update. Throws CholeskyFailure when a covariance loses
/// positive definiteness.
UkfState ukf_step(const UkfState& state, const SystemFunction& g, const Mat4& process_cov,
                  const UnitQuaternion& z, const Mat4& meas_cov, double kappa = kUkfKappa);

/// R^4 covariance of a Bingham noise term about its mode: the covariance
/// with the mode direction projected out, plus a 1e-9 floor along the mode.
Mat4 tangent_noise_covariance(const BinghamDistribution& noise);

// ---------------------------------------------------------------------------
// Bootstrap particle filter on S^3.

struct ParticleSet {
  std::vector<UnitQuaternion> particles;
  std::vector<double> weights;
  /// Set when every weight vanished and the set was redrawn uniformly.
  bool reinitialized = false;

  std::size_t size() const { return particles.size(); }
  double effective_sample_size() const;
  /// Weighted scatter sum_j w_j p_j p_j'.
  Mat4 scatter() const;
  /// Principal eigenvector of the weighted scatter.
  UnitQuaternion estimate() const;
};

/// n equally weighted draws from `prior`.
ParticleSet make_particles(const BinghamDistribution& prior, Rng& rng, std::size_t n);

/// p <- g(p) ⊕ w with w drawn from `process_noise`.
ParticleSet pf_predict(const ParticleSet& ps, const SystemFunction& g, const BinghamDistribution& process_noise,
                       Rng& rng);
/// Reweights by f_v(p^-1 ⊕ z) and resamples systematically when ESS < n / 2.
ParticleSet pf_update(const ParticleSet& ps, const UnitQuaternion& z, const BinghamDistribution& meas_noise,
                      Rng& rng);
ParticleSet pf_step(const ParticleSet& ps, const SystemFunction& g, const BinghamDistribution& process_noise,
                    const UnitQuaternion& z, const BinghamDistribution& meas_noise, Rng& rng);

}  // namespace orient
