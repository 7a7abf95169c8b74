#pragma once

#include <functional>

#include "orient/bingham.hpp"
#include "orient/detsample.hpp"

namespace orient {

/// Posterior of the Bingham filter after `time` steps.
struct FilterState {
  BinghamDistribution estimate;
  long time = 0;
};

/// g: S^3 -> S^3 with g(-x) = -g(x). Outputs are renormalized.
using SystemFunction = std::function<UnitQuaternion(const UnitQuaternion&)>;
/// g(x, w) for general models x_{t+1} = g(x_t, w_t).
using JointSystemFunction = std::function<UnitQuaternion(const UnitQuaternion&, const UnitQuaternion&)>;

/// Throws AntipodalViolation unless g(-s) and -g(s) are the same rotation
/// (same_rotation, 1e-9) for every sample in `samples`.
void check_antipodal(const SystemFunction& g, const WeightedSampleSet& samples);

/// Prediction for x_{t+1} = g(x_t) ⊕ w_t, w_t ~ noise: deterministic
/// samples of the estimate go through g, their weighted scatter is composed
/// with the noise covariance, and the result is moment-matched.
FilterState predict(const FilterState& state, const SystemFunction& g, const BinghamDistribution& noise,
                    const FitOptions& fit = {});

/// Prediction for x_{t+1} = g(x_t, w_t): the 7 x 7 weighted pairs of state
/// and noise samples are propagated jointly and their scatter is fitted.
FilterState predict_joint(const FilterState& state, const JointSystemFunction& g,
                          const BinghamDistribution& noise, const FitOptions& fit = {});

/// Orientation matrix of the likelihood x -> f_v(x^-1 ⊕ z): column k is
/// z ⊕ conj(m_k) for the noise frame columns m_k.
Mat4 measurement_frame(const Mat4& noise_orientation, const UnitQuaternion& z);

/// Exact Bayesian update for z = x ⊕ v, v ~ noise.
FilterState update(const FilterState& state, const UnitQuaternion& z, const BinghamDistribution& noise);

}  // namespace orient
