#pragma once

#include <array>

#include "orient/bingham.hpp"

namespace orient {

/// Seven weighted unit quaternions whose weighted scatter sum_j w_j s_j s_j'
/// equals the covariance of the distribution they were drawn from.
struct WeightedSampleSet {
  std::array<UnitQuaternion, 7> samples;
  std::array<double, 7> weights{};
  /// Spread angles alpha_1..3 in the principal frame.
  std::array<double, 3> angles{};

  Mat4 scatter() const;
};

/// Weights for covariance eigenvalues omega (ascending, unit sum):
/// w_i = max(1/7, omega_i / 2) for the three minor axes, and the mode weight
/// w_0 = 1 - 2 (w_1 + w_2 + w_3). Returned as {w_0, w_1, w_2, w_3}.
///
/// When that rule would make w_0 negative (omega_3 close to omega_4), the
/// 1/7 floor is lowered to the largest common value c with
/// sum_i max(c, omega_i / 2) = 1/2, which gives w_0 = 0.
std::array<double, 4> sample_weights(const Vec4& omega);

/// Deterministic samples of `b` (mode plus +-alpha_i about each minor axis),
/// rotated into the frame M. Throws InfeasibleSpread if an angle has no
/// real solution, which the weight rule rules out.
WeightedSampleSet deterministic_samples(const BinghamDistribution& b);

/// Same construction from an explicit frame and eigenvalue vector.
WeightedSampleSet deterministic_samples(const Mat4& frame, const Vec4& omega);

}  // namespace orient
