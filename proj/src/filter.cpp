#include "orient/filter.hpp"

#include "orient/errors.hpp"
#include "orient/linalg.hpp"

namespace orient {

void check_antipodal(const SystemFunction& g, const WeightedSampleSet& samples) {
  for (const auto& s : samples.samples) {
    const UnitQuaternion pos = g(s);
    const UnitQuaternion neg = g(-s);
    if (!same_rotation(neg, -pos, 1e-9)) {
      throw AntipodalViolation("system function does not satisfy g(-x) = -g(x)");
    }
  }
}

FilterState predict(const FilterState& state, const SystemFunction& g, const BinghamDistribution& noise,
                    const FitOptions& fit) {
  const WeightedSampleSet samples = deterministic_samples(state.estimate);
  check_antipodal(g, samples);

  Mat4 scatter = Mat4::Zero();
  for (int j = 0; j < 7; ++j) {
    const Vec4 y = g(samples.samples[j]).vec();
    scatter.noalias() += samples.weights[j] * y * y.transpose();
  }
  const CovarianceMatrix propagated(symmetrize(scatter) / scatter.trace());
  const CovarianceMatrix predicted = compose_covariances(propagated, covariance(noise));
  return {fit_from_covariance(predicted, fit), state.time + 1};
}

FilterState predict_joint(const FilterState& state, const JointSystemFunction& g,
                          const BinghamDistribution& noise, const FitOptions& fit) {
  const WeightedSampleSet xs = deterministic_samples(state.estimate);
  const WeightedSampleSet ws = deterministic_samples(noise);

  Mat4 scatter = Mat4::Zero();
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 7; ++j) {
      const double w = xs.weights[i] * ws.weights[j];
      if (w == 0.0) {
        continue;
      }
      const Vec4 y = g(xs.samples[i], ws.samples[j]).vec();
      scatter.noalias() += w * y * y.transpose();
    }
  }
  const CovarianceMatrix propagated(symmetrize(scatter) / scatter.trace());
  return {fit_from_covariance(propagated, fit), state.time + 1};
}

Mat4 measurement_frame(const Mat4& noise_orientation, const UnitQuaternion& z) {
  // <m, conj(x) ⊕ z> = <z ⊕ conj(m), x>, so each noise axis m maps to z ⊕ conj(m).
  Mat4 out;
  for (int k = 0; k < 4; ++k) {
    const Vec4& m = noise_orientation.col(k);
    out.col(k) = left_matrix(z) * Vec4(m[0], -m[1], -m[2], -m[3]);
  }
  return out;
}

FilterState update(const FilterState& state, const UnitQuaternion& z, const BinghamDistribution& noise) {
  const Mat4 frame = measurement_frame(noise.orientation(), z);
  const Mat4 likelihood = frame * noise.concentration().as_vector().asDiagonal() * frame.transpose();
  return {from_exponent_matrix(state.estimate.exponent_matrix() + likelihood), state.time};
}

}  // namespace orient
