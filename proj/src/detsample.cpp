#include "orient/detsample.hpp"

#include <algorithm>
#include <cmath>

#include "orient/errors.hpp"

namespace orient {

Mat4 WeightedSampleSet::scatter() const {
  Mat4 s = Mat4::Zero();
  for (int j = 0; j < 7; ++j) {
    s.noalias() += weights[j] * samples[j].vec() * samples[j].vec().transpose();
  }
  return s;
}

std::array<double, 4> sample_weights(const Vec4& omega) {
  std::array<double, 3> half{};
  for (int i = 0; i < 3; ++i) {
    half[i] = 0.5 * std::max(omega[i], 0.0);
  }
  auto total = [&](double floor) {
    double s = 0.0;
    for (double h : half) {
      s += std::max(floor, h);
    }
    return s;
  };

  double floor = 1.0 / 7.0;
  if (total(floor) > 0.5) {
    // Largest floor keeping the minor weights within 1/2 (total() is
    // nondecreasing and total(0) <= 1/2 because omega_4 >= 0).
    double lo = 0.0;
    double hi = floor;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (total(mid) > 0.5 ? hi : lo) = mid;
    }
    floor = lo;
  }

  std::array<double, 4> w{};
  for (int i = 0; i < 3; ++i) {
    w[i + 1] = std::max(floor, half[i]);
  }
  w[0] = std::max(0.0, 1.0 - 2.0 * (w[1] + w[2] + w[3]));
  return w;
}

WeightedSampleSet deterministic_samples(const Mat4& frame, const Vec4& omega) {
  const std::array<double, 4> w = sample_weights(omega);

  WeightedSampleSet out;
  out.samples[0] = UnitQuaternion(Vec4(frame.col(3)));
  out.weights[0] = w[0];
  for (int i = 0; i < 3; ++i) {
    const double ratio = std::max(omega[i], 0.0) / (2.0 * w[i + 1]);
    if (ratio > 1.0 + 1e-12) {
      throw InfeasibleSpread("deterministic_samples: omega_i / (2 w_i) exceeds 1");
    }
    const double alpha = std::asin(std::sqrt(std::min(ratio, 1.0)));
    out.angles[i] = alpha;
    const Vec4 base = std::cos(alpha) * frame.col(3);
    const Vec4 offset = std::sin(alpha) * frame.col(i);
    out.samples[1 + 2 * i] = UnitQuaternion(Vec4(base + offset));
    out.samples[2 + 2 * i] = UnitQuaternion(Vec4(base - offset));
    out.weights[1 + 2 * i] = w[i + 1];
    out.weights[2 + 2 * i] = w[i + 1];
  }
  return out;
}

WeightedSampleSet deterministic_samples(const BinghamDistribution& b) {
  const Vec4 omega = b.normalization_grad() / b.normalization();
  return deterministic_samples(b.orientation(), omega);
}

}  // namespace orient
