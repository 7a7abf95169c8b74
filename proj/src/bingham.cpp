#include "orient/bingham.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "orient/errors.hpp"
#include "orient/linalg.hpp"

namespace orient {

namespace detail {
struct BinghamAccess {
  static BinghamDistribution make(const Mat4& m, const ConcentrationDiag& z, const NormConstValue& nc) {
    return BinghamDistribution(m, z, nc);
  }
};
}  // namespace detail

CovarianceMatrix::CovarianceMatrix(const Mat4& s) {
  if (!s.allFinite()) {
    throw InvalidArgument("CovarianceMatrix: non-finite entry");
  }
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InvalidArgument("CovarianceMatrix: not symmetric");
  }
  s_ = symmetrize(s);
  if (std::abs(s_.trace() - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "CovarianceMatrix: trace " << s_.trace() << " differs from 1";
    throw InvalidArgument(msg.str());
  }
  const Vec4 ev = Eigen::SelfAdjointEigenSolver<Mat4>(s_, Eigen::EigenvaluesOnly).eigenvalues();
  if (ev[0] < -1e-12) {
    throw InvalidArgument("CovarianceMatrix: not positive semidefinite");
  }
}

// ---------------------------------------------------------------------------

BinghamDistribution::BinghamDistribution(const Mat4& orientation, const ConcentrationDiag& concentration)
    : BinghamDistribution(orientation, concentration, norm_const_with_grad(concentration)) {}

BinghamDistribution::BinghamDistribution(const Mat4& orientation, const ConcentrationDiag& concentration,
                                         const NormConstValue& nc)
    : m_(orientation), z_(concentration), nc_(nc) {
  if (!m_.allFinite() || (m_.transpose() * m_ - Mat4::Identity()).cwiseAbs().maxCoeff() > 1e-10) {
    throw InvalidArgument("BinghamDistribution: orientation matrix is not orthogonal");
  }
  a_ = symmetrize(m_ * z_.as_vector().asDiagonal() * m_.transpose());
}

BinghamDistribution BinghamDistribution::uniform() { return {Mat4::Identity(), ConcentrationDiag()}; }

BinghamDistribution BinghamDistribution::zero_mean(const ConcentrationDiag& concentration) {
  return {zero_mean_frame(), concentration};
}

Mat4 zero_mean_frame() {
  Mat4 m = Mat4::Zero();
  m(1, 0) = 1.0;
  m(2, 1) = 1.0;
  m(3, 2) = 1.0;
  m(0, 3) = 1.0;
  return m;
}

double log_pdf(const BinghamDistribution& b, const UnitQuaternion& x) {
  return x.vec().dot(b.exponent_matrix() * x.vec()) - std::log(b.normalization());
}

double pdf(const BinghamDistribution& b, const UnitQuaternion& x) {
  return std::exp(x.vec().dot(b.exponent_matrix() * x.vec())) / b.normalization();
}

CovarianceMatrix covariance(const BinghamDistribution& b) {
  const Vec4 omega = b.normalization_grad() / b.normalization();
  const Mat4& m = b.orientation();
  return CovarianceMatrix(symmetrize(m * omega.asDiagonal() * m.transpose()));
}

BinghamDistribution from_exponent_matrix(const Mat4& a, double z_floor) {
  const SymmetricEigen eig = symmetric_eigen(a);
  const double top = eig.values[3];
  std::array<double, 3> z{};
  for (int i = 0; i < 3; ++i) {
    z[i] = std::clamp(eig.values[i] - top, z_floor, 0.0);
  }
  return {eig.vectors, ConcentrationDiag(z[0], z[1], z[2], z_floor)};
}

BinghamDistribution multiply(const BinghamDistribution& b1, const BinghamDistribution& b2) {
  return from_exponent_matrix(b1.exponent_matrix() + b2.exponent_matrix());
}

// ---------------------------------------------------------------------------
// Maximum-likelihood fit

namespace {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

constexpr double kOmegaMin = 1e-8;
constexpr double kOmegaMax = 1.0 - 3e-8;

Vec4 clamp_spectrum(Vec4 omega) {
  for (int pass = 0; pass < 8; ++pass) {
    omega = omega.cwiseMax(kOmegaMin).cwiseMin(kOmegaMax);
    omega /= omega.sum();
    if (omega.minCoeff() >= kOmegaMin * (1.0 - 1e-9) && omega.maxCoeff() <= kOmegaMax + 1e-15) {
      return omega;
    }
  }
  throw DegenerateCovariance("fit_from_covariance: eigenvalues could not be clamped into range");
}

// Moment ratios dF/dz_i / F for i = 1..3 via some normalization source.
template <class Source>
Vec3 moments(const Source& source, const Vec3& z) {
  const NormConstValue v = source(z);
  return v.grad.head<3>() / v.value;
}

struct NewtonResult {
  Vec3 z;
  double residual;
};

template <class Source>
NewtonResult solve_moments(const Source& source, const Vec3& target, Vec3 z, const FitOptions& opt) {
  auto clamp = [&](Vec3 v) { return v.cwiseMax(opt.z_floor).cwiseMin(0.0).eval(); };
  z = clamp(z);
  Vec3 r = moments(source, z) - target;
  double rnorm = r.cwiseAbs().maxCoeff();

  for (int it = 0; it < opt.max_iterations && rnorm > 1e-15; ++it) {
    Mat3 jac;
    for (int j = 0; j < 3; ++j) {
      const double h = 1e-5 * std::max(1.0, std::abs(z[j]));
      Vec3 hi = z;
      Vec3 lo = z;
      hi[j] = std::min(z[j] + h, 0.0);
      lo[j] = z[j] - h;
      jac.col(j) = (moments(source, hi) - moments(source, lo)) / (hi[j] - lo[j]);
    }
    const Vec3 step = -jac.fullPivLu().solve(r);
    if (!step.allFinite()) {
      break;
    }

    bool accepted = false;
    double lambda = 1.0;
    for (int k = 0; k < 40; ++k, lambda *= 0.5) {
      const Vec3 trial = clamp(z + lambda * step);
      const Vec3 rt = moments(source, trial) - target;
      const double tn = rt.cwiseAbs().maxCoeff();
      if (tn < rnorm) {
        const double moved = (trial - z).cwiseAbs().maxCoeff();
        z = trial;
        r = rt;
        rnorm = tn;
        accepted = moved > 1e-14 * std::max(1.0, z.cwiseAbs().maxCoeff());
        break;
      }
    }
    if (!accepted) {
      break;
    }
  }
  return {z, rnorm};
}

}  // namespace

BinghamDistribution fit_from_covariance(const CovarianceMatrix& s, const FitOptions& options) {
  const SymmetricEigen eig = symmetric_eigen(s.matrix());
  const Vec4 omega = clamp_spectrum(eig.values);
  const Vec3 target = omega.head<3>();

  // Concentrated-Gaussian limit: omega_i ~ 1 / (2 (z4 - z_i)).
  Vec3 z0;
  for (int i = 0; i < 3; ++i) {
    z0[i] = 0.5 / omega[3] - 0.5 / omega[i];
  }

  auto quadrature = [](const Vec3& z) { return detail::integrate_norm_const(z[0], z[1], z[2]); };

  if (options.table != nullptr) {
    // Interpolated values are only trusted for the starting point.
    auto interpolated = [&](const Vec3& z) {
      Vec3 sorted = z;
      std::array<int, 3> perm = {0, 1, 2};
      std::sort(perm.begin(), perm.end(), [&](int a, int b) { return z[a] < z[b]; });
      for (int i = 0; i < 3; ++i) {
        sorted[i] = z[perm[i]];
      }
      const ConcentrationDiag zd(sorted[0], sorted[1], sorted[2], options.z_floor);
      const NormConstValue v = options.table->lookup(zd).value;
      NormConstValue out;
      out.value = v.value;
      for (int i = 0; i < 3; ++i) {
        out.grad[perm[i]] = v.grad[i];
      }
      out.grad[3] = v.grad[3];
      return out;
    };
    const NewtonResult warm = solve_moments(interpolated, target, z0, options);
    if (warm.z.allFinite() && warm.residual < 1e-2) {
      z0 = warm.z;
    }
  }

  const NewtonResult res = solve_moments(quadrature, target, z0, options);
  if (!(res.residual < options.tolerance)) {
    std::ostringstream msg;
    msg.precision(6);
    msg << "fit_from_covariance: residual " << res.residual << " after Newton iterations (omega = "
        << omega.transpose() << ")";
    throw FitNotConverged(msg.str());
  }

  // Newton keeps z in index order up to ties; sort to restore the invariant.
  std::array<double, 3> z = {res.z[0], res.z[1], res.z[2]};
  std::sort(z.begin(), z.end());
  const ConcentrationDiag zd(z[0], z[1], z[2], options.z_floor);
  return detail::BinghamAccess::make(eig.vectors, zd, norm_const_with_grad(zd));
}

// ---------------------------------------------------------------------------

Mode mode(const BinghamDistribution& b) {
  return {UnitQuaternion(canonical_sign(b.orientation().col(3))), b.concentration()[2] < 0.0};
}

namespace {

// Basis matrices L(e_i): L(a) = sum_i a_i L(e_i), so the composed second
// moment is sum_ij Sa_ij L(e_i) Sb L(e_j)'.
const std::array<Mat4, 4>& left_basis() {
  static const std::array<Mat4, 4> basis = [] {
    std::array<Mat4, 4> out;
    for (int i = 0; i < 4; ++i) {
      out[i] = left_matrix(Vec4(Vec4::Unit(i)));
    }
    return out;
  }();
  return basis;
}

}  // namespace

CovarianceMatrix compose_covariances(const CovarianceMatrix& sa, const CovarianceMatrix& sb) {
  const auto& basis = left_basis();
  std::array<Mat4, 4> left;
  for (int i = 0; i < 4; ++i) {
    left[i] = basis[i] * sb.matrix();
  }
  Mat4 out = Mat4::Zero();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double w = sa(i, j);
      if (w != 0.0) {
        out.noalias() += w * left[i] * basis[j].transpose();
      }
    }
  }
  out = symmetrize(out);
  out /= out.trace();
  return CovarianceMatrix(out);
}

BinghamDistribution compose(const BinghamDistribution& b1, const BinghamDistribution& b2,
                            const FitOptions& options) {
  return fit_from_covariance(compose_covariances(covariance(b1), covariance(b2)), options);
}

// ---------------------------------------------------------------------------
// Sampling

BinghamSampler::BinghamSampler(const BinghamDistribution& b) : m_(b.orientation()) {
  for (int i = 0; i < 4; ++i) {
    lambda_[i] = -b.concentration()[i];
  }
  // Envelope parameter: sum_i 1 / (b + 2 lambda_i) = 1 on (0, 4].
  double lo = 0.0;
  double hi = 4.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) {
      sum += 1.0 / (mid + 2.0 * lambda_[i]);
    }
    (sum > 1.0 ? lo : hi) = mid;
  }
  b_ = hi;
  for (int i = 0; i < 4; ++i) {
    sigma_[i] = 1.0 / std::sqrt(1.0 + 2.0 * lambda_[i] / b_);
  }
  log_envelope_ = -0.5 * (4.0 - b_) + 2.0 * std::log(4.0 / b_);
}

UnitQuaternion BinghamSampler::operator()(Rng& rng, int max_attempts) const {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Vec4 y;
    for (int i = 0; i < 4; ++i) {
      y[i] = sigma_[i] * normal(rng);
    }
    const double n = y.norm();
    if (n == 0.0) {
      continue;
    }
    const Vec4 x = y / n;
    const Vec4 x2 = x.cwiseProduct(x);
    const double quad = lambda_.dot(x2);
    const double omega_form = x2.sum() + 2.0 / b_ * quad;
    const double log_accept = -quad + 2.0 * std::log(omega_form) - log_envelope_;
    if (std::log(unit(rng)) < log_accept) {
      return UnitQuaternion(Vec4(m_ * x));
    }
  }
  throw RejectionBudgetExceeded("Bingham rejection sampler exceeded its attempt budget");
}

std::vector<UnitQuaternion> random_sample(const BinghamDistribution& b, Rng& rng, std::size_t n) {
  if (n == 0) {
    throw InvalidArgument("random_sample: n must be >= 1");
  }
  const BinghamSampler sampler(b);
  std::vector<UnitQuaternion> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(sampler(rng));
  }
  return out;
}

}  // namespace orient
