#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "orient/normconst.hpp"
#include "orient/quaternion.hpp"

namespace orient {

using Rng = std::mt19937_64;

/// Second moment E[x x'] of an antipodally symmetric variable on S^3.
/// Symmetric, positive semidefinite, unit trace.
class CovarianceMatrix {
 public:
  /// Throws InvalidArgument if `s` is not symmetric (1e-12 relative), has
  /// trace off 1 by more than 1e-9, or a negative eigenvalue below -1e-12.
  explicit CovarianceMatrix(const Mat4& s);

  const Mat4& matrix() const { return s_; }
  double operator()(int r, int c) const { return s_(r, c); }

 private:
  Mat4 s_;
};

namespace detail {
struct BinghamAccess;
}

/// Bingham distribution on S^3 with density exp(x' M Z M' x) / F.
///
/// Columns of M are the principal axes; the last column (z4 = 0) is the
/// mode. F and its gradient are evaluated once at construction.
class BinghamDistribution {
 public:
  /// Throws InvalidArgument if M is not orthogonal within 1e-10.
  BinghamDistribution(const Mat4& orientation, const ConcentrationDiag& concentration);

  static BinghamDistribution uniform();
  /// Noise centred on the identity rotation: the orientation is the zero-mean
  /// frame, whose last column is (1, 0, 0, 0).
  static BinghamDistribution zero_mean(const ConcentrationDiag& concentration);

  const Mat4& orientation() const { return m_; }
  const ConcentrationDiag& concentration() const { return z_; }
  double normalization() const { return nc_.value; }
  const Vec4& normalization_grad() const { return nc_.grad; }
  /// M Z M'.
  const Mat4& exponent_matrix() const { return a_; }

 private:
  friend struct detail::BinghamAccess;
  BinghamDistribution(const Mat4& orientation, const ConcentrationDiag& concentration,
                      const NormConstValue& nc);

  Mat4 m_;
  ConcentrationDiag z_;
  NormConstValue nc_;
  Mat4 a_;
};

/// Orthogonal frame [e2 e3 e4 e1]: a Bingham with this orientation has its
/// mode at the identity quaternion.
Mat4 zero_mean_frame();

double pdf(const BinghamDistribution& b, const UnitQuaternion& x);
double log_pdf(const BinghamDistribution& b, const UnitQuaternion& x);

/// M diag(dF/dz_i / F) M'.
CovarianceMatrix covariance(const BinghamDistribution& b);

/// Bingham whose density is proportional to exp(x' A x), for symmetric A.
/// Concentrations below `z_floor` are clamped to it.
BinghamDistribution from_exponent_matrix(const Mat4& a, double z_floor = kDefaultZFloor);

/// Renormalized pointwise product of two densities (exact).
BinghamDistribution multiply(const BinghamDistribution& b1, const BinghamDistribution& b2);

struct FitOptions {
  /// Optional table used to warm-start the root finder; the final solve
  /// always runs on direct quadrature.
  const NormConstTable* table = nullptr;
  double z_floor = kDefaultZFloor;
  int max_iterations = 200;
  /// Required max-norm residual of the moment equations.
  double tolerance = 1e-9;
};

/// Maximum-likelihood Bingham for a given second moment.
///
/// Eigenvalues are clamped to [1e-8, 1 - 3e-8] and renormalized before the
/// moment equations dF/dz_i / F = omega_i are solved by damped Newton.
/// Throws FitNotConverged or DegenerateCovariance.
BinghamDistribution fit_from_covariance(const CovarianceMatrix& s, const FitOptions& options = {});

struct Mode {
  UnitQuaternion q;
  /// False when z3 == 0, i.e. the maximizing axis is not unique.
  bool unique = true;
};

/// Last column of M, sign-normalized so its largest-magnitude entry is positive.
Mode mode(const BinghamDistribution& b);

/// E[(a ⊕ b)(a ⊕ b)'] for independent a, b with the given second moments.
CovarianceMatrix compose_covariances(const CovarianceMatrix& sa, const CovarianceMatrix& sb);

/// Moment-matched Bingham approximation of a ⊕ b, a ~ b1, b ~ b2.
BinghamDistribution compose(const BinghamDistribution& b1, const BinghamDistribution& b2,
                            const FitOptions& options = {});

/// Rejection sampler with an angular central Gaussian envelope.
class BinghamSampler {
 public:
  explicit BinghamSampler(const BinghamDistribution& b);

  /// Throws RejectionBudgetExceeded after `max_attempts` rejected proposals.
  UnitQuaternion operator()(Rng& rng, int max_attempts = 100000) const;

  double envelope_b() const { return b_; }

 private:
  Mat4 m_;
  Vec4 lambda_;  // -z
  Vec4 sigma_;   // proposal std devs in the M frame
  double b_;
  double log_envelope_;
};

/// n independent draws; deterministic given the rng state.
std::vector<UnitQuaternion> random_sample(const BinghamDistribution& b, Rng& rng, std::size_t n);

}  // namespace orient
