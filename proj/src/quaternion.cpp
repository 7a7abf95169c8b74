#include "orient/quaternion.hpp"

#include <algorithm>
#include <cmath>

#include "orient/errors.hpp"

namespace orient {

UnitQuaternion::UnitQuaternion() : v_(1.0, 0.0, 0.0, 0.0) {}

UnitQuaternion::UnitQuaternion(const Vec4& v) {
  const double n = v.norm();
  if (!std::isfinite(n) || n < 1e-300) {
    throw InvalidArgument("UnitQuaternion: cannot normalize a zero or non-finite vector");
  }
  v_ = v / n;
}

UnitQuaternion::UnitQuaternion(double x1, double x2, double x3, double x4)
    : UnitQuaternion(Vec4(x1, x2, x3, x4)) {}

UnitQuaternion UnitQuaternion::from_axis_angle(const Eigen::Vector3d& axis, double angle) {
  const double n = axis.norm();
  if (n < 1e-300) {
    return UnitQuaternion();
  }
  const Eigen::Vector3d u = axis / n * std::sin(0.5 * angle);
  return UnitQuaternion(std::cos(0.5 * angle), u.x(), u.y(), u.z());
}

UnitQuaternion UnitQuaternion::operator-() const {
  // Exact negation; renormalizing could move the result by an ulp.
  UnitQuaternion out;
  out.v_ = -v_;
  return out;
}

Mat4 left_matrix(const Vec4& q) {
  Mat4 m;
  // clang-format off
  m << q[0], -q[1], -q[2], -q[3],
       q[1],  q[0], -q[3],  q[2],
       q[2],  q[3],  q[0], -q[1],
       q[3], -q[2],  q[1],  q[0];
  // clang-format on
  return m;
}

Mat4 right_matrix(const Vec4& q) {
  Mat4 m;
  // clang-format off
  m << q[0], -q[1], -q[2], -q[3],
       q[1],  q[0],  q[3], -q[2],
       q[2], -q[3],  q[0],  q[1],
       q[3],  q[2], -q[1],  q[0];
  // clang-format on
  return m;
}

UnitQuaternion compose(const UnitQuaternion& a, const UnitQuaternion& b) {
  const Vec4& x = a.vec();
  const Vec4& y = b.vec();
  return UnitQuaternion(x[0] * y[0] - x[1] * y[1] - x[2] * y[2] - x[3] * y[3],
                        x[0] * y[1] + x[1] * y[0] + x[2] * y[3] - x[3] * y[2],
                        x[0] * y[2] - x[1] * y[3] + x[2] * y[0] + x[3] * y[1],
                        x[0] * y[3] + x[1] * y[2] - x[2] * y[1] + x[3] * y[0]);
}

UnitQuaternion conjugate(const UnitQuaternion& q) {
  return UnitQuaternion(q[0], -q[1], -q[2], -q[3]);
}

double angular_distance(const UnitQuaternion& a, const UnitQuaternion& b) {
  // Equals 2 acos(|<a, b>|) but keeps full precision near 0 and pi.
  const Vec4 bb = a.vec().dot(b.vec()) < 0.0 ? Vec4(-b.vec()) : b.vec();
  return 4.0 * std::atan2((a.vec() - bb).norm(), (a.vec() + bb).norm());
}

bool same_rotation(const UnitQuaternion& a, const UnitQuaternion& b, double tol) {
  return std::min((a.vec() - b.vec()).norm(), (a.vec() + b.vec()).norm()) < tol;
}

}  // namespace orient
