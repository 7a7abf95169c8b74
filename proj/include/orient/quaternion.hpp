#pragma once

#include <Eigen/Core>

namespace orient {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

/// Unit quaternion, scalar-first: (x1; x2, x3, x4) = (w; x, y, z).
///
/// The constructor normalizes its input, so every instance is on S^3 to
/// within 1e-12. q and -q are different values but the same rotation; use
/// same_rotation() to compare rotations.
class UnitQuaternion {
 public:
  /// Identity rotation (1, 0, 0, 0).
  UnitQuaternion();
  /// Throws InvalidArgument for a zero or non-finite vector.
  explicit UnitQuaternion(const Vec4& v);
  UnitQuaternion(double x1, double x2, double x3, double x4);

  static UnitQuaternion identity() { return {}; }
  /// Rotation by `angle` radians about `axis` (normalized internally).
  static UnitQuaternion from_axis_angle(const Eigen::Vector3d& axis, double angle);

  const Vec4& vec() const { return v_; }
  double operator[](int i) const { return v_[i]; }
  double scalar() const { return v_[0]; }
  Eigen::Vector3d vector_part() const { return v_.tail<3>(); }

  UnitQuaternion operator-() const;

 private:
  Vec4 v_;
};

/// Hamilton product a ⊕ b, renormalized.
UnitQuaternion compose(const UnitQuaternion& a, const UnitQuaternion& b);
UnitQuaternion conjugate(const UnitQuaternion& q);

/// L(q) with L(q) * y == q ⊕ y for any 4-vector y. Orthogonal for unit q.
Mat4 left_matrix(const Vec4& q);
inline Mat4 left_matrix(const UnitQuaternion& q) { return left_matrix(q.vec()); }
/// R(q) with R(q) * y == y ⊕ q.
Mat4 right_matrix(const Vec4& q);
inline Mat4 right_matrix(const UnitQuaternion& q) { return right_matrix(q.vec()); }

/// Rotation angle between a and b, 2 acos(min(1, |<a, b>|)), in [0, pi].
double angular_distance(const UnitQuaternion& a, const UnitQuaternion& b);

/// min(|a - b|, |a + b|) < tol.
bool same_rotation(const UnitQuaternion& a, const UnitQuaternion& b, double tol = 1e-9);

}  // namespace orient
