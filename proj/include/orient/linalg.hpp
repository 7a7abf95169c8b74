#pragma once

#include "orient/quaternion.hpp"

namespace orient {

struct SymmetricEigen {
  Vec4 values;   // ascending
  Mat4 vectors;  // column k pairs with values[k]
};

/// Eigendecomposition of a symmetric 4x4 matrix with a reproducible basis.
///
/// Eigenvalues ascend. Within a cluster of (numerically) tied eigenvalues the
/// vectors are ordered by the index of their largest-magnitude component.
/// Every column is sign-fixed so that component is positive.
SymmetricEigen symmetric_eigen(const Mat4& a);

/// Flips `v` so its largest-magnitude entry is positive (lowest index wins ties).
Vec4 canonical_sign(const Vec4& v);

inline Mat4 symmetrize(const Mat4& a) { return 0.5 * (a + a.transpose()); }

}  // namespace orient
