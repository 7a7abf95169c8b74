#include "orient/linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace orient {

namespace {

int dominant_index(const Vec4& v) {
  int best = 0;
  for (int i = 1; i < 4; ++i) {
    if (std::abs(v[i]) > std::abs(v[best]) + 1e-12) {
      best = i;
    }
  }
  return best;
}

}  // namespace

Vec4 canonical_sign(const Vec4& v) {
  return v[dominant_index(v)] < 0.0 ? Vec4(-v) : v;
}

SymmetricEigen symmetric_eigen(const Mat4& a) {
  Eigen::SelfAdjointEigenSolver<Mat4> solver(symmetrize(a));
  const Vec4 values = solver.eigenvalues();
  const Mat4 vectors = solver.eigenvectors();

  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  const double tie_tol = 1e-12 * scale;

  std::array<int, 4> order{};
  std::iota(order.begin(), order.end(), 0);
  // Solver output is already ascending; only reorder inside tied clusters.
  for (int start = 0; start < 4;) {
    int end = start + 1;
    while (end < 4 && values[end] - values[end - 1] <= tie_tol) {
      ++end;
    }
    std::stable_sort(order.begin() + start, order.begin() + end, [&](int l, int r) {
      return dominant_index(vectors.col(l)) < dominant_index(vectors.col(r));
    });
    start = end;
  }

  SymmetricEigen out;
  for (int k = 0; k < 4; ++k) {
    // Values stay in solver order (exactly ascending); inside a tie cluster
    // they differ by at most tie_tol, so only the vectors are permuted.
    out.values[k] = values[k];
    out.vectors.col(k) = canonical_sign(vectors.col(order[k]));
  }
  return out;
}

}  // namespace orient
