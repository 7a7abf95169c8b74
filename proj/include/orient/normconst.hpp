#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "orient/quaternion.hpp"

namespace orient {

/// Lowest admissible concentration. Low enough that covariance eigenvalues
/// down to the fitting clamp (1e-8) stay reachable.
inline constexpr double kDefaultZFloor = -1e8;

/// Diagonal of a Bingham concentration matrix, z1 <= z2 <= z3 <= z4 = 0.
class ConcentrationDiag {
 public:
  ConcentrationDiag() = default;
  /// Throws InvalidArgument unless floor <= z1 <= z2 <= z3 <= 0.
  ConcentrationDiag(double z1, double z2, double z3, double floor = kDefaultZFloor);

  /// i in [0, 4); index 3 is always 0.
  double operator[](int i) const { return i < 3 ? z_[i] : 0.0; }
  Vec4 as_vector() const { return Vec4(z_[0], z_[1], z_[2], 0.0); }
  bool is_uniform() const { return z_[0] == 0.0 && z_[1] == 0.0 && z_[2] == 0.0; }

 private:
  std::array<double, 3> z_{0.0, 0.0, 0.0};
};

/// F(Z) together with dF/dz_i = integral of x_i^2 exp(x'Zx) over S^3.
struct NormConstValue {
  double value = 0.0;
  Vec4 grad = Vec4::Zero();
};

/// Surface integral of exp(x'Zx) over S^3, relative accuracy ~1e-12.
double norm_const(const ConcentrationDiag& z);
Vec4 norm_const_grad(const ConcentrationDiag& z);
/// Both in one quadrature pass.
NormConstValue norm_const_with_grad(const ConcentrationDiag& z);

namespace detail {

/// Same integral for an arbitrary (unsorted) z1, z2, z3 <= 0 with z4 = 0.
/// The result is symmetric under permutations of (z1, z2, z3), with the
/// gradient entries permuted accordingly.
NormConstValue integrate_norm_const(double z1, double z2, double z3, double rel_tol = 1e-12);

/// Exponentially scaled modified Bessel functions e^-x I0(x), e^-x I1(x), x >= 0.
double bessel_i0e(double x);
double bessel_i1e(double x);
/// e^-x (I0(x) - I1(x)) without cancellation for large x.
double bessel_i0e_minus_i1e(double x);

}  // namespace detail

/// Lookup table of log F and log dF/dz_i on the ordered nodes z1 <= z2 <= z3
/// of a per-axis grid, with trilinear interpolation in between.
class NormConstTable {
 public:
  struct Node {
    std::array<double, 3> z{};
    double log_value = 0.0;
    Vec4 log_grad = Vec4::Zero();
  };

  struct Lookup {
    NormConstValue value;
    bool interpolated = false;  // false: Z was outside the grid box, direct quadrature used
  };

  /// Evaluates every admissible node. `axis` must be ascending, <= 0, non-empty.
  static NormConstTable build(std::vector<double> axis);
  /// Throws IoError on unreadable or malformed files.
  static NormConstTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const std::vector<double>& axis() const { return axis_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  bool contains(const ConcentrationDiag& z) const;
  Lookup lookup(const ConcentrationDiag& z) const;

 private:
  NormConstTable(std::vector<double> axis, std::vector<Node> nodes);
  int node_index(int i, int j, int k) const;

  std::vector<double> axis_;
  std::vector<Node> nodes_;
  std::vector<int> dense_;  // axis^3 -> index into nodes_ for sorted (i, j, k)
};

/// Builds the table and writes it to `path`.
NormConstTable build_table(const std::vector<double>& axis, const std::filesystem::path& path);

/// `points` values on [axis_min, 0], quadratically spaced so the grid is
/// densest near 0.
std::vector<double> default_table_axis(double axis_min = -50.0, int points = 26);

}  // namespace orient
