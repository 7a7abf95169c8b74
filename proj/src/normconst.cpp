#include "orient/normconst.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>
#include <string>

#include <boost/math/special_functions/bessel.hpp>

#include "orient/errors.hpp"

namespace orient {

ConcentrationDiag::ConcentrationDiag(double z1, double z2, double z3, double floor) : z_{z1, z2, z3} {
  if (!(std::isfinite(z1) && std::isfinite(z2) && std::isfinite(z3))) {
    throw InvalidArgument("ConcentrationDiag: non-finite entry");
  }
  if (!(floor <= z1 && z1 <= z2 && z2 <= z3 && z3 <= 0.0)) {
    std::ostringstream msg;
    msg << "ConcentrationDiag: need " << floor << " <= z1 <= z2 <= z3 <= 0, got (" << z1 << ", " << z2
        << ", " << z3 << ")";
    throw InvalidArgument(msg.str());
  }
}

namespace detail {

namespace {

// Asymptotic expansions of e^-x I_0(x), e^-x I_1(x) and their difference.
// The series diverge, but for x >= kAsymptoticSwitch the smallest term is far
// below rounding before the loop limit is reached.
constexpr double kAsymptoticSwitch = 50.0;
constexpr int kMaxTerms = 80;

double bessel_ie_asymptotic(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < kMaxTerms; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= -(mu - odd * odd) / (k * 8.0 * x);
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) {
      break;
    }
  }
  return sum / std::sqrt(2.0 * std::numbers::pi * x);
}

// e^-x (I0(x) - I1(x)) term by term; all terms are positive, so there is no
// cancellation even though each function is ~1/sqrt(2 pi x).
double bessel_diff_asymptotic(double x) {
  double p0 = 1.0;  // prod (2j-1)^2 / (j 8x)
  double p1 = 1.0;  // prod over j >= 2 of ((2j-1)^2 - 4) / (j 8x), times 3 / (8x)
  double sum = 0.0;
  for (int k = 1; k < kMaxTerms; ++k) {
    const double odd = 2.0 * k - 1.0;
    p0 *= odd * odd / (k * 8.0 * x);
    p1 *= (k == 1 ? 3.0 : odd * odd - 4.0) / (k * 8.0 * x);
    const double term = p0 + p1;
    sum += term;
    if (term < 1e-17 * sum) {
      break;
    }
  }
  return sum / std::sqrt(2.0 * std::numbers::pi * x);
}

}  // namespace

double bessel_i0e(double x) {
  x = std::abs(x);
  if (x < kAsymptoticSwitch) {
    return boost::math::cyl_bessel_i(0, x) * std::exp(-x);
  }
  return bessel_ie_asymptotic(0.0, x);
}

double bessel_i1e(double x) {
  x = std::abs(x);
  if (x < kAsymptoticSwitch) {
    return boost::math::cyl_bessel_i(1, x) * std::exp(-x);
  }
  return bessel_ie_asymptotic(1.0, x);
}

double bessel_i0e_minus_i1e(double x) {
  x = std::abs(x);
  if (x < kAsymptoticSwitch) {
    const double e = std::exp(-x);
    return (boost::math::cyl_bessel_i(0, x) - boost::math::cyl_bessel_i(1, x)) * e;
  }
  return bessel_diff_asymptotic(x);
}

namespace {

// Integrand components: F, x1^2, x2^2, x3^2, x4^2 weighted densities.
using Components = std::array<double, 5>;

// 15-point Gauss-Kronrod rule with embedded 7-point Gauss rule.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

// Parameterize x = (cos p cos a, cos p sin a, sin p cos b, sin p sin b). The
// two circle integrals have closed forms in Bessel functions, leaving one
// integral over t = sin^2 p (u = 1 - t = cos^2 p). Both u and t are passed so
// each can be formed without cancellation near its own endpoint.
struct Integrand {
  double z1, z2, z3;

  Components operator()(double u, double t) const {
    // Circle carrying (x1, x2), squared radius u.
    const double k1 = 0.5 * (z1 - z2) * u;
    const double e1 = std::exp(std::max(z1, z2) * u);
    const double a0 = bessel_i0e(k1);
    const double a1 = bessel_i1e(k1);
    const double lo_a = bessel_i0e_minus_i1e(k1);
    const double p = e1 * a0;
    // The axis with the more negative z gets the (I0 - I1) weight.
    const double pc = 0.5 * e1 * (k1 < 0.0 ? lo_a : a0 + a1);
    const double ps = 0.5 * e1 * (k1 < 0.0 ? a0 + a1 : lo_a);

    // Circle carrying (x3, x4), squared radius t; z4 = 0.
    const double k2 = 0.5 * z3 * t;
    const double e2 = std::exp(std::max(z3, 0.0) * t);
    const double b0 = bessel_i0e(k2);
    const double b1 = bessel_i1e(k2);
    const double lo_b = bessel_i0e_minus_i1e(k2);
    const double q = e2 * b0;
    const double qc = 0.5 * e2 * (k2 < 0.0 ? lo_b : b0 + b1);
    const double qs = 0.5 * e2 * (k2 < 0.0 ? b0 + b1 : lo_b);

    return {p * q, u * pc * q, u * ps * q, t * p * qc, t * p * qs};
  }
};

struct Interval {
  int piece;  // 0: s = u near t = 1, 1: s = t near t = 0
  double a, b;
  Components result;
  Components error;
  double priority;
  bool operator<(const Interval& o) const { return priority < o.priority; }
};

void gauss_kronrod(const Integrand& f, Interval& iv) {
  const double center = 0.5 * (iv.a + iv.b);
  const double half = 0.5 * (iv.b - iv.a);
  auto eval = [&](double s) {
    return iv.piece == 0 ? f(s, 1.0 - s) : f(1.0 - s, s);
  };
  Components kronrod{};
  Components gauss{};
  const Components fc = eval(center);
  for (int c = 0; c < 5; ++c) {
    kronrod[c] = kWgk[7] * fc[c];
    gauss[c] = kWg[3] * fc[c];
  }
  for (int j = 0; j < 7; ++j) {
    const Components f1 = eval(center - half * kXgk[j]);
    const Components f2 = eval(center + half * kXgk[j]);
    for (int c = 0; c < 5; ++c) {
      const double s = f1[c] + f2[c];
      kronrod[c] += kWgk[j] * s;
      if (j % 2 == 1) {
        gauss[c] += kWg[j / 2] * s;
      }
    }
  }
  for (int c = 0; c < 5; ++c) {
    iv.result[c] = kronrod[c] * half;
    iv.error[c] = std::abs((kronrod[c] - gauss[c]) * half);
  }
}

std::vector<double> breakpoints(const std::vector<double>& scales) {
  std::set<double> pts{0.0, 0.5};
  for (double sigma : scales) {
    if (sigma <= 2.0) {
      continue;
    }
    for (double c : {0.5, 2.0, 8.0, 32.0, 128.0}) {
      const double s = c / sigma;
      if (s < 0.5) {
        pts.insert(s);
      }
    }
  }
  return {pts.begin(), pts.end()};
}

constexpr std::size_t kMaxIntervals = 5000;

}  // namespace

NormConstValue integrate_norm_const(double z1, double z2, double z3, double rel_tol) {
  if (!(z1 <= 0.0 && z2 <= 0.0 && z3 <= 0.0)) {
    throw InvalidArgument("integrate_norm_const: concentrations must be <= 0");
  }
  const Integrand f{z1, z2, z3};

  std::vector<Interval> initial;
  const std::array<std::vector<double>, 2> cuts = {
      breakpoints({std::abs(std::max(z1, z2)), 0.5 * std::abs(z1 - z2)}),
      breakpoints({0.5 * std::abs(z3)})};
  for (int piece = 0; piece < 2; ++piece) {
    for (std::size_t i = 0; i + 1 < cuts[piece].size(); ++i) {
      Interval iv{piece, cuts[piece][i], cuts[piece][i + 1], {}, {}, 0.0};
      gauss_kronrod(f, iv);
      initial.push_back(iv);
    }
  }

  Components total{};
  Components total_err{};
  for (const auto& iv : initial) {
    for (int c = 0; c < 5; ++c) {
      total[c] += iv.result[c];
      total_err[c] += iv.error[c];
    }
  }
  // Per-component scale fixed from the first pass; keeps small moments
  // (e.g. x1^2 for a concentrated Z) resolved in relative terms.
  Components scale{};
  for (int c = 0; c < 5; ++c) {
    scale[c] = std::max(total[c], 1e-300);
  }
  auto priority = [&](const Interval& iv) {
    double p = 0.0;
    for (int c = 0; c < 5; ++c) {
      p = std::max(p, iv.error[c] / scale[c]);
    }
    return p;
  };

  std::priority_queue<Interval> queue;
  for (auto& iv : initial) {
    iv.priority = priority(iv);
    queue.push(iv);
  }

  auto converged = [&] {
    for (int c = 0; c < 5; ++c) {
      if (total_err[c] > rel_tol * std::abs(total[c])) {
        return false;
      }
    }
    return true;
  };

  while (!converged()) {
    if (queue.size() >= kMaxIntervals) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "norm_const quadrature did not converge for Z = (" << z1 << ", " << z2 << ", " << z3 << ")";
      throw QuadratureNotConverged(msg.str());
    }
    Interval worst = queue.top();
    queue.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    Interval left{worst.piece, worst.a, mid, {}, {}, 0.0};
    Interval right{worst.piece, mid, worst.b, {}, {}, 0.0};
    gauss_kronrod(f, left);
    gauss_kronrod(f, right);
    for (int c = 0; c < 5; ++c) {
      total[c] += left.result[c] + right.result[c] - worst.result[c];
      total_err[c] += left.error[c] + right.error[c] - worst.error[c];
    }
    left.priority = priority(left);
    right.priority = priority(right);
    queue.push(left);
    queue.push(right);
    // Intervals at roundoff level cannot improve further.
    if (left.b - left.a < 1e-15 * std::max(1.0, std::abs(left.a))) {
      break;
    }
  }
  for (int c = 0; c < 5; ++c) {
    if (!(total_err[c] <= 1e-6 * std::abs(total[c]))) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "norm_const quadrature hit roundoff before reaching tolerance for Z = (" << z1 << ", " << z2
          << ", " << z3 << ")";
      throw QuadratureNotConverged(msg.str());
    }
  }

  // Re-sum from the retained intervals to drop accumulated update drift.
  Components sum{};
  while (!queue.empty()) {
    const Interval& iv = queue.top();
    for (int c = 0; c < 5; ++c) {
      sum[c] += iv.result[c];
    }
    queue.pop();
  }
  const double area = 2.0 * std::numbers::pi * std::numbers::pi;
  NormConstValue out;
  out.value = area * sum[0];
  out.grad = area * Vec4(sum[1], sum[2], sum[3], sum[4]);
  return out;
}

}  // namespace detail

NormConstValue norm_const_with_grad(const ConcentrationDiag& z) {
  return detail::integrate_norm_const(z[0], z[1], z[2]);
}

double norm_const(const ConcentrationDiag& z) { return norm_const_with_grad(z).value; }

Vec4 norm_const_grad(const ConcentrationDiag& z) { return norm_const_with_grad(z).grad; }

// ---------------------------------------------------------------------------
// Lookup table

namespace {

constexpr const char* kMagic = "# bingham-normconst v1";
constexpr const char* kHeader = "z1,z2,z3,logF,logdF1,logdF2,logdF3,logdF4";

void validate_axis(const std::vector<double>& axis) {
  if (axis.empty()) {
    throw InvalidArgument("normconst table axis must not be empty");
  }
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (!std::isfinite(axis[i]) || axis[i] > 0.0 || axis[i] < kDefaultZFloor) {
      throw InvalidArgument("normconst table axis values must lie in [z_floor, 0]");
    }
    if (i > 0 && !(axis[i - 1] < axis[i])) {
      throw InvalidArgument("normconst table axis must be strictly ascending");
    }
  }
}

NormConstTable::Node make_node(double z1, double z2, double z3, const NormConstValue& v) {
  NormConstTable::Node n;
  n.z = {z1, z2, z3};
  n.log_value = std::log(v.value);
  for (int i = 0; i < 4; ++i) {
    n.log_grad[i] = std::log(v.grad[i]);
  }
  return n;
}

std::string format_row(const NormConstTable::Node& n) {
  char buf[64];
  std::string row;
  auto put = [&](double x, bool last) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    row += buf;
    row += last ? "\n" : ",";
  };
  put(n.z[0], false);
  put(n.z[1], false);
  put(n.z[2], false);
  put(n.log_value, false);
  for (int i = 0; i < 4; ++i) {
    put(n.log_grad[i], i == 3);
  }
  return row;
}

}  // namespace

NormConstTable::NormConstTable(std::vector<double> axis, std::vector<Node> nodes)
    : axis_(std::move(axis)), nodes_(std::move(nodes)) {
  const int n = static_cast<int>(axis_.size());
  dense_.assign(static_cast<std::size_t>(n) * n * n, -1);
  int idx = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      for (int k = j; k < n; ++k) {
        dense_[(static_cast<std::size_t>(i) * n + j) * n + k] = idx++;
      }
    }
  }
  if (idx != static_cast<int>(nodes_.size())) {
    throw IoError("normconst table: node count does not match axis");
  }
}

int NormConstTable::node_index(int i, int j, int k) const {
  const int n = static_cast<int>(axis_.size());
  return dense_[(static_cast<std::size_t>(i) * n + j) * n + k];
}

NormConstTable NormConstTable::build(std::vector<double> axis) {
  validate_axis(axis);
  std::vector<Node> nodes;
  const std::size_t n = axis.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      for (std::size_t k = j; k < n; ++k) {
        NormConstValue v;
        try {
          v = detail::integrate_norm_const(axis[i], axis[j], axis[k]);
        } catch (const QuadratureNotConverged& e) {
          throw QuadratureNotConverged(std::string("table build aborted: ") + e.what());
        }
        nodes.push_back(make_node(axis[i], axis[j], axis[k], v));
      }
    }
  }
  return NormConstTable(std::move(axis), std::move(nodes));
}

void NormConstTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out << kMagic << '\n' << kHeader << '\n';
  for (const auto& node : nodes_) {
    out << format_row(node);
  }
  if (!out) {
    throw IoError("failed writing " + path.string());
  }
}

NormConstTable NormConstTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw IoError(path.string() + ": missing '" + kMagic + "' marker");
  }
  if (!std::getline(in, line) || line != kHeader) {
    throw IoError(path.string() + ": unexpected header");
  }
  std::vector<Node> nodes;
  std::set<double> values;
  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    std::array<double, 8> f{};
    std::istringstream row(line);
    std::string cell;
    int c = 0;
    while (std::getline(row, cell, ',')) {
      if (c >= 8) {
        c = 9;
        break;
      }
      try {
        std::size_t used = 0;
        f[c] = std::stod(cell, &used);
        if (used != cell.size()) {
          throw std::invalid_argument(cell);
        }
      } catch (const std::exception&) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
      ++c;
    }
    if (c != 8) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 8 columns");
    }
    Node n;
    n.z = {f[0], f[1], f[2]};
    n.log_value = f[3];
    n.log_grad = Vec4(f[4], f[5], f[6], f[7]);
    const double sum = n.log_grad.array().exp().sum();
    if (std::abs(sum / std::exp(n.log_value) - 1.0) > 1e-6) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": gradient does not sum to F");
    }
    values.insert(f[0]);
    values.insert(f[1]);
    values.insert(f[2]);
    nodes.push_back(n);
  }
  std::vector<double> axis(values.begin(), values.end());
  try {
    validate_axis(axis);
  } catch (const InvalidArgument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  NormConstTable table(std::move(axis), std::move(nodes));
  // Rows must appear in the canonical lexicographic order of the grid.
  const int n = static_cast<int>(table.axis_.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      for (int k = j; k < n; ++k) {
        const Node& node = table.nodes_[table.node_index(i, j, k)];
        if (node.z[0] != table.axis_[i] || node.z[1] != table.axis_[j] || node.z[2] != table.axis_[k]) {
          throw IoError(path.string() + ": rows are not the sorted admissible grid");
        }
      }
    }
  }
  return table;
}

bool NormConstTable::contains(const ConcentrationDiag& z) const {
  for (int i = 0; i < 3; ++i) {
    if (z[i] < axis_.front() || z[i] > axis_.back()) {
      return false;
    }
  }
  return true;
}

NormConstTable::Lookup NormConstTable::lookup(const ConcentrationDiag& z) const {
  if (!contains(z)) {
    return {norm_const_with_grad(z), false};
  }
  const int n = static_cast<int>(axis_.size());
  std::array<int, 3> cell{};
  std::array<double, 3> frac{};
  for (int d = 0; d < 3; ++d) {
    if (n == 1) {
      cell[d] = 0;
      frac[d] = 0.0;
      continue;
    }
    const auto it = std::upper_bound(axis_.begin(), axis_.end(), z[d]);
    int i = static_cast<int>(it - axis_.begin()) - 1;
    i = std::clamp(i, 0, n - 2);
    cell[d] = i;
    frac[d] = (z[d] - axis_[i]) / (axis_[i + 1] - axis_[i]);
  }

  double log_value = 0.0;
  Vec4 log_grad = Vec4::Zero();
  for (int corner = 0; corner < 8; ++corner) {
    std::array<int, 3> idx{};
    double w = 1.0;
    for (int d = 0; d < 3; ++d) {
      const int bit = (corner >> d) & 1;
      idx[d] = std::min(cell[d] + bit, n - 1);
      w *= bit ? frac[d] : 1.0 - frac[d];
    }
    if (w == 0.0) {
      continue;
    }
    // F is symmetric in (z1, z2, z3): read the sorted node and map its
    // gradient entries back to this corner's coordinate order.
    std::array<int, 3> perm = {0, 1, 2};
    std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) { return idx[a] < idx[b]; });
    const Node& node = nodes_[node_index(idx[perm[0]], idx[perm[1]], idx[perm[2]])];
    log_value += w * node.log_value;
    for (int r = 0; r < 3; ++r) {
      log_grad[perm[r]] += w * node.log_grad[r];
    }
    log_grad[3] += w * node.log_grad[3];
  }

  Lookup out;
  out.interpolated = true;
  out.value.value = std::exp(log_value);
  // std::exp rather than Eigen's vectorized exp, so nodes round-trip exactly.
  for (int k = 0; k < 4; ++k) {
    out.value.grad[k] = std::exp(log_grad[k]);
  }
  return out;
}

NormConstTable build_table(const std::vector<double>& axis, const std::filesystem::path& path) {
  NormConstTable table = NormConstTable::build(axis);
  table.save(path);
  return table;
}

std::vector<double> default_table_axis(double axis_min, int points) {
  if (points < 2 || !(axis_min < 0.0)) {
    throw InvalidArgument("default_table_axis: need axis_min < 0 and at least 2 points");
  }
  std::vector<double> axis(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) {
    const double r = static_cast<double>(points - 1 - k) / (points - 1);
    axis[k] = axis_min * r * r;
  }
  axis.back() = 0.0;
  return axis;
}

}  // namespace orient
