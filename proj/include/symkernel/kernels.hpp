#pragma once

// Closed-form kernels: RBF, infinite-width ReLU MLP (NNGP / NTK) and a
// one-hidden-layer circular convolution with fully-connected or
// global-average-pooling readout. Gram assembly lives at the bottom.

#include "symkernel/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

namespace symkernel {

enum class KernelMode { Nngp, Ntk };
enum class Readout { FullyConnected, GlobalAveragePool };

struct RbfSpec {
  double length_scale = 1.0;
};

struct MlpSpec {
  int hidden_layers = 1;
  double weight_std = 1.0;
  double bias_std = 1.0;
  KernelMode mode = KernelMode::Ntk;
};

/// One circular-padded conv layer, ReLU, readout, dense output. No biases.
struct ConvSpec {
  int filter_size = 3;
  int stride = 1;
  Readout readout = Readout::FullyConnected;
  double weight_std = 1.0;
  KernelMode mode = KernelMode::Ntk;
};

using KernelSpec = std::variant<RbfSpec, MlpSpec, ConvSpec>;

inline void validate(const KernelSpec& spec) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, RbfSpec>) {
          require(s.length_scale > 0.0, ErrorKind::InvalidArgument, "length scale must be > 0");
        } else if constexpr (std::is_same_v<T, MlpSpec>) {
          require(s.hidden_layers >= 1, ErrorKind::InvalidArgument, "hidden_layers must be >= 1");
          require(s.weight_std > 0.0, ErrorKind::InvalidArgument, "weight_std must be > 0");
          require(s.bias_std >= 0.0, ErrorKind::InvalidArgument, "bias_std must be >= 0");
        } else {
          require(s.filter_size >= 1, ErrorKind::InvalidArgument, "filter_size must be >= 1");
          require(s.stride >= 1, ErrorKind::InvalidArgument, "stride must be >= 1");
          require(s.weight_std > 0.0, ErrorKind::InvalidArgument, "weight_std must be > 0");
        }
      },
      spec);
}

inline const char* to_string(KernelMode m) { return m == KernelMode::Nngp ? "nngp" : "ntk"; }
inline const char* to_string(Readout r) { return r == Readout::FullyConnected ? "fc" : "gap"; }

inline std::string describe(const KernelSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, RbfSpec>) {
          return "rbf(L=" + std::to_string(s.length_scale) + ")";
        } else if constexpr (std::is_same_v<T, MlpSpec>) {
          return "mlp(hidden=" + std::to_string(s.hidden_layers) + ",W=" + std::to_string(s.weight_std) +
                 ",b=" + std::to_string(s.bias_std) + "," + to_string(s.mode) + ")";
        } else {
          return std::string("conv(filter=") + std::to_string(s.filter_size) + ",stride=" + std::to_string(s.stride) +
                 "," + to_string(s.readout) + ",W=" + std::to_string(s.weight_std) + "," + to_string(s.mode) + ")";
        }
      },
      spec);
}

/// exp(-L^2 |x - y|^2).
inline double rbf(const Vector& x, const Vector& y, double length_scale) {
  require(x.size() == y.size(), ErrorKind::Dimension, "rbf: dimension mismatch");
  require(length_scale > 0.0, ErrorKind::InvalidArgument, "rbf: length scale must be > 0");
  return std::exp(-length_scale * length_scale * (x - y).squaredNorm());
}

/// ReLU dual maps for a centered Gaussian pair with covariance
/// [[sxx, sxy], [sxy, syy]].
struct ReluDual {
  double value;       // E[relu(u) relu(v)]
  double derivative;  // E[relu'(u) relu'(v)]
};

inline ReluDual relu_dual(double sxy, double sxx, double syy) {
  const double norm = std::sqrt(sxx * syy);
  if (!(norm > 0.0)) return {0.0, 0.0};
  double c = std::clamp(sxy / norm, -1.0, 1.0);
  // acos has infinite slope at +-1: a few ulps of rounding in the inputs would
  // become an angle near 1e-8. Angles that small are below what the dot
  // products can resolve, so they are snapped to the endpoint.
  constexpr double kSnap = 8.0 * std::numeric_limits<double>::epsilon();
  if (c > 1.0 - kSnap) c = 1.0;
  if (c < -1.0 + kSnap) c = -1.0;
  const double theta = std::acos(c);
  return {norm * (std::sin(theta) + (kPi - theta) * c) / (2.0 * kPi), (kPi - theta) / (2.0 * kPi)};
}

/// MLP kernel from the three scalars it depends on.
inline double mlp_kernel_from_dots(double xy, double xx, double yy, Eigen::Index dim, const MlpSpec& spec) {
  const double w2 = spec.weight_std * spec.weight_std;
  const double b2 = spec.bias_std * spec.bias_std;
  const double d = static_cast<double>(dim);
  double sxy = w2 * xy / d + b2;
  double sxx = w2 * xx / d + b2;
  double syy = w2 * yy / d + b2;
  double ntk = sxy;
  for (int l = 0; l < spec.hidden_layers; ++l) {
    const ReluDual cross = relu_dual(sxy, sxx, syy);
    const double next_xy = w2 * cross.value + b2;
    // Diagonal terms: T(Sigma) at c = 1 is Sigma / 2.
    const double next_xx = w2 * sxx / 2.0 + b2;
    const double next_yy = w2 * syy / 2.0 + b2;
    ntk = next_xy + w2 * cross.derivative * ntk;
    sxy = next_xy;
    sxx = next_xx;
    syy = next_yy;
  }
  return spec.mode == KernelMode::Nngp ? sxy : ntk;
}

inline double mlp_kernel(const Vector& x, const Vector& y, const MlpSpec& spec) {
  require(x.size() == y.size() && x.size() >= 1, ErrorKind::Dimension, "mlp_kernel: dimension mismatch");
  return mlp_kernel_from_dots(x.dot(y), x.squaredNorm(), y.squaredNorm(), x.size(), spec);
}

/// Side length of a square image stored as a flat row-major vector.
inline int image_side(const Vector& flat) {
  const auto n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(flat.size()))));
  require(static_cast<Eigen::Index>(n) * n == flat.size(), ErrorKind::Dimension,
          "conv kernel expects square images, got " + std::to_string(flat.size()) + " pixels");
  return n;
}

/// Circular patches of a flat n x n image: one row per output position,
/// filter taps along columns, anchored so odd filters are centered.
inline Matrix conv_patches(const Vector& flat, const ConvSpec& spec) {
  const int n = image_side(flat);
  const int f = spec.filter_size;
  require(n % spec.stride == 0, ErrorKind::Dimension,
          "stride " + std::to_string(spec.stride) + " does not divide image side " + std::to_string(n));
  const int m = n / spec.stride;
  const int off = (f - 1) / 2;
  Matrix p(static_cast<Eigen::Index>(m) * m, static_cast<Eigen::Index>(f) * f);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int a = 0; a < f; ++a)
        for (int b = 0; b < f; ++b) {
          const int r = ((i * spec.stride + a - off) % n + n) % n;
          const int c = ((j * spec.stride + b - off) % n + n) % n;
          p(i * m + j, a * f + b) = flat(r * n + c);
        }
  return p;
}

/// Conv kernel from precomputed patch matrices.
inline double conv_kernel_from_patches(const Matrix& px, const Matrix& py, const ConvSpec& spec) {
  require(px.rows() == py.rows() && px.cols() == py.cols(), ErrorKind::Dimension, "conv kernel: shape mismatch");
  const double w2 = spec.weight_std * spec.weight_std;
  const double tap = w2 / static_cast<double>(px.cols());
  const Vector vx = tap * px.rowwise().squaredNorm();
  const Vector vy = tap * py.rowwise().squaredNorm();
  const bool ntk = spec.mode == KernelMode::Ntk;
  const Eigen::Index m = px.rows();
  double acc = 0.0;
  if (spec.readout == Readout::FullyConnected) {
    for (Eigen::Index p = 0; p < m; ++p) {
      const double sxy = tap * px.row(p).dot(py.row(p));
      const ReluDual r = relu_dual(sxy, vx(p), vy(p));
      acc += r.value + (ntk ? r.derivative * sxy : 0.0);
    }
    return w2 * acc;
  }
  const Matrix cross = tap * (px * py.transpose());
  for (Eigen::Index q = 0; q < m; ++q)
    for (Eigen::Index p = 0; p < m; ++p) {
      const ReluDual r = relu_dual(cross(p, q), vx(p), vy(q));
      acc += r.value + (ntk ? r.derivative * cross(p, q) : 0.0);
    }
  return w2 * acc / (static_cast<double>(m) * static_cast<double>(m));
}

/// Conv kernel between two n x n images (row-major flat vectors).
inline double conv_kernel(const Vector& x, const Vector& y, const ConvSpec& spec) {
  require(x.size() == y.size(), ErrorKind::Dimension, "conv kernel: shape mismatch");
  return conv_kernel_from_patches(conv_patches(x, spec), conv_patches(y, spec), spec);
}

inline double conv_kernel(const Matrix& x, const Matrix& y, const ConvSpec& spec) {
  require(x.rows() == x.cols() && x.rows() == y.rows() && x.cols() == y.cols(), ErrorKind::Dimension,
          "conv kernel: images must be square and of equal shape");
  const Matrix xr = x.transpose(), yr = y.transpose();  // column-major -> row-major flat
  return conv_kernel(Vector(Eigen::Map<const Vector>(xr.data(), xr.size())),
                     Vector(Eigen::Map<const Vector>(yr.data(), yr.size())), spec);
}

inline double evaluate(const KernelSpec& spec, const Vector& x, const Vector& y) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, RbfSpec>) return rbf(x, y, s.length_scale);
        else if constexpr (std::is_same_v<T, MlpSpec>) return mlp_kernel(x, y, s);
        else return conv_kernel(x, y, s);
      },
      spec);
}

/// Rows of `points` stacked into a matrix.
inline Matrix stack_rows(const std::vector<Vector>& points) {
  require(!points.empty(), ErrorKind::Dimension, "empty point set");
  const Eigen::Index d = points.front().size();
  Matrix x(static_cast<Eigen::Index>(points.size()), d);
  for (std::size_t i = 0; i < points.size(); ++i) {
    require(points[i].size() == d, ErrorKind::Dimension, "points must have homogeneous shapes");
    x.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  }
  return x;
}

/// Kernel values between every point of `a` (rows) and `b` (columns).
inline Matrix kernel_matrix(const std::vector<Vector>& a, const std::vector<Vector>& b, const KernelSpec& spec) {
  validate(spec);
  const Matrix xa = stack_rows(a), xb = stack_rows(b);
  require(xa.cols() == xb.cols(), ErrorKind::Dimension, "point sets have different dimensions");
  const Eigen::Index na = xa.rows(), nb = xb.rows();
  Matrix k(na, nb);
  if (const auto* rbf_spec = std::get_if<RbfSpec>(&spec)) {
    const double l2 = rbf_spec->length_scale * rbf_spec->length_scale;
    for (Eigen::Index i = 0; i < na; ++i)
      for (Eigen::Index j = 0; j < nb; ++j) k(i, j) = std::exp(-l2 * (xa.row(i) - xb.row(j)).squaredNorm());
  } else if (const auto* mlp = std::get_if<MlpSpec>(&spec)) {
    const Matrix dots = xa * xb.transpose();
    const Vector na2 = xa.rowwise().squaredNorm(), nb2 = xb.rowwise().squaredNorm();
    for (Eigen::Index i = 0; i < na; ++i)
      for (Eigen::Index j = 0; j < nb; ++j) k(i, j) = mlp_kernel_from_dots(dots(i, j), na2(i), nb2(j), xa.cols(), *mlp);
  } else {
    const auto& conv = std::get<ConvSpec>(spec);
    std::vector<Matrix> pa, pb;
    for (const auto& p : a) pa.push_back(conv_patches(p, conv));
    for (const auto& p : b) pb.push_back(conv_patches(p, conv));
    for (Eigen::Index i = 0; i < na; ++i)
      for (Eigen::Index j = 0; j < nb; ++j) k(i, j) = conv_kernel_from_patches(pa[i], pb[j], conv);
  }
  return k;
}

/// Symmetric, numerically PSD Gram matrix in input order.
struct GramMatrix {
  Matrix values;
  KernelSpec spec;
  std::string ordering;
};

/// Tolerance for negative eigenvalues, relative to trace / M.
inline constexpr double kPsdTolerance = 1e-8;

/// Symmetrizes (K + K^T)/2 and rejects matrices whose smallest eigenvalue is
/// below -kPsdTolerance * trace / M.
inline Matrix symmetrize_checked(const Matrix& k) {
  require(k.rows() == k.cols(), ErrorKind::Dimension, "gram must be square");
  Matrix s = 0.5 * (k + k.transpose());
  const Eigen::Index m = s.rows();
  const double floor = -kPsdTolerance * std::abs(s.trace()) / static_cast<double>(m);
  const double min_eig = Eigen::SelfAdjointEigenSolver<Matrix>(s, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  require(min_eig >= floor, ErrorKind::NotPositiveSemidefinite,
          "gram has eigenvalue " + std::to_string(min_eig) + " below tolerance " + std::to_string(floor), min_eig);
  return s;
}

inline GramMatrix gram(const std::vector<Vector>& points, const KernelSpec& spec, std::string ordering = "input") {
  return {symmetrize_checked(kernel_matrix(points, points, spec)), spec, std::move(ordering)};
}

}  // namespace symkernel
