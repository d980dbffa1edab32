#pragma once

// Orbit construction, image symmetries, IDX ingestion and the synthetic
// digit corpus used when no MNIST files are available.

#include "symkernel/core.hpp"
#include "symkernel/groups.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace symkernel {

/// Ordered group orbit: points[i] = g^i . seed.
struct Orbit {
  Vector seed;
  std::vector<Vector> points;
  std::string action;
};

/// Two orbits of equal size interleaved as a0, b0, a1, b1, ... with labels
/// +1 (orbit a) and -1 (orbit b).
struct PairedOrbitDataset {
  Orbit orbit_a;
  Orbit orbit_b;
  std::vector<Vector> points;
  Vector labels;
};

inline PairedOrbitDataset interleave(Orbit a, Orbit b) {
  require(a.points.size() == b.points.size() && !a.points.empty(), ErrorKind::Size,
          "interleave: orbits must be nonempty and of equal size");
  PairedOrbitDataset d;
  const std::size_t n = a.points.size();
  d.points.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    d.points.push_back(a.points[i]);
    d.points.push_back(b.points[i]);
  }
  d.labels = Vector(static_cast<Eigen::Index>(2 * n));
  for (std::size_t i = 0; i < 2 * n; ++i) d.labels(static_cast<Eigen::Index>(i)) = i % 2 == 0 ? 1.0 : -1.0;
  d.orbit_a = std::move(a);
  d.orbit_b = std::move(b);
  return d;
}

/// Rotation of R^3 about the x-axis.
inline Matrix x_axis_rotation(double angle) {
  Matrix g = Matrix::Identity(3, 3);
  g(1, 1) = std::cos(angle);
  g(1, 2) = -std::sin(angle);
  g(2, 1) = std::sin(angle);
  g(2, 2) = std::cos(angle);
  return g;
}

/// Two interleaved orbits of C_n on the unit circle in the yz-plane, offset by
/// +-delta/2 along x.
inline PairedOrbitDataset circular_dataset(int n, double delta) {
  require(n >= 2, ErrorKind::InvalidArgument, "circular_dataset: n must be >= 2, got " + std::to_string(n), n);
  require(std::isfinite(delta), ErrorKind::InvalidArgument, "circular_dataset: delta must be finite");
  const double theta = 2.0 * kPi / n;
  Vector xa(3), xb(3);
  xa << delta / 2.0, 1.0, 0.0;
  xb << -delta / 2.0, std::cos(theta / 2.0), std::sin(theta / 2.0);
  Orbit a{xa, {}, "x-rotation"}, b{xb, {}, "x-rotation"};
  for (int i = 0; i < n; ++i) {
    // g^i built from the angle directly rather than by repeated products.
    const Matrix gi = x_axis_rotation(theta * i);
    a.points.push_back(gi * xa);
    b.points.push_back(gi * xb);
  }
  return interleave(std::move(a), std::move(b));
}

// ---------------------------------------------------------------- images

/// Row-major flattening of a square image.
inline Vector flatten(const Matrix& img) {
  Vector v(img.size());
  for (Eigen::Index i = 0; i < img.rows(); ++i)
    for (Eigen::Index j = 0; j < img.cols(); ++j) v(i * img.cols() + j) = img(i, j);
  return v;
}

inline Matrix unflatten(const Vector& v) {
  const auto n = static_cast<Eigen::Index>(std::lround(std::sqrt(static_cast<double>(v.size()))));
  require(n * n == v.size(), ErrorKind::Dimension, "unflatten: length is not a perfect square");
  Matrix img(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) img(i, j) = v(i * n + j);
  return img;
}

/// Exact quarter turn: out(i, j) = img(j, n - 1 - i).
inline Matrix rotate_quarter(const Matrix& img) {
  require(img.rows() == img.cols(), ErrorKind::Dimension, "rotate_image: image must be square");
  const Eigen::Index n = img.rows();
  Matrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = img(j, n - 1 - i);
  return out;
}

/// Rotation about the image center. Multiples of a quarter turn are exact
/// pixel permutations; other angles use bilinear interpolation with zero fill.
inline Matrix rotate_image(const Matrix& img, double angle) {
  require(img.rows() == img.cols(), ErrorKind::Dimension, "rotate_image: image must be square");
  require(std::isfinite(angle), ErrorKind::InvalidArgument, "rotate_image: angle must be finite");
  const double quarters = angle / (kPi / 2.0);
  const double nearest = std::round(quarters);
  if (std::abs(quarters - nearest) < 1e-12) {
    const int k = static_cast<int>(((static_cast<long long>(nearest) % 4) + 4) % 4);
    Matrix out = img;
    for (int i = 0; i < k; ++i) out = rotate_quarter(out);
    return out;
  }
  const Eigen::Index n = img.rows();
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  const double cs = std::cos(angle), sn = std::sin(angle);
  const auto pixel = [&](long r, long q) {
    return (r < 0 || q < 0 || r >= n || q >= n) ? 0.0 : img(r, q);
  };
  Matrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double di = static_cast<double>(i) - c, dj = static_cast<double>(j) - c;
      const double si = cs * di + sn * dj + c;
      const double sj = -sn * di + cs * dj + c;
      const double fi = std::floor(si), fj = std::floor(sj);
      const double ti = si - fi, tj = sj - fj;
      const long r = static_cast<long>(fi), q = static_cast<long>(fj);
      out(i, j) = (1 - ti) * (1 - tj) * pixel(r, q) + (1 - ti) * tj * pixel(r, q + 1) + ti * (1 - tj) * pixel(r + 1, q) +
                  ti * tj * pixel(r + 1, q + 1);
    }
  return out;
}

/// Circular shift along the first index by k: out(i, j) = img((i + k) mod n, j).
inline Matrix translate_rows(const Matrix& img, int k) {
  const Eigen::Index n = img.rows();
  Matrix out(n, img.cols());
  for (Eigen::Index i = 0; i < n; ++i) out.row(i) = img.row(((i + k) % n + n) % n);
  return out;
}

inline Orbit cardinal_rotation_orbit(const Matrix& img) {
  require(img.rows() == img.cols(), ErrorKind::Dimension, "cardinal_rotation_orbit: image must be square");
  Orbit o{flatten(img), {}, "c4-rotation"};
  Matrix cur = img;
  for (int k = 0; k < 4; ++k) {
    o.points.push_back(flatten(cur));
    cur = rotate_quarter(cur);
  }
  return o;
}

inline Orbit translation_orbit(const Matrix& img) {
  require(img.rows() == img.cols(), ErrorKind::Dimension, "translation_orbit: image must be square");
  Orbit o{flatten(img), {}, "translation"};
  for (int k = 0; k < img.rows(); ++k) o.points.push_back(flatten(translate_rows(img, k)));
  return o;
}

inline Vector normalize_to_sphere(const Vector& x) {
  const double norm = x.norm();
  require(norm > 0.0, ErrorKind::ZeroNorm, "normalize_to_sphere: zero-norm point");
  return x / norm;
}

inline std::vector<Vector> normalize_to_sphere(const std::vector<Vector>& points) {
  std::vector<Vector> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(normalize_to_sphere(p));
  return out;
}

/// n_rot rotations by multiples of 2 pi / n_rot of a sphere-normalized seed.
/// Interpolated frames are renormalized since bilinear rotation does not
/// preserve the norm.
inline Orbit rotation_orbit(const Matrix& img, int n_rot) {
  require(n_rot >= 1, ErrorKind::InvalidArgument, "rotation_orbit: n_rot must be >= 1", n_rot);
  const Matrix seed = unflatten(normalize_to_sphere(flatten(img)));
  Orbit o{flatten(seed), {}, "rotation-" + std::to_string(n_rot)};
  for (int k = 0; k < n_rot; ++k) {
    const Vector frame = flatten(rotate_image(seed, 2.0 * kPi * k / n_rot));
    o.points.push_back(frame.norm() > 0.0 ? Vector(frame / frame.norm()) : frame);
  }
  return o;
}

struct OrbitGeometry {
  double delta_sq;
  double radius;
  double inverse_radius;
};

inline Vector centroid(const std::vector<Vector>& points) {
  require(!points.empty(), ErrorKind::Size, "centroid: empty point set");
  Vector c = Vector::Zero(points.front().size());
  for (const auto& p : points) c += p;
  return c / static_cast<double>(points.size());
}

inline OrbitGeometry orbit_geometry(const PairedOrbitDataset& pair) {
  const Vector ca = centroid(pair.orbit_a.points), cb = centroid(pair.orbit_b.points);
  const auto spread = [](const std::vector<Vector>& pts, const Vector& c) {
    double acc = 0.0;
    for (const auto& p : pts) acc += (p - c).norm();
    return acc / static_cast<double>(pts.size());
  };
  const double radius = 0.5 * (spread(pair.orbit_a.points, ca) + spread(pair.orbit_b.points, cb));
  return {(ca - cb).squaredNorm(), radius,
          radius > 0.0 ? 1.0 / radius : std::numeric_limits<double>::infinity()};
}

// ---------------------------------------------------------------- D4 x C2

struct LabeledOrbit {
  GroupAction action;
  Vector seed;
  std::vector<Vector> points;  // points[g] = action.matrices[g] * seed
  Vector labels;
};

/// Normalized all-ones vector of a 2x2 image.
inline Vector ones_direction() { return Vector::Constant(4, 0.5); }

/// Orbit of a random 2x2 image under D4 (pixel permutations) x C2 (global
/// sign). The all-ones component is set to separation / 2, so the class
/// centroids sit at +-separation/2 along that axis. Labels follow the C2 sign.
inline LabeledOrbit d4c2_dataset(double separation, std::uint64_t rng_seed) {
  require(separation >= 0.0 && std::isfinite(separation), ErrorKind::InvalidArgument,
          "d4c2_dataset: separation must be >= 0", separation);
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(4);
  for (int i = 0; i < 4; ++i) x(i) = normal(rng);
  const Vector one = ones_direction();
  x -= x.dot(one) * one;
  const Vector seed = x + (separation / 2.0) * one;
  LabeledOrbit out{product_action(d4_pixel_action(), sign_action(4)), seed, {}, Vector(16)};
  for (int g = 0; g < out.action.group.order(); ++g) {
    out.points.push_back(out.action.apply(g, seed));
    out.labels(g) = g % 2 == 0 ? 1.0 : -1.0;
  }
  return out;
}

// ---------------------------------------------------------------- IDX files

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct LabeledImages {
  std::vector<Matrix> images;
  std::vector<int> labels;
};

namespace detail {

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off, const std::string& path) {
  require(b.size() >= off + 4, ErrorKind::Length, path + ": truncated header");
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

inline void write_be32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> bytes{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                                  static_cast<char>(v)};
  out.write(bytes.data(), 4);
}

inline std::uint8_t to_byte(double v) {
  require(v >= 0.0 && v <= 1.0, ErrorKind::InvalidArgument, "IDX pixel values must lie in [0, 1]", v);
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

}  // namespace detail

/// Images from an IDX3 file, pixel bytes scaled to [0, 1].
inline std::vector<Matrix> load_idx_images(const std::filesystem::path& path) {
  const auto b = detail::read_bytes(path);
  const std::string name = path.string();
  require(b.size() >= 4, ErrorKind::Length, name + ": file shorter than the magic number");
  const std::uint32_t magic = detail::read_be32(b, 0, name);
  require(magic == kIdxImageMagic, ErrorKind::Format, name + ": bad image magic " + std::to_string(magic), magic);
  const std::size_t count = detail::read_be32(b, 4, name);
  const std::size_t rows = detail::read_be32(b, 8, name);
  const std::size_t cols = detail::read_be32(b, 12, name);
  require(b.size() - 16 >= count * rows * cols, ErrorKind::Length, name + ": truncated pixel payload");
  std::vector<Matrix> images;
  images.reserve(count);
  std::size_t off = 16;
  for (std::size_t k = 0; k < count; ++k) {
    Matrix img(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) img(i, j) = b[off++] / 255.0;
    images.push_back(std::move(img));
  }
  return images;
}

inline std::vector<int> load_idx_labels(const std::filesystem::path& path) {
  const auto b = detail::read_bytes(path);
  const std::string name = path.string();
  require(b.size() >= 4, ErrorKind::Length, name + ": file shorter than the magic number");
  const std::uint32_t magic = detail::read_be32(b, 0, name);
  require(magic == kIdxLabelMagic, ErrorKind::Format, name + ": bad label magic " + std::to_string(magic), magic);
  const std::size_t count = detail::read_be32(b, 4, name);
  require(b.size() - 8 >= count, ErrorKind::Length, name + ": truncated label payload");
  return {b.begin() + 8, b.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

inline LabeledImages load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  LabeledImages out{load_idx_images(images), load_idx_labels(labels)};
  require(out.images.size() == out.labels.size(), ErrorKind::Length, "image and label counts differ");
  return out;
}

inline void write_idx_images(const std::filesystem::path& path, const std::vector<Matrix>& images) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  const Eigen::Index rows = images.empty() ? 0 : images.front().rows();
  const Eigen::Index cols = images.empty() ? 0 : images.front().cols();
  detail::write_be32(out, kIdxImageMagic);
  detail::write_be32(out, static_cast<std::uint32_t>(images.size()));
  detail::write_be32(out, static_cast<std::uint32_t>(rows));
  detail::write_be32(out, static_cast<std::uint32_t>(cols));
  for (const auto& img : images) {
    require(img.rows() == rows && img.cols() == cols, ErrorKind::Dimension, "write_idx_images: mixed shapes");
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) out.put(static_cast<char>(detail::to_byte(img(i, j))));
  }
}

inline void write_idx_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  detail::write_be32(out, kIdxLabelMagic);
  detail::write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) {
    require(l >= 0 && l <= 255, ErrorKind::InvalidArgument, "write_idx_labels: label out of byte range", l);
    out.put(static_cast<char>(l));
  }
}

// ---------------------------------------------------------------- digit corpus

inline constexpr int kDigitSide = 28;
inline constexpr int kDigitClasses = 10;

/// Deterministic 28x28 ten-class stand-in for MNIST. Each class is a fixed
/// arrangement of four thick strokes; samples jitter the stroke endpoints,
/// widths and intensities, then quantize to 8-bit levels.
inline LabeledImages synthetic_digits(int per_class, std::uint64_t rng_seed) {
  require(per_class >= 1, ErrorKind::InvalidArgument, "synthetic_digits: per_class must be >= 1", per_class);
  struct Stroke {
    double r0, c0, r1, c1;
  };
  std::array<std::array<Stroke, 4>, kDigitClasses> templates{};
  std::mt19937_64 layout(0x5eedULL);
  std::uniform_real_distribution<double> pos(5.0, 22.0);
  for (auto& strokes : templates)
    for (auto& s : strokes) s = {pos(layout), pos(layout), pos(layout), pos(layout)};

  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> jitter(0.0, 1.5);
  std::uniform_real_distribution<double> width(1.0, 1.8), gain(0.7, 1.0);
  LabeledImages out;
  for (int k = 0; k < per_class; ++k)
    for (int cls = 0; cls < kDigitClasses; ++cls) {
      Matrix img = Matrix::Zero(kDigitSide, kDigitSide);
      for (const auto& t : templates[cls]) {
        const Stroke s{t.r0 + jitter(rng), t.c0 + jitter(rng), t.r1 + jitter(rng), t.c1 + jitter(rng)};
        const double w = width(rng), a = gain(rng);
        const double dr = s.r1 - s.r0, dc = s.c1 - s.c0;
        const double len2 = std::max(dr * dr + dc * dc, 1e-12);
        for (int i = 0; i < kDigitSide; ++i)
          for (int j = 0; j < kDigitSide; ++j) {
            const double t01 = std::clamp(((i - s.r0) * dr + (j - s.c0) * dc) / len2, 0.0, 1.0);
            const double er = i - (s.r0 + t01 * dr), ec = j - (s.c0 + t01 * dc);
            img(i, j) = std::max(img(i, j), a * std::exp(-(er * er + ec * ec) / (2.0 * w * w)));
          }
      }
      out.images.push_back(img.unaryExpr([](double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }));
      out.labels.push_back(cls);
    }
  return out;
}

inline constexpr const char* kDataDirEnv = "SYMM_KERNEL_DATA_DIR";

/// MNIST training files from `data_dir` (or $SYMM_KERNEL_DATA_DIR) when both
/// exist; otherwise nullopt.
inline std::optional<LabeledImages> try_load_mnist(std::optional<std::filesystem::path> data_dir = std::nullopt) {
  if (!data_dir) {
    const char* env = std::getenv(kDataDirEnv);
    if (env == nullptr || *env == '\0') return std::nullopt;
    data_dir = env;
  }
  const auto images = *data_dir / "train-images-idx3-ubyte";
  const auto labels = *data_dir / "train-labels-idx1-ubyte";
  if (!std::filesystem::exists(images) || !std::filesystem::exists(labels)) return std::nullopt;
  return load_idx(images, labels);
}

/// First `per_class` images of each class, grouped by class.
inline std::vector<std::vector<Matrix>> group_by_class(const LabeledImages& data, int per_class) {
  std::vector<std::vector<Matrix>> by_class(kDigitClasses);
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    const int c = data.labels[i];
    if (c >= 0 && c < kDigitClasses && static_cast<int>(by_class[c].size()) < per_class)
      by_class[c].push_back(data.images[i]);
  }
  for (int c = 0; c < kDigitClasses; ++c)
    require(static_cast<int>(by_class[c].size()) == per_class, ErrorKind::Size,
            "not enough images for class " + std::to_string(c));
  return by_class;
}

}  // namespace symkernel
