#include "symkernel/datasets.hpp"
#include "symkernel/kernels.hpp"
#include "symkernel/spectral.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

using namespace symkernel;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Matrix random_image(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = u(rng);
  return m;
}

ErrorKind error_kind(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("symkernel-test-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("circular dataset geometry", "[datasets]") {
  const PairedOrbitDataset zero = circular_dataset(6, 0.0);
  REQUIRE(zero.points.size() == 12);
  // All points on the unit circle of the yz-plane, consecutive ones theta/2 apart.
  for (std::size_t i = 0; i < zero.points.size(); ++i) {
    const Vector& p = zero.points[i];
    CHECK_THAT(p(0), WithinAbs(0.0, 1e-15));
    CHECK_THAT(p.norm(), WithinAbs(1.0, 1e-14));
    const double angle = std::atan2(p(2), p(1));
    const double expected = std::remainder(i * kPi / 6.0, 2.0 * kPi);
    CHECK_THAT(std::remainder(angle - expected, 2.0 * kPi), WithinAbs(0.0, 1e-12));
  }

  const PairedOrbitDataset one = circular_dataset(8, 1.0);
  for (int i = 0; i < 8; ++i) {
    const Vector& a = one.orbit_a.points[i];
    CHECK_THAT((a - one.orbit_b.points[i]).norm(), WithinAbs((a - one.orbit_b.points[(i + 7) % 8]).norm(), 1e-12));
  }
  for (int i = 0; i < 16; ++i) CHECK(one.labels(i) == (i % 2 == 0 ? 1.0 : -1.0));
  CHECK(one.points[2] == one.orbit_a.points[1]);
  CHECK(one.points[3] == one.orbit_b.points[1]);
  CHECK(error_kind([] { circular_dataset(1, 0.0); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("circular dataset grams are circulant and delta is the centroid gap", "[datasets][property]") {
  for (int n : {2, 3, 5, 8, 13, 32})
    for (double d : {0.0, 0.3, 1.0, 4.0}) {
      const PairedOrbitDataset ds = circular_dataset(n, d);
      CHECK(is_circulant(gram(ds.points, RbfSpec{1.0}).values, 1e-10).circulant);
      CHECK(is_circulant(gram(ds.points, MlpSpec{2, 1.0, 1.0, KernelMode::Ntk}).values, 1e-10).circulant);
      CHECK_THAT(orbit_geometry(ds).delta_sq, WithinAbs(d * d, 1e-12));
    }
}

TEST_CASE("image rotation", "[datasets]") {
  std::mt19937_64 rng(1);
  const Matrix img = random_image(7, rng);
  CHECK(rotate_image(img, 0.0) == img);

  Matrix cur = img;
  for (int k = 0; k < 4; ++k) cur = rotate_image(cur, kPi / 2.0);
  CHECK(cur == img);

  // Quarter turn map: out(i, j) = in(j, n - 1 - i).
  const Matrix q = rotate_image(img, kPi / 2.0);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) CHECK(q(i, j) == img(j, 6 - i));

  // Centrally symmetric image is fixed by a half turn.
  const Matrix sym = img + rotate_image(img, kPi);
  CHECK((rotate_image(sym, kPi) - sym).cwiseAbs().maxCoeff() < 1e-6);

  // Bilinear rotation agrees with the exact permutation in the limit.
  const Matrix near = rotate_image(img, kPi / 2.0 + 1e-9);
  CHECK((near - q).cwiseAbs().maxCoeff() < 1e-6);

  // Off-grid rotation of a centered disc keeps the disc.
  Matrix disc = Matrix::Zero(9, 9);
  disc(4, 4) = 1.0;
  CHECK_THAT(rotate_image(disc, 0.3)(4, 4), WithinAbs(1.0, 1e-12));

  CHECK(error_kind([] { rotate_image(Matrix::Zero(3, 4), 0.1); }) == ErrorKind::Dimension);
}

TEST_CASE("cardinal rotation and translation orbits", "[datasets]") {
  std::mt19937_64 rng(2);
  const Matrix img = random_image(6, rng);
  const Orbit rot = cardinal_rotation_orbit(img);
  REQUIRE(rot.points.size() == 4);
  CHECK(rot.points[0] == flatten(img));
  CHECK(flatten(rotate_quarter(unflatten(rot.points[3]))) == rot.points[0]);
  for (const auto& p : rot.points) CHECK_THAT(p.norm(), WithinRel(rot.points[0].norm(), 1e-12));

  const Orbit tr = translation_orbit(img);
  REQUIRE(tr.points.size() == 6);
  CHECK(tr.points[0] == flatten(img));
  CHECK(flatten(translate_rows(unflatten(tr.points[5]), 1)) == tr.points[0]);
  const Matrix shifted = unflatten(tr.points[1]);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) CHECK(shifted(i, j) == img((i + 1) % 6, j));
}

TEST_CASE("sphere normalization", "[datasets]") {
  Vector u = Vector::Zero(3);
  u(1) = 1.0;
  CHECK(normalize_to_sphere(u) == u);
  Vector x(3);
  x << 0.3, -2.0, 1.1;
  CHECK((normalize_to_sphere(Vector(5.0 * x)) - normalize_to_sphere(x)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THAT(normalize_to_sphere(x).norm(), WithinAbs(1.0, 1e-12));
  CHECK(error_kind([] { normalize_to_sphere(Vector(Vector::Zero(4))); }) == ErrorKind::ZeroNorm);

  const LabeledImages digits = synthetic_digits(1, 3);
  for (const auto& img : digits.images) CHECK_THAT(normalize_to_sphere(flatten(img)).norm(), WithinAbs(1.0, 1e-12));
}

TEST_CASE("rotation orbits of digits", "[datasets]") {
  const LabeledImages digits = synthetic_digits(1, 5);
  const Orbit o = rotation_orbit(digits.images[0], 8);
  REQUIRE(o.points.size() == 8);
  for (const auto& p : o.points) CHECK_THAT(p.norm(), WithinAbs(1.0, 1e-12));
  CHECK((o.points[0] - o.seed).cwiseAbs().maxCoeff() < 1e-15);
  // Multiples of a quarter turn are exact permutations.
  CHECK((o.points[2] - flatten(rotate_quarter(unflatten(o.seed)))).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("orbit geometry", "[datasets]") {
  const Matrix flat_img = Matrix::Constant(5, 5, 0.4);
  const PairedOrbitDataset invariant = interleave(cardinal_rotation_orbit(flat_img), cardinal_rotation_orbit(2.0 * flat_img));
  CHECK(orbit_geometry(invariant).radius == 0.0);
  CHECK(std::isinf(orbit_geometry(invariant).inverse_radius));

  std::mt19937_64 rng(3);
  const Matrix img = random_image(5, rng);
  const PairedOrbitDataset same = interleave(cardinal_rotation_orbit(img), cardinal_rotation_orbit(img));
  const OrbitGeometry g = orbit_geometry(same);
  CHECK(g.delta_sq == 0.0);
  CHECK(g.radius > 0.0);
  CHECK_THAT(g.inverse_radius * g.radius, WithinRel(1.0, 1e-15));
}

TEST_CASE("D4 x C2 dataset", "[datasets]") {
  const LabeledOrbit ds = d4c2_dataset(1.5, 7);
  REQUIRE(ds.points.size() == 16);
  CHECK(ds.action.orthogonality_deviation() < 1e-12);
  for (const auto& m : ds.action.matrices) {
    // Signed permutation: one +-1 per row.
    for (int i = 0; i < 4; ++i) {
      CHECK(m.row(i).cwiseAbs().sum() == 1.0);
      CHECK(m.row(i).cwiseAbs().maxCoeff() == 1.0);
    }
  }
  for (int g = 0; g < 16; ++g) CHECK(ds.labels(g) == (g % 2 == 0 ? 1.0 : -1.0));
  CHECK(ds.points[0] == ds.seed);

  const Matrix k = gram(ds.points, RbfSpec{1.0}).values;
  CHECK(stationarity_deviation(k, ds.action.group) < 1e-10);

  const LabeledOrbit again = d4c2_dataset(1.5, 7);
  CHECK(again.seed == ds.seed);
  CHECK(error_kind([] { d4c2_dataset(-1.0, 1); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("D4 x C2 separation is the class centroid distance", "[datasets][property]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    for (double sep : {0.0, 0.25, 1.0, 3.0}) {
      const LabeledOrbit ds = d4c2_dataset(sep, seed);
      Vector plus = Vector::Zero(4), minus = Vector::Zero(4);
      for (int g = 0; g < 16; ++g) (ds.labels(g) > 0 ? plus : minus) += ds.points[g] / 8.0;
      CHECK_THAT((plus - minus).norm(), WithinAbs(sep, 1e-12));
    }
}

TEST_CASE("IDX fixture parsing", "[datasets]") {
  TempDir dir;
  // Two 3x3 images, bytes 0..17, then labels 4 and 9.
  std::vector<unsigned char> img{0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0, 3};
  for (int b = 0; b < 18; ++b) img.push_back(static_cast<unsigned char>(b * 15));
  write_bytes(dir.path / "img", img);
  write_bytes(dir.path / "lbl", {0, 0, 8, 1, 0, 0, 0, 2, 4, 9});

  const LabeledImages data = load_idx(dir.path / "img", dir.path / "lbl");
  REQUIRE(data.images.size() == 2);
  CHECK(data.labels == std::vector<int>{4, 9});
  CHECK(data.images[0].rows() == 3);
  CHECK(data.images[0](0, 0) == 0.0);
  CHECK(data.images[0](1, 2) == 75.0 / 255.0);
  CHECK(data.images[1](2, 2) == 255.0 / 255.0);
  CHECK(data.images[1](0, 0) == 135.0 / 255.0);
}

TEST_CASE("IDX error handling", "[datasets]") {
  TempDir dir;
  write_bytes(dir.path / "wrong", {0, 0, 8, 2, 0, 0, 0, 0});
  CHECK(error_kind([&] { load_idx_images(dir.path / "wrong"); }) == ErrorKind::Format);
  write_bytes(dir.path / "empty", {});
  CHECK(error_kind([&] { load_idx_images(dir.path / "empty"); }) == ErrorKind::Length);
  CHECK(error_kind([&] { load_idx_labels(dir.path / "empty"); }) == ErrorKind::Length);
  write_bytes(dir.path / "short", {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2, 3});
  CHECK(error_kind([&] { load_idx_images(dir.path / "short"); }) == ErrorKind::Length);
  write_bytes(dir.path / "short_labels", {0, 0, 8, 1, 0, 0, 0, 3, 1});
  CHECK(error_kind([&] { load_idx_labels(dir.path / "short_labels"); }) == ErrorKind::Length);
  CHECK(error_kind([&] { load_idx_images(dir.path / "missing"); }) == ErrorKind::Io);
}

TEST_CASE("IDX round trip is bit-identical", "[datasets][property]") {
  TempDir dir;
  const LabeledImages digits = synthetic_digits(2, 11);
  write_idx_images(dir.path / "a-img", digits.images);
  write_idx_labels(dir.path / "a-lbl", digits.labels);
  const LabeledImages back = load_idx(dir.path / "a-img", dir.path / "a-lbl");
  REQUIRE(back.images.size() == digits.images.size());
  for (std::size_t i = 0; i < back.images.size(); ++i) CHECK(back.images[i] == digits.images[i]);
  CHECK(back.labels == digits.labels);
  write_idx_images(dir.path / "b-img", back.images);
  CHECK(read_all(dir.path / "a-img") == read_all(dir.path / "b-img"));
}

TEST_CASE("synthetic digit corpus", "[datasets]") {
  const LabeledImages a = synthetic_digits(3, 42), b = synthetic_digits(3, 42);
  REQUIRE(a.images.size() == 30);
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    CHECK(a.images[i] == b.images[i]);
    CHECK(a.images[i].rows() == kDigitSide);
    CHECK(a.images[i].minCoeff() >= 0.0);
    CHECK(a.images[i].maxCoeff() <= 1.0);
    CHECK(a.images[i].maxCoeff() > 0.5);
  }
  const auto by = group_by_class(a, 3);
  CHECK(by.size() == 10);
  CHECK(error_kind([&] { group_by_class(a, 4); }) == ErrorKind::Size);
}

TEST_CASE("MNIST lookup falls back when files are absent", "[datasets]") {
  TempDir dir;
  CHECK_FALSE(try_load_mnist(dir.path).has_value());
}
