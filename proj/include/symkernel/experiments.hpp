#pragma once

// Experiment drivers: circular-dataset sweeps, rotated-digit pair scatters,
// multi-seed and multi-class procedures, convolutional equivariance checks and
// the D4 x C2 sweep.

#include "symkernel/datasets.hpp"
#include "symkernel/groups.hpp"
#include "symkernel/kernels.hpp"
#include "symkernel/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace symkernel {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct SweepRow {
  double x;  // delta, N or separation
  double spectral;
  double exact;
  double lambda_n_inv;
  double mean_inv_lambda;
  bool diverged;
  double jitter;
};

namespace detail {

inline SweepRow circular_row(const KernelSpec& kernel, int n, double delta, double x) {
  const PairedOrbitDataset ds = circular_dataset(n, delta);
  const Matrix k = gram(ds.points, kernel).values;
  const SpectralResult s = spectral_error(k);
  const GpPrediction gp = [&] {
    std::vector<int> train(ds.points.size() - 1);
    std::iota(train.begin(), train.end(), 1);
    return gp_regress(k, ds.labels, train, {0});
  }();
  return {x, s.epsilon, (ds.labels(0) - gp.predictions(0)) / ds.labels(0), s.numerator, s.denominator, s.diverged,
          gp.jitter};
}

inline void require_circular_kernel(const KernelSpec& kernel) {
  require(!std::holds_alternative<ConvSpec>(kernel), ErrorKind::InvalidArgument,
          "circular-dataset sweeps need an RBF or MLP kernel");
}

}  // namespace detail

inline std::vector<SweepRow> sweep_delta(const KernelSpec& kernel, int n_points, const std::vector<double>& deltas) {
  detail::require_circular_kernel(kernel);
  std::vector<SweepRow> rows;
  for (double d : deltas) rows.push_back(detail::circular_row(kernel, n_points, d, d));
  return rows;
}

inline std::vector<SweepRow> sweep_n(const KernelSpec& kernel, double delta, const std::vector<int>& ns) {
  detail::require_circular_kernel(kernel);
  std::vector<SweepRow> rows;
  for (int n : ns) rows.push_back(detail::circular_row(kernel, n, delta, n));
  return rows;
}

// ---------------------------------------------------------------- orbit pairs

/// First row of circularize(K) for the interleaved ordering of two orbits,
/// computed from the blocks K_aa, K_bb and K_ab without forming K.
inline Vector interleaved_circulant_row(const Matrix& kaa, const Matrix& kbb, const Matrix& kab) {
  const Eigen::Index n = kaa.rows();
  require(kaa.cols() == n && kbb.rows() == n && kbb.cols() == n && kab.rows() == n && kab.cols() == n,
          ErrorKind::Dimension, "interleaved_circulant_row: blocks must be n x n");
  Vector row(2 * n);
  for (Eigen::Index e = 0; e < n; ++e) {
    double self = 0.0, fwd = 0.0, back = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      self += kaa(k, (k + e) % n) + kbb(k, (k + e) % n);
      fwd += kab(k, (k + e) % n);
      back += kab((k + e + 1) % n, k);
    }
    row(2 * e) = self / (2.0 * n);
    row(2 * e + 1) = (fwd + back) / (2.0 * n);
  }
  return row;
}

struct PairTrialResult {
  double spectral_epsilon;  // NaN when the two classes collapse (zero Nyquist eigenvalue)
  double exact_epsilon;     // symmetrized
  int classification_errors;
  double prediction_a;
  double prediction_b;
  double lambda_n;
  double mean_inv_lambda;
  bool diverged;
  bool degenerate;
  OrbitGeometry geometry;
  KernelSpec kernel;
  int seed_a;
  int seed_b;
};

struct DigitPair {
  Matrix a;
  Matrix b;
  int id_a = 0;
  int id_b = 0;
};

inline PairTrialResult pair_trial(const KernelSpec& kernel, const DigitPair& pair, int n_rot) {
  require(n_rot >= 2, ErrorKind::InvalidArgument, "pair_scatter: n_rot must be >= 2", n_rot);
  const PairedOrbitDataset ds = interleave(rotation_orbit(pair.a, n_rot), rotation_orbit(pair.b, n_rot));
  const Matrix k = gram(ds.points, kernel).values;
  const SymmetrizedError exact = symmetrized_error_detailed(k, ds.labels);
  PairTrialResult r{kNaN,  exact.error, exact.classification_errors, exact.prediction_a, exact.prediction_b,
                    kNaN,  kNaN,        false,                       false,              orbit_geometry(ds),
                    kernel, pair.id_a,  pair.id_b};
  const Spectrum spec = circulant_spectrum(circularize(k).row(0).transpose());
  r.lambda_n = spec.eigenvalues()(n_rot);
  try {
    const SpectralResult s = spectral_error(spec);
    r.spectral_epsilon = s.epsilon;
    r.mean_inv_lambda = s.denominator;
    r.diverged = s.diverged;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateNyquist) throw;
    r.degenerate = true;
  }
  return r;
}

inline std::vector<PairTrialResult> pair_scatter(const KernelSpec& kernel, const std::vector<DigitPair>& pairs,
                                                 int n_rot) {
  std::vector<PairTrialResult> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(pair_trial(kernel, p, n_rot));
  return out;
}

/// `count` cross-class pairs drawn deterministically from images grouped by
/// class. Pair ids index into the flattened (class-major) image list.
inline std::vector<DigitPair> random_digit_pairs(const std::vector<std::vector<Matrix>>& by_class, int count,
                                                 std::uint64_t rng_seed) {
  require(by_class.size() >= 2, ErrorKind::InvalidArgument, "random_digit_pairs: need at least two classes");
  std::mt19937_64 rng(rng_seed);
  const auto classes = static_cast<int>(by_class.size());
  std::vector<DigitPair> pairs;
  for (int t = 0; t < count; ++t) {
    const int ca = std::uniform_int_distribution<int>(0, classes - 1)(rng);
    int cb = std::uniform_int_distribution<int>(0, classes - 2)(rng);
    if (cb >= ca) ++cb;
    const int ia = std::uniform_int_distribution<int>(0, static_cast<int>(by_class[ca].size()) - 1)(rng);
    const int ib = std::uniform_int_distribution<int>(0, static_cast<int>(by_class[cb].size()) - 1)(rng);
    const auto id = [&](int c, int i) {
      int base = 0;
      for (int k = 0; k < c; ++k) base += static_cast<int>(by_class[k].size());
      return base + i;
    };
    pairs.push_back({by_class[ca][ia], by_class[cb][ib], id(ca, ia), id(cb, ib)});
  }
  return pairs;
}

// ---------------------------------------------------------------- multi-seed

/// Per-orbit data reused across the many pairs of a multi-seed run.
struct OrbitBank {
  std::vector<std::vector<Vector>> orbits;
  std::vector<Matrix> self_grams;
};

inline OrbitBank make_orbit_bank(const KernelSpec& kernel, const std::vector<Matrix>& seeds, int n_rot) {
  OrbitBank bank;
  for (const auto& s : seeds) {
    bank.orbits.push_back(rotation_orbit(s, n_rot).points);
    bank.self_grams.push_back(kernel_matrix(bank.orbits.back(), bank.orbits.back(), kernel));
  }
  return bank;
}

namespace detail {

inline double row_epsilon(const Vector& row) {
  try {
    return spectral_error(circulant_spectrum(row)).epsilon;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateNyquist) throw;
    return kNaN;
  }
}

}  // namespace detail

/// Spectral errors of the circularized pair for both interleavings: first
/// with orbit i of `a` leading, then with orbit j of `b` leading. NaN marks a
/// collapsed pair.
inline std::pair<double, double> bank_pair_epsilon(const KernelSpec& kernel, const OrbitBank& a, std::size_t i,
                                                   const OrbitBank& b, std::size_t j) {
  const Matrix kab = kernel_matrix(a.orbits[i], b.orbits[j], kernel);
  return {detail::row_epsilon(interleaved_circulant_row(a.self_grams[i], b.self_grams[j], kab)),
          detail::row_epsilon(interleaved_circulant_row(b.self_grams[j], a.self_grams[i], kab.transpose()))};
}

struct MultiSeedResult {
  double avg_spectral;
  double exact;
  double correct_fraction;  // left-out points whose exact prediction has the label's sign
};

inline MultiSeedResult multi_seed_error(const KernelSpec& kernel, const std::vector<Matrix>& class_a,
                                        const std::vector<Matrix>& class_b, int n_rot) {
  require(!class_a.empty() && !class_b.empty(), ErrorKind::InvalidArgument, "multi_seed_error: need >= 1 seed per class");
  require(n_rot >= 2, ErrorKind::InvalidArgument, "multi_seed_error: n_rot must be >= 2", n_rot);
  const OrbitBank ba = make_orbit_bank(kernel, class_a, n_rot);
  const OrbitBank bb = make_orbit_bank(kernel, class_b, n_rot);

  double total = 0.0;
  int counted = 0;
  for (std::size_t i = 0; i < class_a.size(); ++i)
    for (std::size_t j = 0; j < class_b.size(); ++j) {
      const auto [ea, eb] = bank_pair_epsilon(kernel, ba, i, bb, j);
      total += ea + eb;
      counted += 2;
    }
  const double avg = total / counted;

  // Full dataset: every orbit of both classes, orbit-major.
  std::vector<Vector> points;
  std::vector<double> labels;
  for (const auto& o : ba.orbits)
    for (const auto& p : o) points.push_back(p), labels.push_back(1.0);
  for (const auto& o : bb.orbits)
    for (const auto& p : o) points.push_back(p), labels.push_back(-1.0);
  const Matrix k = gram(points, kernel).values;
  const Vector y = Eigen::Map<const Vector>(labels.data(), static_cast<Eigen::Index>(labels.size()));

  // Angle 0 removed from every orbit of one class, then the other.
  double err = 0.0;
  int correct = 0, tested = 0;
  for (int cls = 0; cls < 2; ++cls) {
    const std::size_t first = cls == 0 ? 0 : class_a.size();
    const std::size_t count = cls == 0 ? class_a.size() : class_b.size();
    std::vector<int> test, train;
    for (std::size_t o = first; o < first + count; ++o) test.push_back(static_cast<int>(o * n_rot));
    for (int idx = 0; idx < k.rows(); ++idx)
      if (idx % n_rot != 0 || static_cast<std::size_t>(idx / n_rot) < first ||
          static_cast<std::size_t>(idx / n_rot) >= first + count)
        train.push_back(idx);
    const Vector pred = gp_regress(k, y, train, test).predictions;
    double class_err = 0.0;
    for (std::size_t t = 0; t < test.size(); ++t) {
      const double label = y(test[t]);
      class_err += std::abs(label - pred(static_cast<Eigen::Index>(t))) / std::abs(label);
      correct += pred(static_cast<Eigen::Index>(t)) * label > 0.0 ? 1 : 0;
      ++tested;
    }
    err += class_err / static_cast<double>(test.size());
  }
  return {avg, err / 2.0, static_cast<double>(correct) / tested};
}

// ---------------------------------------------------------------- multi-class

struct MultiClassRow {
  int n_rot;
  double accuracy;
  std::vector<double> per_class;
};

/// One-versus-many spectral accuracy. For each orbit of each class, the
/// spectral prediction 1 - eps is averaged over the seeds of every opposing
/// class; the orbit is correct iff each class-wise average is positive.
inline std::vector<MultiClassRow> multi_class_accuracy(const KernelSpec& kernel,
                                                       const std::vector<std::vector<Matrix>>& seeds_per_class,
                                                       const std::vector<int>& n_rot_grid) {
  const std::size_t classes = seeds_per_class.size();
  require(classes >= 2, ErrorKind::InvalidArgument, "multi_class_accuracy: need at least two classes");
  for (const auto& c : seeds_per_class)
    require(!c.empty(), ErrorKind::InvalidArgument, "multi_class_accuracy: every class needs a seed");
  std::vector<MultiClassRow> rows;
  for (int n_rot : n_rot_grid) {
    require(n_rot >= 2, ErrorKind::InvalidArgument, "multi_class_accuracy: n_rot must be >= 2", n_rot);
    std::vector<OrbitBank> banks;
    for (const auto& c : seeds_per_class) banks.push_back(make_orbit_bank(kernel, c, n_rot));
    // eps[ca][cb](i, j): pair (orbit i of ca, orbit j of cb) with the ca
    // orbit leading the interleaving.
    std::vector<std::vector<Matrix>> eps(classes, std::vector<Matrix>(classes));
    for (std::size_t ca = 0; ca < classes; ++ca)
      for (std::size_t cb = ca + 1; cb < classes; ++cb) {
        Matrix fwd(banks[ca].orbits.size(), banks[cb].orbits.size());
        Matrix rev(banks[cb].orbits.size(), banks[ca].orbits.size());
        for (std::size_t i = 0; i < banks[ca].orbits.size(); ++i)
          for (std::size_t j = 0; j < banks[cb].orbits.size(); ++j)
            std::tie(fwd(i, j), rev(j, i)) = bank_pair_epsilon(kernel, banks[ca], i, banks[cb], j);
        eps[ca][cb] = fwd;
        eps[cb][ca] = rev;
      }
    MultiClassRow row{n_rot, 0.0, {}};
    for (std::size_t ca = 0; ca < classes; ++ca) {
      int correct = 0;
      const auto orbits = static_cast<Eigen::Index>(banks[ca].orbits.size());
      for (Eigen::Index i = 0; i < orbits; ++i) {
        bool ok = true;
        for (std::size_t cb = 0; cb < classes && ok; ++cb) {
          if (cb == ca) continue;
          const double mean_pred = 1.0 - eps[ca][cb].row(i).mean();
          ok = mean_pred > 0.0;  // NaN (collapsed pair) and exact zero count as wrong
        }
        correct += ok ? 1 : 0;
      }
      row.per_class.push_back(static_cast<double>(correct) / static_cast<double>(orbits));
    }
    row.accuracy = std::accumulate(row.per_class.begin(), row.per_class.end(), 0.0) / static_cast<double>(classes);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------- equivariance

struct EquivarianceReport {
  int image_side;
  double fc_translation_circulance;
  double fc_rotation_circulance;
  double gap_translation_constancy;
  double gap_rotation_circulance;
  int gap_rotation_rank;
  double gap_rotation_spread;  // max - min entry over the two-pixel rotation orbit
  int fc_translation_single_pixel_rank;
  double gap_pair_spectral;
  bool gap_pair_diverged;
  double gap_pair_exact;
};

inline int numerical_rank(const Matrix& k, double rel_tol = 1e-10) {
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (k + k.transpose()), Eigen::EigenvaluesOnly).eigenvalues();
  const double cutoff = rel_tol * ev.cwiseAbs().maxCoeff();
  return static_cast<int>((ev.array().abs() > cutoff).count());
}

inline double constancy_deviation(const Matrix& k) { return k.maxCoeff() - k.minCoeff(); }

inline Matrix random_image(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix img(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) img(i, j) = u(rng);
  return img;
}

/// Conv-kernel symmetry properties on random n x n images with the given
/// filter and mode. Stride 1.
inline EquivarianceReport equivariance_checks(int n = 8, int filter_size = 3, KernelMode mode = KernelMode::Ntk,
                                              std::uint64_t rng_seed = 1) {
  require(n >= 3, ErrorKind::InvalidArgument, "equivariance_checks: image side must be >= 3", n);
  std::mt19937_64 rng(rng_seed);
  const ConvSpec fc{filter_size, 1, Readout::FullyConnected, 1.0, mode};
  const ConvSpec gap{filter_size, 1, Readout::GlobalAveragePool, 1.0, mode};
  const Matrix img_a = random_image(n, rng), img_b = random_image(n, rng);

  EquivarianceReport r{};
  r.image_side = n;
  const Orbit trans = translation_orbit(img_a);
  r.fc_translation_circulance = is_circulant(gram(trans.points, fc).values, 0.0).deviation;
  r.gap_translation_constancy = constancy_deviation(gram(trans.points, gap).values);
  const Orbit rot = cardinal_rotation_orbit(img_a);
  r.fc_rotation_circulance = is_circulant(gram(rot.points, fc).values, 0.0).deviation;

  // Both pixels fit inside one filter window; pixels further apart than the
  // filter give a constant GAP Gram over the rotation orbit.
  Matrix two_pixel = Matrix::Zero(n, n);
  two_pixel(1, 1) = 1.0;
  two_pixel(1, 2) = 0.5;
  const Matrix kr = gram(cardinal_rotation_orbit(two_pixel).points, gap).values;
  r.gap_rotation_circulance = is_circulant(kr, 0.0).deviation;
  r.gap_rotation_rank = numerical_rank(kr);
  r.gap_rotation_spread = constancy_deviation(kr);

  Matrix one_pixel = Matrix::Zero(n, n);
  one_pixel(n / 2, n / 2) = 1.0;
  r.fc_translation_single_pixel_rank = numerical_rank(gram(translation_orbit(one_pixel).points, fc).values);

  const PairedOrbitDataset pair = interleave(translation_orbit(img_a), translation_orbit(img_b));
  const Matrix kp = gram(pair.points, gap).values;
  const SpectralResult s = spectral_error(circularize(kp));
  r.gap_pair_spectral = s.epsilon;
  r.gap_pair_diverged = s.diverged;
  r.gap_pair_exact = leave_one_out_error(kp, pair.labels, 0);
  return r;
}

// ---------------------------------------------------------------- D4 x C2

/// Group-spectral error versus exact leave-identity-out regression on the D4 x C2
/// pixel orbit with an RBF kernel. Spectrum columns are NaN.
inline std::vector<SweepRow> nonabelian_sweep(const std::vector<double>& separations, std::uint64_t rng_seed,
                                              double length_scale = 1.0) {
  std::vector<SweepRow> rows;
  for (double sep : separations) {
    const LabeledOrbit ds = d4c2_dataset(sep, rng_seed);
    const FiniteGroup& g = ds.action.group;
    const Matrix k = gram(ds.points, RbfSpec{length_scale}).values;
    const int e = g.identity();
    const double theory = general_spectral_error(k.row(e).transpose(), ds.labels, g, irreps(g));
    std::vector<int> train;
    for (int i = 0; i < g.order(); ++i)
      if (i != e) train.push_back(i);
    const GpPrediction gp = gp_regress(k, ds.labels, train, {e});
    rows.push_back({sep, theory, (ds.labels(e) - gp.predictions(0)) / ds.labels(e), kNaN, kNaN, false, gp.jitter});
  }
  return rows;
}

// ---------------------------------------------------------------- statistics

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorKind::Size, "pearson: need two equal-length samples");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

/// Ranks starting at 1; ties share their average rank.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(ranks(x), ranks(y));
}

}  // namespace symkernel
