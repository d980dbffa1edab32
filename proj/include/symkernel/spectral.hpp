#pragma once

// Circulant Gram analysis and exact GP regression.
//
// Sign convention: for a left-out point with label mu and GP prediction mu0,
// the error is (mu - mu0) / mu. Zero means perfect recovery, one means the
// prior mean, and values above one mean the sign flipped.

#include "symkernel/core.hpp"
#include "symkernel/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace symkernel {

/// |lambda| below this fraction of max |lambda| counts as zero.
inline constexpr double kZeroEigenThreshold = 1e-10;
/// Diagonal jitter for gp_regress, relative to trace(K_train) / |train|.
inline constexpr double kGpJitter = 1e-10;

struct CirculanceCheck {
  bool circulant;
  double deviation;
};

inline CirculanceCheck is_circulant(const Matrix& k, double tol) {
  require(k.rows() == k.cols(), ErrorKind::Dimension, "is_circulant: matrix must be square");
  const Eigen::Index m = k.rows();
  double dev = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) dev = std::max(dev, std::abs(k(i, j) - k(0, ((j - i) % m + m) % m)));
  return {dev <= tol, dev};
}

/// Diagonal-wise average: projects onto circulant matrices.
inline Matrix circularize(const Matrix& k) {
  require(k.rows() == k.cols(), ErrorKind::Dimension, "circularize: matrix must be square");
  const Eigen::Index m = k.rows();
  require(m > 0 && m % 2 == 0, ErrorKind::Size, "circularize: size must be even, got " + std::to_string(m),
          static_cast<double>(m));
  Vector row = Vector::Zero(m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index d = 0; d < m; ++d) row(d) += k(i, (i + d) % m);
  row /= static_cast<double>(m);
  Matrix out(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) out(i, j) = row(((j - i) % m + m) % m);
  return out;
}

/// Unnormalized DFT of a circulant first row, lambda_j = sum_k c_k w^{jk}
/// with w = exp(-2 pi i / M).
struct Spectrum {
  CVector values;

  Eigen::Index size() const { return values.size(); }
  /// Real parts; exact for real symmetric rows.
  Vector eigenvalues() const { return values.real(); }
  double max_imag() const { return values.size() == 0 ? 0.0 : values.imag().cwiseAbs().maxCoeff(); }
};

inline CVector roots_of_unity(Eigen::Index m) {
  CVector w(m);
  for (Eigen::Index k = 0; k < m; ++k) w(k) = std::polar(1.0, -2.0 * kPi * static_cast<double>(k) / static_cast<double>(m));
  return w;
}

inline Spectrum circulant_spectrum(const Vector& first_row) {
  const Eigen::Index m = first_row.size();
  require(m >= 2, ErrorKind::Size, "circulant_spectrum: row length must be >= 2");
  const CVector w = roots_of_unity(m);
  CVector lambda(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    Complex acc = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) acc += first_row(k) * w((j * k) % m);
    lambda(j) = acc;
  }
  return {lambda};
}

struct SpectralResult {
  double epsilon;
  double numerator;    // 1 / lambda_N
  double denominator;  // mean of 1 / lambda_j over all frequencies
  bool diverged;
};

inline double zero_threshold(const Spectrum& s) {
  return kZeroEigenThreshold * s.values.cwiseAbs().maxCoeff();
}

inline SpectralResult spectral_error(const Spectrum& s) {
  const Eigen::Index m = s.size();
  require(m >= 2 && m % 2 == 0, ErrorKind::Size, "spectral_error: spectrum length must be even and >= 2");
  const Vector lambda = s.eigenvalues();
  const double zero = zero_threshold(s);
  const Eigen::Index nyq = m / 2;
  require(std::abs(lambda(nyq)) >= zero && lambda(nyq) != 0.0, ErrorKind::DegenerateNyquist,
          "Nyquist eigenvalue is zero: the two classes collapse in kernel space", lambda(nyq));
  const double numerator = 1.0 / lambda(nyq);
  bool diverged = false;
  double mean_inv = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (std::abs(lambda(j)) < zero) {
      diverged = true;
      continue;
    }
    mean_inv += 1.0 / lambda(j);
  }
  mean_inv /= static_cast<double>(m);
  if (diverged) return {0.0, numerator, std::numeric_limits<double>::infinity(), true};
  return {numerator / mean_inv, numerator, mean_inv, false};
}

inline SpectralResult spectral_error(const Matrix& circulant_gram) {
  return spectral_error(circulant_spectrum(circulant_gram.row(0).transpose()));
}

/// Predictions at several left-out points of an alternating-label (mu, -mu,
/// ...) dataset, from the spectrum alone. Entry m of the result is the
/// prediction at missing[m].
inline Vector multi_point_error(const Spectrum& s, const std::vector<int>& missing, double mu) {
  const Eigen::Index m = s.size();
  require(m >= 2 && m % 2 == 0, ErrorKind::Size, "multi_point_error: spectrum length must be even");
  require(!missing.empty(), ErrorKind::InvalidArgument, "multi_point_error: missing set is empty");
  for (std::size_t a = 0; a < missing.size(); ++a) {
    require(missing[a] >= 0 && missing[a] < m, ErrorKind::InvalidArgument, "multi_point_error: index out of range");
    for (std::size_t b = 0; b < a; ++b)
      require(missing[a] != missing[b], ErrorKind::InvalidArgument, "multi_point_error: duplicate index");
  }
  const double zero = zero_threshold(s);
  for (Eigen::Index l = 0; l < m; ++l)
    require(std::abs(s.values(l)) >= zero && s.values(l) != 0.0, ErrorKind::Underdetermined,
            "multi_point_error: zero eigenvalue, the inverse Gram is undefined");

  const CVector w = roots_of_unity(m);
  const auto inv_gram = [&](Eigen::Index j, Eigen::Index k) {
    const Eigen::Index d = ((j - k) % m + m) % m;
    Complex acc = 0.0;
    for (Eigen::Index l = 0; l < m; ++l) acc += w((l * d) % m) / s.values(l);
    return acc / static_cast<double>(m);
  };
  const auto p = static_cast<Eigen::Index>(missing.size());
  const Eigen::Index nyq = m / 2;
  CMatrix a(p, p);
  CVector b(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    Complex known = 0.0;
    for (Eigen::Index n = 0; n < p; ++n) {
      a(j, n) = inv_gram(missing[j], missing[n]);
      known += a(j, n) * w((missing[n] * nyq) % m);
    }
    b(j) = mu * (known - w((missing[j] * nyq) % m) / s.values(nyq));
  }
  Eigen::FullPivLU<CMatrix> lu(a);
  lu.setThreshold(1e-12);
  require(lu.isInvertible(), ErrorKind::Underdetermined, "multi_point_error: linear system is singular");
  return lu.solve(b).real();
}

struct GpPrediction {
  Vector predictions;  // one per test index, in test order
  double jitter;
};

/// Zero-mean GP posterior mean at `test`, conditioned on `train`.
inline GpPrediction gp_regress(const Matrix& k, const Vector& labels, const std::vector<int>& train,
                               const std::vector<int>& test) {
  const Eigen::Index m = k.rows();
  require(k.cols() == m, ErrorKind::Dimension, "gp_regress: gram must be square");
  require(labels.size() == m, ErrorKind::Dimension, "gp_regress: label count does not match gram");
  require(!train.empty(), ErrorKind::InvalidArgument, "gp_regress: empty training set");
  std::vector<int> seen(static_cast<std::size_t>(m), 0);
  for (int i : train) {
    require(i >= 0 && i < m, ErrorKind::InvalidArgument, "gp_regress: train index out of range");
    ++seen[static_cast<std::size_t>(i)];
  }
  for (int i : test) {
    require(i >= 0 && i < m, ErrorKind::InvalidArgument, "gp_regress: test index out of range");
    ++seen[static_cast<std::size_t>(i)];
  }
  require(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }), ErrorKind::InvalidArgument,
          "gp_regress: train and test must partition the index range");

  const auto nt = static_cast<Eigen::Index>(train.size());
  const auto ns = static_cast<Eigen::Index>(test.size());
  Matrix ktt(nt, nt), kst(ns, nt);
  Vector y(nt);
  for (Eigen::Index a = 0; a < nt; ++a) {
    y(a) = labels(train[a]);
    for (Eigen::Index b = 0; b < nt; ++b) ktt(a, b) = k(train[a], train[b]);
    for (Eigen::Index s = 0; s < ns; ++s) kst(s, a) = k(test[s], train[a]);
  }
  const double jitter = kGpJitter * std::abs(ktt.trace()) / static_cast<double>(nt);
  ktt.diagonal().array() += jitter;
  Eigen::LLT<Matrix> llt(ktt);
  if (llt.info() != Eigen::Success) {
    const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(ktt, Eigen::EigenvaluesOnly).eigenvalues();
    const double cond = std::abs(ev.maxCoeff()) / std::max(std::abs(ev.minCoeff()), 1e-300);
    throw Error(ErrorKind::IllConditioned, "gp_regress: training gram is not positive definite after jitter (cond ~ " +
                                               std::to_string(cond) + ")",
                cond);
  }
  return {kst * llt.solve(y), jitter};
}

inline GpPrediction gp_regress(const GramMatrix& g, const Vector& labels, const std::vector<int>& train,
                               const std::vector<int>& test) {
  return gp_regress(g.values, labels, train, test);
}

/// Prediction at `left_out` conditioned on every other point.
inline double leave_one_out_prediction(const Matrix& k, const Vector& labels, int left_out) {
  std::vector<int> train;
  for (int i = 0; i < k.rows(); ++i)
    if (i != left_out) train.push_back(i);
  return gp_regress(k, labels, train, {left_out}).predictions(0);
}

/// (mu - mu0) / mu for the point left out.
inline double leave_one_out_error(const Matrix& k, const Vector& labels, int left_out) {
  require(labels(left_out) != 0.0, ErrorKind::InvalidArgument, "leave_one_out_error: left-out label is zero");
  return (labels(left_out) - leave_one_out_prediction(k, labels, left_out)) / labels(left_out);
}

struct SymmetrizedError {
  double error;                // mean of the two relative absolute errors
  double prediction_a;         // prediction at index 0 with index 0 removed
  double prediction_b;         // prediction at index 1 with index 1 removed
  int classification_errors;   // removals where sign(prediction) != sign(label); 0 counts as wrong
};

inline SymmetrizedError symmetrized_error_detailed(const Matrix& k, const Vector& labels) {
  require(k.rows() >= 2, ErrorKind::Size, "symmetrized_error: need at least two points");
  SymmetrizedError out{};
  double total = 0.0;
  for (int idx = 0; idx < 2; ++idx) {
    const double y = labels(idx);
    require(y != 0.0, ErrorKind::InvalidArgument, "symmetrized_error: left-out label is zero");
    const double pred = leave_one_out_prediction(k, labels, idx);
    total += std::abs(y - pred) / std::abs(y);
    if (!(pred * y > 0.0)) ++out.classification_errors;
    (idx == 0 ? out.prediction_a : out.prediction_b) = pred;
  }
  out.error = total / 2.0;
  return out;
}

inline double symmetrized_error(const Matrix& k, const Vector& labels) {
  return symmetrized_error_detailed(k, labels).error;
}

inline double symmetrized_error(const GramMatrix& g, const Vector& labels) {
  return symmetrized_error(g.values, labels);
}

/// Alternating +1, -1, ... labels of length m.
inline Vector alternating_labels(Eigen::Index m) {
  Vector y(m);
  for (Eigen::Index i = 0; i < m; ++i) y(i) = (i % 2 == 0) ? 1.0 : -1.0;
  return y;
}

}  // namespace symkernel
