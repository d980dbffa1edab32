#pragma once

// Reference computations used only by the tests. They avoid the library's
// solver paths: dense inverses without jitter, explicit DFT sums, and a
// closed-form leave-one-out identity.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Real symmetric circulant first row whose spectrum is drawn uniformly from
/// [lo, hi] (symmetric under j -> m - j so the row is real).
inline VectorXd random_pd_circulant_row(int m, std::mt19937_64& rng, double lo = 0.2, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  VectorXd lambda(m);
  for (int j = 0; j <= m / 2; ++j) {
    lambda(j) = u(rng);
    lambda((m - j) % m) = lambda(j);
  }
  VectorXd row(m);
  for (int k = 0; k < m; ++k) {
    double acc = 0.0;
    for (int j = 0; j < m; ++j) acc += lambda(j) * std::cos(2.0 * std::numbers::pi * j * k / m);
    row(k) = acc / m;
  }
  return row;
}

inline MatrixXd circulant_from_row(const VectorXd& row) {
  const auto m = row.size();
  MatrixXd k(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) k(i, j) = row(((j - i) % m + m) % m);
  return k;
}

/// Leave-one-out mean from the full inverse: y_i - [K^-1 y]_i / [K^-1]_ii.
inline double loo_prediction(const MatrixXd& k, const VectorXd& y, int i) {
  const MatrixXd kinv = k.fullPivLu().inverse();
  const VectorXd alpha = kinv * y;
  return y(i) - alpha(i) / kinv(i, i);
}

/// Posterior mean at `test` from an explicit inverse of K[train, train].
inline VectorXd conditional_mean(const MatrixXd& k, const VectorXd& y, const std::vector<int>& train,
                                 const std::vector<int>& test) {
  const auto nt = static_cast<Eigen::Index>(train.size());
  MatrixXd ktt(nt, nt), kst(static_cast<Eigen::Index>(test.size()), nt);
  VectorXd yt(nt);
  for (Eigen::Index a = 0; a < nt; ++a) {
    yt(a) = y(train[a]);
    for (Eigen::Index b = 0; b < nt; ++b) ktt(a, b) = k(train[a], train[b]);
    for (std::size_t s = 0; s < test.size(); ++s) kst(static_cast<Eigen::Index>(s), a) = k(test[s], train[a]);
  }
  return kst * ktt.fullPivLu().inverse() * yt;
}

/// Random symmetric positive-definite matrix with eigenvalues in [lo, hi].
inline MatrixXd random_spd(int m, std::mt19937_64& rng, double lo = 0.5, double hi = 2.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd a(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) a(i, j) = n(rng);
  const MatrixXd q = a.householderQr().householderQ();
  std::uniform_real_distribution<double> u(lo, hi);
  VectorXd d(m);
  for (int i = 0; i < m; ++i) d(i) = u(rng);
  return q * d.asDiagonal() * q.transpose();
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace oracle
