#pragma once

// Fast self-checks behind `symkernel-cli check`. Each suite returns the
// largest deviation it saw against its tolerance.

#include "symkernel/experiments.hpp"
#include "symkernel/groups.hpp"
#include "symkernel/spectral.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace symkernel {

struct CheckResult {
  std::string name;
  bool passed;
  double deviation;
  double tolerance;
  std::string detail;
};

namespace detail {

/// Real symmetric circulant row whose eigenvalues are drawn from [lo, hi].
inline Vector random_circulant_row(Eigen::Index m, std::mt19937_64& rng, double lo = 0.2, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector lambda(m);
  for (Eigen::Index j = 0; j <= m / 2; ++j) lambda(j) = lambda((m - j) % m) = u(rng);
  Vector row(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) acc += lambda(j) * std::cos(2.0 * kPi * static_cast<double>(j * k) / m);
    row(k) = acc / static_cast<double>(m);
  }
  return row;
}

inline Matrix circulant(const Vector& row) {
  const Eigen::Index m = row.size();
  Matrix k(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) k(i, j) = row(((j - i) % m + m) % m);
  return k;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

inline CheckResult finish(std::string name, double deviation, double tolerance, std::string detail = {}) {
  return {std::move(name), deviation <= tolerance, deviation, tolerance, std::move(detail)};
}

}  // namespace detail

inline CheckResult check_spectral_exact(int instances = 200, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int t = 0; t < instances; ++t) {
    const Eigen::Index m = 2 * (2 + static_cast<Eigen::Index>(rng() % 31));
    const Vector row = detail::random_circulant_row(m, rng);
    const double eps = spectral_error(circulant_spectrum(row)).epsilon;
    worst = std::max(worst, detail::rel(eps, leave_one_out_error(detail::circulant(row), alternating_labels(m), 0)));
  }
  return detail::finish("spectral-vs-exact", worst, 1e-8, std::to_string(instances) + " circulants");
}

inline CheckResult check_multi_point(int instances = 100, std::uint64_t seed = 2) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int t = 0; t < instances; ++t) {
    const Eigen::Index m = 2 * (2 + t % 16);
    const Spectrum s = circulant_spectrum(detail::random_circulant_row(m, rng));
    worst = std::max(worst, std::abs(multi_point_error(s, {0}, 1.0)(0) - (1.0 - spectral_error(s).epsilon)));
  }
  return detail::finish("multi-point-reduction", worst, 1e-10);
}

inline CheckResult check_groups() {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  bool axioms = true;
  const FiniteGroup d4 = dihedral_group_4();
  for (const FiniteGroup& g : {cyclic_group(8), d4, direct_product(d4, cyclic_group(2))}) {
    axioms = axioms && g.satisfies_axioms();
    const auto reps = irreps(g);
    worst = std::max(worst, schur_orthogonality_deviation(reps, g.order()));
    Vector f(g.order());
    for (int i = 0; i < g.order(); ++i) f(i) = normal(rng);
    const GftCoefficients c = gft_forward(f, reps);
    worst = std::max(worst, (gft_inverse(c, reps).real() - f).cwiseAbs().maxCoeff());
    worst = std::max(worst, std::abs(c.frobenius_energy() - f.squaredNorm()) / f.squaredNorm());
    // G-stationary Gram from a random positive function on the group.
    Matrix base(g.order(), g.order());
    for (int a = 0; a < g.order(); ++a)
      for (int b = 0; b < g.order(); ++b) base(a, b) = f(g.mul(g.inv(a), b));
    const Matrix gram = base * base.transpose() + Matrix::Identity(g.order(), g.order());
    worst = std::max(worst, block_diagonalize(gram, g, reps).reconstruction_error);
  }
  if (!axioms) return {"groups-gft", false, worst, 1e-8, "group axioms violated"};
  return detail::finish("groups-gft", worst, 1e-8, "C8, D4, D4xC2");
}

inline CheckResult check_cyclic_consistency(std::uint64_t seed = 4) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int m : {4, 8, 16})
    for (int t = 0; t < 10; ++t) {
      const Vector row = detail::random_circulant_row(m, rng);
      const FiniteGroup g = cyclic_group(m);
      const double general = general_spectral_error(row, alternating_labels(m), g, irreps(g));
      worst = std::max(worst, detail::rel(general, spectral_error(circulant_spectrum(row)).epsilon));
    }
  return detail::finish("cyclic-consistency", worst, 1e-8);
}

inline CheckResult check_equivariance() {
  const EquivarianceReport r = equivariance_checks();
  const double worst = std::max({r.fc_translation_circulance, r.fc_rotation_circulance, r.gap_translation_constancy,
                                 std::abs(r.gap_pair_exact), std::abs(r.gap_pair_spectral)});
  const bool shape = r.gap_pair_diverged && r.gap_rotation_rank == 4 && r.gap_rotation_spread > 1e-6;
  if (!shape) return {"conv-equivariance", false, worst, 1e-8, "GAP rotation/pair structure not as expected"};
  return detail::finish("conv-equivariance", worst, 1e-6);
}

inline CheckResult check_nonabelian() {
  std::vector<double> seps;
  for (int i = 0; i < 20; ++i) seps.push_back(0.2 * i);
  double worst = 0.0;
  for (const auto& row : nonabelian_sweep(seps, 7)) worst = std::max(worst, detail::rel(row.spectral, row.exact));
  return detail::finish("nonabelian-d4xc2", worst, 1e-6);
}

inline std::vector<CheckResult> run_checks() {
  std::vector<CheckResult> out;
  const std::vector<std::function<CheckResult()>> suites{
      [] { return check_spectral_exact(); }, [] { return check_multi_point(); }, check_groups,
      [] { return check_cyclic_consistency(); }, check_equivariance, check_nonabelian};
  for (const auto& suite : suites) {
    try {
      out.push_back(suite());
    } catch (const std::exception& e) {
      out.push_back({"suite", false, kNaN, kNaN, e.what()});
    }
  }
  return out;
}

}  // namespace symkernel
