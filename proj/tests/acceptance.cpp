// Acceptance run: one PASS/FAIL line per criterion. Tolerances, grids, seeds
// and time budgets are fixed below and must not be loosened to make a line
// pass.

#include "symkernel/experiments.hpp"
#include "symkernel/groups.hpp"
#include "support/mc_oracle.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace symkernel;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::vector<int> all_but(int m, const std::vector<int>& drop) {
  std::vector<int> keep;
  for (int i = 0; i < m; ++i)
    if (std::find(drop.begin(), drop.end(), i) == drop.end()) keep.push_back(i);
  return keep;
}

// ---------------------------------------------------------------- 1

Outcome spectral_exact_equivalence() {
  constexpr int kInstances = 1200;
  constexpr double kRelTol = 1e-8;
  std::mt19937_64 rng(20240601);
  double worst = 0.0;
  for (int t = 0; t < kInstances; ++t) {
    const int m = 2 * (2 + t % 31);  // 2N = 4, 6, ..., 64
    const Vector row = oracle::random_pd_circulant_row(m, rng);
    const Matrix k = oracle::circulant_from_row(row);
    const Vector y = alternating_labels(m);
    const double spectral = spectral_error(circulant_spectrum(row)).epsilon;
    const double pred = gp_regress(k, y, all_but(m, {0}), {0}).predictions(0);
    worst = std::max(worst, oracle::rel_diff(spectral, (y(0) - pred) / y(0)));
  }
  return {worst <= kRelTol, std::to_string(kInstances) + " circulants, worst rel diff " + num(worst)};
}

// ---------------------------------------------------------------- 2

// "Coincide to 1e-6" is checked as |spectral - exact| <= 1e-6 * max(1, |eps|):
// relative where the error exceeds 1, absolute below (the delta sweep starts
// near eps = 10, the N sweep ends near 1e-11). Rows whose error is at least
// 1e-3 must additionally agree to 1e-6 relative. Below that the exact path is
// limited by the regression jitter and the Gram conditioning (smallest
// eigenvalues reach 1e-8 of the largest), not by the formula.
constexpr double kCurveMixedTol = 1e-6;
constexpr double kCurveRelTol = 1e-6;
constexpr double kRelativeFloor = 1e-3;
constexpr double kMonotoneSlack = 1e-12;

bool curves_agree(const std::vector<SweepRow>& rows, double& worst_abs, double& worst_rel) {
  bool ok = true;
  for (const auto& r : rows) {
    const double diff = std::abs(r.spectral - r.exact);
    const double scale = std::max(std::abs(r.spectral), std::abs(r.exact));
    worst_abs = std::max(worst_abs, diff / std::max(1.0, scale));
    ok = ok && diff <= kCurveMixedTol * std::max(1.0, scale);
    if (scale >= kRelativeFloor) {
      worst_rel = std::max(worst_rel, diff / scale);
      ok = ok && diff <= kCurveRelTol * scale;
    }
  }
  return ok;
}

bool non_increasing(const std::vector<SweepRow>& rows) {
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].spectral > rows[i - 1].spectral + kMonotoneSlack || rows[i].exact > rows[i - 1].exact + kMonotoneSlack)
      return false;
  return true;
}

Outcome circular_sweeps() {
  std::vector<double> deltas;
  for (int i = 0; i <= 20; ++i) deltas.push_back(0.25 * i);
  const auto dr = sweep_delta(RbfSpec{1.0}, 8, deltas);
  std::vector<int> ns;
  for (int n = 4; n <= 64; ++n) ns.push_back(n);
  const auto nr = sweep_n(RbfSpec{1.0}, 1.0, ns);
  double abs_d = 0.0, rel_d = 0.0, abs_n = 0.0, rel_n = 0.0;
  const bool agree_d = curves_agree(dr, abs_d, rel_d), agree_n = curves_agree(nr, abs_n, rel_n);
  const bool mono_d = non_increasing(dr), mono_n = non_increasing(nr);
  std::ostringstream s;
  s << "delta sweep: agree=" << agree_d << " (mixed " << num(abs_d) << ", rel " << num(rel_d) << ") monotone=" << mono_d
    << " eps(0)=" << num(dr.front().spectral) << " eps(5)=" << num(dr.back().spectral)
    << "; N sweep (delta=1): agree=" << agree_n << " (mixed " << num(abs_n) << ", rel " << num(rel_n)
    << ") monotone=" << mono_n << " eps(4)=" << num(nr.front().spectral) << " eps(64)=" << num(nr.back().spectral);
  return {agree_d && agree_n && mono_d && mono_n, s.str()};
}

// ---------------------------------------------------------------- 3

Outcome multi_point_reduction() {
  std::mt19937_64 rng(31);
  double worst_single = 0.0, worst_multi = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int m = 2 * (2 + t % 31);
    const Spectrum s = circulant_spectrum(oracle::random_pd_circulant_row(m, rng));
    worst_single = std::max(worst_single, std::abs(multi_point_error(s, {0}, 1.0)(0) - (1.0 - spectral_error(s).epsilon)));
  }
  for (int t = 0; t < 100; ++t) {
    const int m = 2 * (3 + t % 30);
    const Vector row = oracle::random_pd_circulant_row(m, rng);
    std::vector<int> missing;
    while (static_cast<int>(missing.size()) < 2 + t % 3) {
      const int i = static_cast<int>(rng() % static_cast<unsigned>(m));
      if (std::find(missing.begin(), missing.end(), i) == missing.end()) missing.push_back(i);
    }
    const Vector got = multi_point_error(circulant_spectrum(row), missing, 1.0);
    const Vector want =
        gp_regress(oracle::circulant_from_row(row), alternating_labels(m), all_but(m, missing), missing).predictions;
    worst_multi = std::max(worst_multi, (got - want).cwiseAbs().maxCoeff());
  }
  return {worst_single <= 1e-10 && worst_multi <= 1e-6,
          "single-point worst " + num(worst_single) + " (tol 1e-10), 2-4 points worst " + num(worst_multi) +
              " (tol 1e-6)"};
}

// ---------------------------------------------------------------- 4

Outcome nonabelian() {
  std::vector<double> seps;
  for (int i = 0; i < 20; ++i) seps.push_back(0.2 * i);
  const auto rows = nonabelian_sweep(seps, 7);
  double worst = 0.0, max_jitter = 0.0;
  for (const auto& r : rows) {
    worst = std::max(worst, oracle::rel_diff(r.spectral, r.exact));
    max_jitter = std::max(max_jitter, r.jitter);
  }
  const bool mono = non_increasing(rows);
  return {worst <= 1e-6 && mono, "20 separations, worst rel diff " + num(worst) + ", monotone=" + std::to_string(mono) +
                                     ", max jitter " + num(max_jitter)};
}

// ---------------------------------------------------------------- 5

Outcome cyclic_consistency() {
  std::mt19937_64 rng(55);
  double worst = 0.0;
  for (int m : {4, 8, 16}) {
    const FiniteGroup g = cyclic_group(m);
    const auto reps = irreps(g);
    for (int t = 0; t < 100; ++t) {
      const Vector row = oracle::random_pd_circulant_row(m, rng);
      const double general = general_spectral_error(row, alternating_labels(m), g, reps);
      worst = std::max(worst, oracle::rel_diff(general, spectral_error(circulant_spectrum(row)).epsilon));
    }
  }
  return {worst <= 1e-8, "300 rows on C4, C8, C16, worst rel diff " + num(worst)};
}

// ---------------------------------------------------------------- 6

Outcome equivariance() {
  bool ok = true;
  std::ostringstream s;
  for (KernelMode mode : {KernelMode::Nngp, KernelMode::Ntk}) {
    const EquivarianceReport r = equivariance_checks(8, 3, mode, 1);
    const bool pass = r.fc_translation_circulance < 1e-8 && r.fc_rotation_circulance < 1e-8 &&
                      r.gap_translation_constancy < 1e-8 && r.gap_pair_diverged && r.gap_pair_spectral == 0.0 &&
                      std::abs(r.gap_pair_exact) < 1e-6 && r.gap_rotation_spread > 1e-6 && r.gap_rotation_rank == 4;
    ok = ok && pass;
    s << to_string(mode) << ": fc-trans " << num(r.fc_translation_circulance) << ", fc-rot "
      << num(r.fc_rotation_circulance) << ", gap-const " << num(r.gap_translation_constancy) << ", gap-pair eps "
      << num(r.gap_pair_spectral) << " exact " << num(r.gap_pair_exact) << ", gap-rot spread "
      << num(r.gap_rotation_spread) << " rank " << r.gap_rotation_rank << "; ";
  }
  return {ok, s.str()};
}

// ---------------------------------------------------------------- 7

Outcome kernel_oracle() {
  constexpr int kMlpWidth = 1 << 16;
  constexpr int kConvChannels = 1 << 14;
  constexpr int kDraws = 64;
  constexpr double kMaxZ = 3.0;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto random_pairs = [&](Eigen::Index dim) {
    std::vector<std::pair<Vector, Vector>> out;
    for (int t = 0; t < 3; ++t) {
      Vector x(dim), y(dim);
      for (Eigen::Index i = 0; i < dim; ++i) x(i) = normal(rng);
      for (Eigen::Index i = 0; i < dim; ++i) y(i) = normal(rng) + (t - 1) * 0.8 * x(i);
      out.emplace_back(x, y);
    }
    return out;
  };

  double worst = 0.0;
  int checked = 0, failed = 0;
  std::uint64_t seed = 1000;
  std::ostringstream fails;
  const auto record = [&](const std::string& label, double closed, const oracle::McEstimate& mc) {
    const double z = std::abs(mc.mean - closed) / mc.std_error;
    worst = std::max(worst, z);
    ++checked;
    if (z >= kMaxZ) {
      ++failed;
      fails << " [" << label << " closed " << num(closed) << " mc " << num(mc.mean) << " se " << num(mc.std_error)
            << "]";
    }
  };

  const auto mlp_inputs = random_pairs(6);
  for (int layers : {1, 2, 3})
    for (bool ntk : {false, true}) {
      const MlpSpec spec{layers, 1.2, 0.3, ntk ? KernelMode::Ntk : KernelMode::Nngp};
      for (const auto& [x, y] : mlp_inputs)
        record("mlp L=" + std::to_string(layers) + (ntk ? " ntk" : " nngp"), mlp_kernel(x, y, spec),
               oracle::mlp_monte_carlo(x, y, {layers, 1.2, 0.3, ntk}, kMlpWidth, kDraws, seed++));
    }
  const int side = 6;
  const auto conv_inputs = random_pairs(side * side);
  for (bool gap : {false, true})
    for (bool ntk : {false, true}) {
      const ConvSpec spec{3, 1, gap ? Readout::GlobalAveragePool : Readout::FullyConnected, 1.1,
                          ntk ? KernelMode::Ntk : KernelMode::Nngp};
      for (const auto& [x, y] : conv_inputs)
        record(std::string("conv ") + (gap ? "gap" : "fc") + (ntk ? " ntk" : " nngp"), conv_kernel(x, y, spec),
               oracle::conv_monte_carlo(x, y, side, {3, 1, gap, 1.1, ntk}, kConvChannels, kDraws, seed++));
    }
  return {failed == 0, std::to_string(checked) + " kernel values, worst |z| " + num(worst) + fails.str()};
}

// ---------------------------------------------------------------- 8 and 9

std::vector<std::vector<Matrix>> digit_corpus(int per_class, std::uint64_t seed, std::string& source) {
  if (auto mnist = try_load_mnist()) {
    source = "IDX files";
    return group_by_class(*mnist, per_class);
  }
  source = "synthetic corpus";
  return group_by_class(synthetic_digits(per_class, seed), per_class);
}

Outcome pair_scatter_correlations() {
  constexpr int kPairs = 200;
  std::string source;
  const auto by_class = digit_corpus(13, 42, source);
  const auto results = pair_scatter(MlpSpec{1, 1.0, 1.0, KernelMode::Ntk}, random_digit_pairs(by_class, kPairs, 42), 8);
  std::vector<double> sp, ex, ln, d2, mi, ir;
  int skipped = 0;
  for (const auto& r : results) {
    if (r.degenerate || r.diverged) {
      ++skipped;
      continue;
    }
    sp.push_back(r.spectral_epsilon);
    ex.push_back(r.exact_epsilon);
    ln.push_back(r.lambda_n);
    d2.push_back(r.geometry.delta_sq);
    mi.push_back(r.mean_inv_lambda);
    ir.push_back(r.geometry.inverse_radius);
  }
  const double c1 = pearson(sp, ex), c2 = pearson(ln, d2), c3 = pearson(mi, ir);
  return {static_cast<int>(sp.size()) >= kPairs && c1 > 0.9 && c2 > 0.8 && c3 > 0.8,
          source + ", " + std::to_string(sp.size()) + " pairs (" + std::to_string(skipped) +
              " degenerate), r(spectral, exact) " + num(c1) + ", r(lambda_N, delta^2) " + num(c2) +
              ", r(<1/lambda>, 1/rho) " + num(c3)};
}

Outcome multi_class_trend() {
  std::string source;
  const auto by_class = digit_corpus(13, 1, source);
  const auto rows = multi_class_accuracy(MlpSpec{1, 1.0, 1.0, KernelMode::Ntk}, by_class, {4, 8, 16, 32, 64});
  bool mono = true;
  std::ostringstream s;
  s << source << ", accuracy by n_rot:";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    s << " " << rows[i].n_rot << "=" << num(rows[i].accuracy);
    if (i > 0 && rows[i].accuracy < rows[i - 1].accuracy - 0.02) mono = false;
  }
  return {mono && rows.back().accuracy == 1.0, s.str()};
}

// ---------------------------------------------------------------- 10

Outcome group_suite() {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> normal(0.0, 1.0);
  bool axioms = true;
  double schur = 0.0, gft = 0.0, block = 0.0;
  const FiniteGroup d4 = dihedral_group_4();
  std::vector<FiniteGroup> groups{d4, direct_product(d4, cyclic_group(2))};
  for (int n : {1, 2, 3, 4, 5, 8, 12, 16}) groups.push_back(cyclic_group(n));
  for (const auto& g : groups) {
    axioms = axioms && g.satisfies_axioms();
    const auto reps = irreps(g);
    schur = std::max(schur, schur_orthogonality_deviation(reps, g.order()));
    for (int t = 0; t < 5; ++t) {
      Vector f(g.order());
      for (int i = 0; i < g.order(); ++i) f(i) = normal(rng);
      const GftCoefficients c = gft_forward(f, reps);
      gft = std::max(gft, (gft_inverse(c, reps).real() - f).cwiseAbs().maxCoeff());
      gft = std::max(gft, oracle::rel_diff(c.frobenius_energy(), f.squaredNorm()));
      Matrix base(g.order(), g.order());
      for (int a = 0; a < g.order(); ++a)
        for (int b = 0; b < g.order(); ++b) base(a, b) = f(g.mul(g.inv(a), b));
      const Matrix gram = base * base.transpose() + 0.3 * Matrix::Identity(g.order(), g.order());
      block = std::max(block, block_diagonalize(gram, g, reps).reconstruction_error);
    }
  }
  return {axioms && schur <= 1e-9 && gft <= 1e-8 && block <= 1e-8,
          "C1..C16, D4, D4xC2: axioms=" + std::to_string(axioms) + ", schur " + num(schur) + ", gft " + num(gft) +
              ", block " + num(block)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "spectral-exact equivalence on random circulants", 30, spectral_exact_equivalence},
      {2, "circular-orbit sweeps in delta and N", 10, circular_sweeps},
      {3, "multi-point reduction", 1e9, multi_point_reduction},
      {4, "D4 x C2 group-spectral error vs regression", 10, nonabelian},
      {5, "cyclic consistency of the group formula", 1e9, cyclic_consistency},
      {6, "conv kernel equivariance", 1e9, equivariance},
      {7, "closed-form kernels vs Monte Carlo", 300, kernel_oracle},
      {8, "rotated-digit pair correlations", 600, pair_scatter_correlations},
      {9, "multi-class accuracy trend", 1800, multi_class_trend},
      {10, "groups, GFT and block diagonalization", 10, group_suite},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o{false, ""};
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = secs <= c.budget_seconds;
    const bool pass = o.pass && in_budget;
    failures += pass ? 0 : 1;
    std::printf("%s criterion %d: %s | %s | %.2fs%s\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(), o.detail.c_str(),
                secs, in_budget ? "" : " (over time budget)");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
