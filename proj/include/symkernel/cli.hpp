#pragma once

// Command-line front end. Every subcommand writes CSV preceded by a single
// `# {...}` line holding the run configuration as JSON.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include "symkernel/checks.hpp"
#include "symkernel/datasets.hpp"
#include "symkernel/experiments.hpp"
#include "symkernel/kernels.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace symkernel::cli {

inline constexpr int kSchemaVersion = 1;
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Bad flag values found after CLI11 has parsed the command line.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// `start:stop:step` (stop exclusive), a comma list, or one value.
inline std::vector<double> parse_grid(const std::string& text) {
  const auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw UsageError("malformed number '" + s + "' in grid '" + text + "'");
    }
    if (used != s.size() || !std::isfinite(v)) throw UsageError("malformed number '" + s + "' in grid '" + text + "'");
    return v;
  };
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw UsageError("grid '" + text + "' must be start:stop:step");
    const double start = number(parts[0]), stop = number(parts[1]), step = number(parts[2]);
    if (step <= 0.0) throw UsageError("grid '" + text + "': step must be > 0");
    if (stop <= start) throw UsageError("grid '" + text + "': stop must exceed start");
    // Index-based so the points do not accumulate rounding.
    for (long i = 0;; ++i) {
      const double v = start + static_cast<double>(i) * step;
      if (v >= stop - 1e-12 * step) break;
      out.push_back(v);
    }
  } else {
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
  }
  if (out.empty()) throw UsageError("grid '" + text + "' is empty");
  return out;
}

inline std::vector<int> parse_int_grid(const std::string& text, int min_value) {
  std::vector<int> out;
  for (double v : parse_grid(text)) {
    if (v != std::floor(v)) throw UsageError("grid '" + text + "' must contain integers");
    if (v < min_value) throw UsageError("grid '" + text + "': values must be >= " + std::to_string(min_value));
    out.push_back(static_cast<int>(v));
  }
  return out;
}

/// Round-trippable decimal with 17 significant digits.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const nlohmann::json& config, const std::vector<std::string>& columns) : out_(out) {
    out_ << "# " << config.dump() << '\n';
    row(columns);
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << quote(fields[i]);
    out_ << '\n';
  }

  static std::string quote(const std::string& f) {
    if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
    std::string q = "\"";
    for (char c : f) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }

 private:
  std::ostream& out_;
};

struct KernelOptions {
  std::string family = "mlp";
  double length_scale = 1.0;
  int layers = 1;
  double weight_std = 1.0;
  double bias_std = 1.0;
  std::string mode = "ntk";
  int filter = 3;
  int stride = 1;
  std::string readout = "fc";

  KernelSpec spec() const {
    const KernelMode m = mode == "nngp" ? KernelMode::Nngp : KernelMode::Ntk;
    if (family == "rbf") return RbfSpec{length_scale};
    if (family == "mlp") return MlpSpec{layers, weight_std, bias_std, m};
    return ConvSpec{filter, stride, readout == "gap" ? Readout::GlobalAveragePool : Readout::FullyConnected, weight_std,
                    m};
  }

  nlohmann::json json() const {
    nlohmann::json j{{"family", family}};
    if (family == "rbf") j["length_scale"] = length_scale;
    if (family == "mlp") j.update({{"layers", layers}, {"bias_std", bias_std}});
    if (family != "rbf") j.update({{"weight_std", weight_std}, {"mode", mode}});
    if (family == "conv") j.update({{"filter", filter}, {"stride", stride}, {"readout", readout}});
    return j;
  }
};

inline void add_kernel_options(CLI::App* cmd, KernelOptions& k, const std::string& default_family) {
  k.family = default_family;
  cmd->add_option("--kernel", k.family, "Kernel family")
      ->check(CLI::IsMember({"rbf", "mlp", "conv"}))
      ->capture_default_str();
  cmd->add_option("--length-scale", k.length_scale, "RBF length scale")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--layers", k.layers, "MLP hidden layers")->check(CLI::Range(1, 64))->capture_default_str();
  cmd->add_option("--weight-std", k.weight_std, "Weight standard deviation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--bias-std", k.bias_std, "MLP bias standard deviation")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--mode", k.mode, "nngp or ntk")->check(CLI::IsMember({"nngp", "ntk"}))->capture_default_str();
  cmd->add_option("--filter", k.filter, "Conv filter size (odd)")->check(CLI::Range(1, 63))->capture_default_str();
  cmd->add_option("--stride", k.stride, "Conv stride")->check(CLI::Range(1, 64))->capture_default_str();
  cmd->add_option("--readout", k.readout, "Conv readout: fc or gap")
      ->check(CLI::IsMember({"fc", "gap"}))
      ->capture_default_str();
}

/// Digits grouped by class: IDX files when available, the synthetic corpus
/// otherwise (with a notice on `log`).
inline std::vector<std::vector<Matrix>> load_digits(const std::string& data_dir, int per_class, std::uint64_t seed,
                                                    std::ostream& log, std::string& source) {
  std::optional<LabeledImages> data;
  if (!data_dir.empty())
    data = try_load_mnist(std::filesystem::path(data_dir));
  else
    data = try_load_mnist();
  if (data) {
    source = "idx";
    return group_by_class(*data, per_class);
  }
  log << "notice: no IDX digit files found (set --data-dir or " << kDataDirEnv
      << "); using the synthetic digit corpus\n";
  source = "synthetic";
  return group_by_class(synthetic_digits(per_class, seed), per_class);
}

inline std::vector<std::string> sweep_fields(const SweepRow& r) {
  return {fmt(r.x), fmt(r.spectral), fmt(r.exact), fmt(r.lambda_n_inv), fmt(r.mean_inv_lambda)};
}

/// Parses argv and runs one subcommand. `out` receives CSV unless --out is
/// given; `err` receives diagnostics.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Spectral analysis of kernel regression on group orbits"};
  app.require_subcommand(1);
  app.footer(
      "Grids accept start:stop:step (start included, stop excluded), a comma list, or a single value.\n"
      "Digit experiments read train-images-idx3-ubyte / train-labels-idx1-ubyte from --data-dir or $" +
      std::string(kDataDirEnv) + "; otherwise a synthetic 10-class corpus is used.");

  std::string out_path;
  const auto add_out = [&](CLI::App* cmd) { cmd->add_option("--out", out_path, "Output CSV path (default stdout)"); };

  // sweep-delta
  KernelOptions k_delta;
  int delta_n = 8;
  std::string delta_grid = "0:5:0.25";
  auto* c_delta = app.add_subcommand("sweep-delta", "Two circular orbits: error versus separation delta");
  add_kernel_options(c_delta, k_delta, "rbf");
  c_delta->add_option("--n", delta_n, "Points per orbit")->check(CLI::Range(2, 4096))->capture_default_str();
  c_delta->add_option("--deltas", delta_grid, "Separation grid")->capture_default_str();
  add_out(c_delta);

  // sweep-n
  KernelOptions k_n;
  double n_delta = 1.0;
  std::string n_grid = "4,8,16,32,64";
  auto* c_n = app.add_subcommand("sweep-n", "Two circular orbits: error versus points per orbit");
  add_kernel_options(c_n, k_n, "rbf");
  c_n->add_option("--delta", n_delta, "Separation")->check(CLI::NonNegativeNumber)->capture_default_str();
  c_n->add_option("--ns", n_grid, "Grid of points per orbit")->capture_default_str();
  add_out(c_n);

  // pairs
  KernelOptions k_pairs;
  int pairs_count = 200, pairs_rot = 8, pairs_per_class = 20;
  std::uint64_t pairs_seed = 1;
  std::string data_dir;
  auto* c_pairs = app.add_subcommand("pairs", "Rotated digit orbit pairs: spectral versus exact error");
  add_kernel_options(c_pairs, k_pairs, "mlp");
  c_pairs->add_option("--pairs", pairs_count, "Number of pairs")->check(CLI::Range(1, 1000000))->capture_default_str();
  c_pairs->add_option("--n-rot", pairs_rot, "Rotations per orbit")->check(CLI::Range(2, 4096))->capture_default_str();
  c_pairs->add_option("--per-class", pairs_per_class, "Images drawn per class")
      ->check(CLI::Range(1, 100000))
      ->capture_default_str();
  c_pairs->add_option("--seed", pairs_seed, "RNG seed")->capture_default_str();
  c_pairs->add_option("--data-dir", data_dir, "Directory with IDX digit files");
  add_out(c_pairs);

  // multiseed
  KernelOptions k_ms;
  int ms_datasets = 30, ms_seeds = 13, ms_rot = 8;
  std::uint64_t ms_seed = 1;
  auto* c_ms = app.add_subcommand("multiseed", "Two-class multi-orbit datasets: averaged spectral versus exact error");
  add_kernel_options(c_ms, k_ms, "mlp");
  c_ms->add_option("--datasets", ms_datasets, "Random two-class datasets")
      ->check(CLI::Range(1, 100000))
      ->capture_default_str();
  c_ms->add_option("--seeds", ms_seeds, "Seeds per class")->check(CLI::Range(1, 10000))->capture_default_str();
  c_ms->add_option("--n-rot", ms_rot, "Rotations per orbit")->check(CLI::Range(2, 4096))->capture_default_str();
  c_ms->add_option("--seed", ms_seed, "RNG seed")->capture_default_str();
  c_ms->add_option("--data-dir", data_dir, "Directory with IDX digit files");
  add_out(c_ms);

  // multiclass
  KernelOptions k_mc;
  int mc_seeds = 13;
  std::uint64_t mc_seed = 1;
  std::string mc_grid = "4,8,16,32,64";
  auto* c_mc = app.add_subcommand("multiclass", "One-versus-many spectral accuracy versus n_rot");
  add_kernel_options(c_mc, k_mc, "mlp");
  c_mc->add_option("--seeds", mc_seeds, "Seeds per class")->check(CLI::Range(1, 10000))->capture_default_str();
  c_mc->add_option("--n-rots", mc_grid, "Grid of rotations per orbit")->capture_default_str();
  c_mc->add_option("--seed", mc_seed, "RNG seed")->capture_default_str();
  c_mc->add_option("--data-dir", data_dir, "Directory with IDX digit files");
  add_out(c_mc);

  // equivariance
  int eq_n = 8, eq_filter = 3;
  std::string eq_mode = "ntk";
  std::uint64_t eq_seed = 1;
  auto* c_eq = app.add_subcommand("equivariance", "Conv kernel symmetry checks on random images");
  c_eq->add_option("--n", eq_n, "Image side")->check(CLI::Range(3, 256))->capture_default_str();
  c_eq->add_option("--filter", eq_filter, "Filter size (odd)")->check(CLI::Range(1, 63))->capture_default_str();
  c_eq->add_option("--mode", eq_mode, "nngp or ntk")->check(CLI::IsMember({"nngp", "ntk"}))->capture_default_str();
  c_eq->add_option("--seed", eq_seed, "RNG seed")->capture_default_str();
  add_out(c_eq);

  // nonabelian
  double na_length = 1.0;
  std::uint64_t na_seed = 7;
  std::string na_grid = "0:4:0.2";
  auto* c_na = app.add_subcommand("nonabelian", "D4 x C2 orbit: group-spectral versus exact error");
  c_na->add_option("--separations", na_grid, "Separation grid")->capture_default_str();
  c_na->add_option("--seed", na_seed, "RNG seed")->capture_default_str();
  c_na->add_option("--length-scale", na_length, "RBF length scale")->check(CLI::PositiveNumber)->capture_default_str();
  add_out(c_na);

  auto* c_check = app.add_subcommand("check", "Run the fast invariant suites and print a pass/fail table");
  add_out(c_check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::binary);
    if (!file) {
      err << "error: cannot open " << out_path << " for writing\n";
      return kExitRuntime;
    }
  }
  std::ostream& sink = out_path.empty() ? out : file;
  const auto base_config = [&](const std::string& command) {
    return nlohmann::json{{"schema_version", kSchemaVersion}, {"command", command}};
  };

  try {
    if (c_delta->parsed()) {
      const auto grid = parse_grid(delta_grid);
      for (double d : grid)
        if (d < 0.0) throw UsageError("--deltas: separations must be >= 0");
      nlohmann::json cfg = base_config("sweep-delta");
      cfg.update({{"kernel", k_delta.json()}, {"n", delta_n}, {"deltas", delta_grid}});
      const auto rows = sweep_delta(k_delta.spec(), delta_n, grid);
      CsvWriter csv(sink, cfg, {"delta", "spectral", "exact", "lambda_n_inv", "mean_inv_lambda"});
      for (const auto& r : rows) csv.row(sweep_fields(r));
    } else if (c_n->parsed()) {
      const auto grid = parse_int_grid(n_grid, 2);
      nlohmann::json cfg = base_config("sweep-n");
      cfg.update({{"kernel", k_n.json()}, {"delta", n_delta}, {"ns", n_grid}});
      const auto rows = sweep_n(k_n.spec(), n_delta, grid);
      CsvWriter csv(sink, cfg, {"n", "spectral", "exact", "lambda_n_inv", "mean_inv_lambda"});
      for (const auto& r : rows) csv.row(sweep_fields(r));
    } else if (c_pairs->parsed()) {
      std::string source;
      const auto by_class = load_digits(data_dir, pairs_per_class, pairs_seed, err, source);
      nlohmann::json cfg = base_config("pairs");
      cfg.update({{"kernel", k_pairs.json()},
                  {"pairs", pairs_count},
                  {"n_rot", pairs_rot},
                  {"per_class", pairs_per_class},
                  {"seed", pairs_seed},
                  {"data", source}});
      const auto results = pair_scatter(k_pairs.spec(), random_digit_pairs(by_class, pairs_count, pairs_seed), pairs_rot);
      CsvWriter csv(sink, cfg,
                    {"pair", "seed_a", "seed_b", "spectral", "exact", "classification_errors", "prediction_a",
                     "prediction_b", "lambda_n", "mean_inv_lambda", "delta_sq", "radius", "inverse_radius",
                     "degenerate"});
      for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        csv.row({std::to_string(i), std::to_string(r.seed_a), std::to_string(r.seed_b), fmt(r.spectral_epsilon),
                 fmt(r.exact_epsilon), std::to_string(r.classification_errors), fmt(r.prediction_a),
                 fmt(r.prediction_b), fmt(r.lambda_n), fmt(r.mean_inv_lambda), fmt(r.geometry.delta_sq),
                 fmt(r.geometry.radius), fmt(r.geometry.inverse_radius), r.degenerate ? "1" : "0"});
      }
    } else if (c_ms->parsed()) {
      std::string source;
      // Twice the seeds so two datasets on the same classes can differ.
      const auto by_class = load_digits(data_dir, 2 * ms_seeds, ms_seed, err, source);
      nlohmann::json cfg = base_config("multiseed");
      cfg.update({{"kernel", k_ms.json()},
                  {"datasets", ms_datasets},
                  {"seeds", ms_seeds},
                  {"n_rot", ms_rot},
                  {"seed", ms_seed},
                  {"data", source}});
      CsvWriter csv(sink, cfg, {"dataset", "class_a", "class_b", "avg_spectral", "exact", "correct_fraction"});
      std::mt19937_64 rng(ms_seed);
      std::vector<double> spec_col, exact_col;
      for (int t = 0; t < ms_datasets; ++t) {
        const int ca = std::uniform_int_distribution<int>(0, kDigitClasses - 1)(rng);
        int cb = std::uniform_int_distribution<int>(0, kDigitClasses - 2)(rng);
        if (cb >= ca) ++cb;
        const auto pick = [&](int c) {
          std::vector<Matrix> pool = by_class[c];
          std::shuffle(pool.begin(), pool.end(), rng);
          pool.resize(ms_seeds);
          return pool;
        };
        const auto a = pick(ca), b = pick(cb);
        const MultiSeedResult r = multi_seed_error(k_ms.spec(), a, b, ms_rot);
        spec_col.push_back(r.avg_spectral);
        exact_col.push_back(r.exact);
        csv.row({std::to_string(t), std::to_string(ca), std::to_string(cb), fmt(r.avg_spectral), fmt(r.exact),
                 fmt(r.correct_fraction)});
      }
      if (spec_col.size() >= 2) err << "spearman(avg_spectral, exact) = " << fmt(spearman(spec_col, exact_col)) << '\n';
    } else if (c_mc->parsed()) {
      const auto grid = parse_int_grid(mc_grid, 2);
      std::string source;
      const auto by_class = load_digits(data_dir, mc_seeds, mc_seed, err, source);
      nlohmann::json cfg = base_config("multiclass");
      cfg.update({{"kernel", k_mc.json()}, {"seeds", mc_seeds}, {"n_rots", mc_grid}, {"seed", mc_seed}, {"data", source}});
      std::vector<std::string> cols{"n_rot", "accuracy"};
      for (int c = 0; c < kDigitClasses; ++c) cols.push_back("class_" + std::to_string(c));
      const auto rows = multi_class_accuracy(k_mc.spec(), by_class, grid);
      CsvWriter csv(sink, cfg, cols);
      for (const auto& r : rows) {
        std::vector<std::string> f{std::to_string(r.n_rot), fmt(r.accuracy)};
        for (double p : r.per_class) f.push_back(fmt(p));
        csv.row(f);
      }
    } else if (c_eq->parsed()) {
      if (eq_filter % 2 == 0) throw UsageError("--filter must be odd");
      nlohmann::json cfg = base_config("equivariance");
      cfg.update({{"n", eq_n}, {"filter", eq_filter}, {"mode", eq_mode}, {"seed", eq_seed}});
      const EquivarianceReport r =
          equivariance_checks(eq_n, eq_filter, eq_mode == "nngp" ? KernelMode::Nngp : KernelMode::Ntk, eq_seed);
      CsvWriter csv(sink, cfg, {"quantity", "value"});
      csv.row({"fc_translation_circulance", fmt(r.fc_translation_circulance)});
      csv.row({"fc_rotation_circulance", fmt(r.fc_rotation_circulance)});
      csv.row({"gap_translation_constancy", fmt(r.gap_translation_constancy)});
      csv.row({"gap_rotation_circulance", fmt(r.gap_rotation_circulance)});
      csv.row({"gap_rotation_rank", std::to_string(r.gap_rotation_rank)});
      csv.row({"gap_rotation_spread", fmt(r.gap_rotation_spread)});
      csv.row({"fc_translation_single_pixel_rank", std::to_string(r.fc_translation_single_pixel_rank)});
      csv.row({"gap_pair_spectral", fmt(r.gap_pair_spectral)});
      csv.row({"gap_pair_diverged", r.gap_pair_diverged ? "1" : "0"});
      csv.row({"gap_pair_exact", fmt(r.gap_pair_exact)});
    } else if (c_na->parsed()) {
      const auto grid = parse_grid(na_grid);
      for (double s : grid)
        if (s < 0.0) throw UsageError("--separations: values must be >= 0");
      nlohmann::json cfg = base_config("nonabelian");
      cfg.update({{"separations", na_grid}, {"seed", na_seed}, {"length_scale", na_length}});
      const auto rows = nonabelian_sweep(grid, na_seed, na_length);
      CsvWriter csv(sink, cfg, {"separation", "spectral", "exact", "jitter"});
      for (const auto& r : rows) csv.row({fmt(r.x), fmt(r.spectral), fmt(r.exact), fmt(r.jitter)});
    } else if (c_check->parsed()) {
      const auto results = run_checks();
      CsvWriter csv(sink, base_config("check"), {"check", "status", "deviation", "tolerance", "detail"});
      bool all = true;
      for (const auto& r : results) {
        all = all && r.passed;
        csv.row({r.name, r.passed ? "PASS" : "FAIL", fmt(r.deviation), fmt(r.tolerance), r.detail});
      }
      return all ? kExitOk : kExitRuntime;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace symkernel::cli
