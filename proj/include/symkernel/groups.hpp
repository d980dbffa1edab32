#pragma once

// Finite groups given by Cayley tables, their unitary irreducible
// representations, the generalized Fourier transform (orthogonal
// normalization) and the leave-one-out error formula for G-stationary kernels.

#include "symkernel/core.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace symkernel {

/// One factor of a group built as a direct product of constructible families.
struct GroupFactor {
  enum class Family { Cyclic, Dihedral4 };
  Family family;
  int order;

  bool operator==(const GroupFactor&) const = default;
};

/// Finite group as an explicit Cayley table over element indices 0..order-1.
///
/// `factors` records how the group was constructed; it is empty for groups
/// built from a raw table, for which `irreps()` is unavailable.
class FiniteGroup {
 public:
  FiniteGroup() = default;

  /// Builds a group from a row-major |G|x|G| composition table and checks
  /// the group axioms exhaustively.
  static FiniteGroup from_table(int order, std::vector<int> cayley,
                                std::vector<GroupFactor> factors = {}) {
    require(order >= 1, ErrorKind::InvalidOrder, "group order must be >= 1");
    require(cayley.size() == static_cast<std::size_t>(order) * order, ErrorKind::Dimension,
            "cayley table must have order^2 entries");
    FiniteGroup g;
    g.order_ = order;
    g.cayley_ = std::move(cayley);
    g.factors_ = std::move(factors);
    for (int v : g.cayley_)
      require(v >= 0 && v < order, ErrorKind::InvalidArgument, "cayley entry out of range");
    g.identity_ = -1;
    for (int e = 0; e < order && g.identity_ < 0; ++e) {
      bool ok = true;
      for (int x = 0; x < order && ok; ++x) ok = g.mul(e, x) == x && g.mul(x, e) == x;
      if (ok) g.identity_ = e;
    }
    require(g.identity_ >= 0, ErrorKind::InvalidArgument, "cayley table has no identity");
    g.inverse_.assign(order, -1);
    for (int x = 0; x < order; ++x)
      for (int y = 0; y < order; ++y)
        if (g.mul(x, y) == g.identity_) g.inverse_[x] = y;
    for (int x = 0; x < order; ++x)
      require(g.inverse_[x] >= 0, ErrorKind::InvalidArgument, "element without inverse");
    require(g.satisfies_axioms(), ErrorKind::InvalidArgument, "cayley table violates the group axioms");
    return g;
  }

  int order() const noexcept { return order_; }
  int identity() const noexcept { return identity_; }
  int mul(int g, int h) const { return cayley_[static_cast<std::size_t>(g) * order_ + h]; }
  int inv(int g) const { return inverse_[g]; }
  const std::vector<int>& cayley() const noexcept { return cayley_; }
  const std::vector<int>& inverse_table() const noexcept { return inverse_; }
  const std::vector<GroupFactor>& factors() const noexcept { return factors_; }

  /// Exhaustive check: closure, Latin-square rows/columns, identity,
  /// inverses, associativity over all triples.
  bool satisfies_axioms() const {
    const int n = order_;
    for (int g = 0; g < n; ++g) {
      std::vector<char> row(n, 0), col(n, 0);
      for (int h = 0; h < n; ++h) {
        row[mul(g, h)] = 1;
        col[mul(h, g)] = 1;
      }
      if (std::count(row.begin(), row.end(), 1) != n) return false;
      if (std::count(col.begin(), col.end(), 1) != n) return false;
      if (mul(identity_, g) != g || mul(g, identity_) != g) return false;
      if (mul(inverse_[g], g) != identity_ || mul(g, inverse_[g]) != identity_) return false;
    }
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          if (mul(mul(a, b), c) != mul(a, mul(b, c))) return false;
    return true;
  }

 private:
  int order_ = 0;
  int identity_ = 0;
  std::vector<int> cayley_;
  std::vector<int> inverse_;
  std::vector<GroupFactor> factors_;
};

/// Cyclic group C_n with composition (i + j) mod n.
inline FiniteGroup cyclic_group(int n) {
  require(n >= 1, ErrorKind::InvalidOrder, "cyclic group order must be >= 1, got " + std::to_string(n));
  std::vector<int> table(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) table[static_cast<std::size_t>(i) * n + j] = (i + j) % n;
  return FiniteGroup::from_table(n, std::move(table), {{GroupFactor::Family::Cyclic, n}});
}

/// Dihedral group of the square. Element 4*f + k is r^k s^f, where r is the
/// quarter turn and s a reflection; indices 0..3 are the rotations.
inline FiniteGroup dihedral_group_4() {
  std::vector<int> table(64);
  for (int a = 0; a < 8; ++a) {
    const int ka = a % 4, fa = a / 4;
    for (int b = 0; b < 8; ++b) {
      const int kb = b % 4, fb = b / 4;
      // r^ka s^fa r^kb s^fb = r^(ka +- kb) s^(fa xor fb)
      const int k = ((ka + (fa ? -kb : kb)) % 4 + 4) % 4;
      const int f = fa ^ fb;
      table[a * 8 + b] = 4 * f + k;
    }
  }
  return FiniteGroup::from_table(8, std::move(table), {{GroupFactor::Family::Dihedral4, 8}});
}

/// Direct product G x H; element (g, h) has index g*|H| + h.
inline FiniteGroup direct_product(const FiniteGroup& g, const FiniteGroup& h) {
  const int ng = g.order(), nh = h.order();
  const int n = ng * nh;
  std::vector<int> table(static_cast<std::size_t>(n) * n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      table[static_cast<std::size_t>(a) * n + b] =
          g.mul(a / nh, b / nh) * nh + h.mul(a % nh, b % nh);
  std::vector<GroupFactor> factors;
  if (!g.factors().empty() && !h.factors().empty()) {
    factors = g.factors();
    factors.insert(factors.end(), h.factors().begin(), h.factors().end());
  }
  return FiniteGroup::from_table(n, std::move(table), std::move(factors));
}

/// Unitary matrix representation: matrices[g] is d x d.
struct Irrep {
  int dim = 1;
  std::vector<CMatrix> matrices;
};

namespace detail {

inline std::vector<Irrep> cyclic_irreps(int n) {
  std::vector<Irrep> out(n);
  for (int j = 0; j < n; ++j) {
    out[j].dim = 1;
    out[j].matrices.resize(n);
    for (int k = 0; k < n; ++k) {
      // Reduce jk mod n first so the phase is exact for large products.
      const double phase = 2.0 * kPi * static_cast<double>((static_cast<long long>(j) * k) % n) / n;
      out[j].matrices[k] = CMatrix::Constant(1, 1, std::polar(1.0, phase));
    }
  }
  return out;
}

inline std::vector<Irrep> d4_irreps() {
  CMatrix rot(2, 2), ref(2, 2);
  rot << 0.0, -1.0, 1.0, 0.0;
  ref << 1.0, 0.0, 0.0, -1.0;
  // (value on r, value on s) for the four characters.
  const int chars[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  std::vector<Irrep> out;
  for (const auto& c : chars) {
    Irrep ir;
    ir.dim = 1;
    for (int e = 0; e < 8; ++e) {
      const int k = e % 4, f = e / 4;
      double v = std::pow(c[0], k) * (f ? c[1] : 1);
      ir.matrices.push_back(CMatrix::Constant(1, 1, Complex(v, 0.0)));
    }
    out.push_back(std::move(ir));
  }
  Irrep two;
  two.dim = 2;
  for (int e = 0; e < 8; ++e) {
    const int k = e % 4, f = e / 4;
    CMatrix m = CMatrix::Identity(2, 2);
    for (int i = 0; i < k; ++i) m = m * rot;
    if (f) m = m * ref;
    two.matrices.push_back(m);
  }
  out.push_back(std::move(two));
  return out;
}

inline std::vector<Irrep> tensor_irreps(const std::vector<Irrep>& a, int order_a,
                                        const std::vector<Irrep>& b, int order_b) {
  std::vector<Irrep> out;
  out.reserve(a.size() * b.size());
  for (const auto& ra : a) {
    for (const auto& rb : b) {
      Irrep ir;
      ir.dim = ra.dim * rb.dim;
      ir.matrices.resize(static_cast<std::size_t>(order_a) * order_b);
      for (int x = 0; x < order_a; ++x)
        for (int y = 0; y < order_b; ++y)
          ir.matrices[static_cast<std::size_t>(x) * order_b + y] =
              Eigen::kroneckerProduct(ra.matrices[x], rb.matrices[y]);
      out.push_back(std::move(ir));
    }
  }
  return out;
}

}  // namespace detail

/// Complete list of pairwise-inequivalent unitary irreps for groups built
/// from cyclic groups, D4 and direct products thereof. Product irreps are
/// ordered with the first factor's irrep index varying slowest.
inline std::vector<Irrep> irreps(const FiniteGroup& g) {
  require(!g.factors().empty(), ErrorKind::UnsupportedGroup,
          "irreps are only available for cyclic, D4 and direct-product groups");
  std::vector<Irrep> acc;
  int acc_order = 1;
  bool first = true;
  for (const auto& f : g.factors()) {
    std::vector<Irrep> fac = f.family == GroupFactor::Family::Cyclic ? detail::cyclic_irreps(f.order)
                                                                     : detail::d4_irreps();
    if (first) {
      acc = std::move(fac);
      first = false;
    } else {
      acc = detail::tensor_irreps(acc, acc_order, fac, f.order);
    }
    acc_order *= f.order;
  }
  require(acc_order == g.order(), ErrorKind::UnsupportedGroup, "factor orders do not match group order");
  return acc;
}

/// Largest deviation from the Schur orthogonality relations
/// (d_rho/|G|) sum_g conj(rho_ab(g)) sigma_cd(g) = delta_rho,sigma delta_ac delta_bd.
inline double schur_orthogonality_deviation(const std::vector<Irrep>& reps, int order) {
  double worst = 0.0;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    for (std::size_t s = 0; s < reps.size(); ++s) {
      const int dr = reps[r].dim, ds = reps[s].dim;
      for (int a = 0; a < dr; ++a)
        for (int b = 0; b < dr; ++b)
          for (int c = 0; c < ds; ++c)
            for (int d = 0; d < ds; ++d) {
              Complex acc = 0.0;
              for (int g = 0; g < order; ++g)
                acc += std::conj(reps[r].matrices[g](a, b)) * reps[s].matrices[g](c, d);
              acc *= static_cast<double>(dr) / order;
              const double expect = (r == s && a == c && b == d) ? 1.0 : 0.0;
              worst = std::max(worst, std::abs(acc - expect));
            }
    }
  }
  return worst;
}

/// Real orthogonal action of a finite group on R^dimension.
struct GroupAction {
  FiniteGroup group;
  int dimension = 0;
  std::vector<Matrix> matrices;

  Vector apply(int g, const Vector& x) const { return matrices[g] * x; }

  double orthogonality_deviation() const {
    double worst = 0.0;
    for (const auto& m : matrices)
      worst = std::max(worst, max_abs(m.transpose() * m - Matrix::Identity(dimension, dimension)));
    return worst;
  }

  double homomorphism_deviation() const {
    double worst = 0.0;
    const int n = group.order();
    for (int g = 0; g < n; ++g)
      for (int h = 0; h < n; ++h)
        worst = std::max(worst, max_abs(matrices[g] * matrices[h] - matrices[group.mul(g, h)]));
    return worst;
  }
};

/// Action of C_n generated by repeated application of `generator`.
inline GroupAction cyclic_action(int n, const Matrix& generator) {
  require(generator.rows() == generator.cols(), ErrorKind::Dimension, "generator must be square");
  GroupAction act{cyclic_group(n), static_cast<int>(generator.rows()), {}};
  Matrix m = Matrix::Identity(generator.rows(), generator.cols());
  for (int k = 0; k < n; ++k) {
    act.matrices.push_back(m);
    m = generator * m;
  }
  return act;
}

/// D4 acting on a 2x2 image (row-major pixels) by quarter turns and flips.
inline GroupAction d4_pixel_action() {
  // out(i, j) = in(j, 1 - i) for the turn, out(i, j) = in(i, 1 - j) for the flip.
  Matrix rot = Matrix::Zero(4, 4), ref = Matrix::Zero(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      rot(i * 2 + j, j * 2 + (1 - i)) = 1.0;
      ref(i * 2 + j, i * 2 + (1 - j)) = 1.0;
    }
  GroupAction act{dihedral_group_4(), 4, {}};
  for (int e = 0; e < 8; ++e) {
    const int k = e % 4, f = e / 4;
    Matrix m = Matrix::Identity(4, 4);
    for (int i = 0; i < k; ++i) m = m * rot;
    if (f) m = m * ref;
    act.matrices.push_back(m);
  }
  return act;
}

/// C2 acting by global sign on R^dimension.
inline GroupAction sign_action(int dimension) {
  GroupAction act{cyclic_group(2), dimension, {}};
  act.matrices.push_back(Matrix::Identity(dimension, dimension));
  act.matrices.push_back(-Matrix::Identity(dimension, dimension));
  return act;
}

/// Action of G x H from two commuting actions on the same space:
/// (g, h) acts as A(g) B(h).
inline GroupAction product_action(const GroupAction& a, const GroupAction& b) {
  require(a.dimension == b.dimension, ErrorKind::Dimension, "product action needs equal dimensions");
  const int nb = b.group.order();
  GroupAction act{direct_product(a.group, b.group), a.dimension, {}};
  for (int g = 0; g < a.group.order(); ++g)
    for (int h = 0; h < nb; ++h) {
      const Matrix ab = a.matrices[g] * b.matrices[h];
      require(max_abs(ab - b.matrices[h] * a.matrices[g]) < 1e-12, ErrorKind::InvalidArgument,
              "product action requires commuting factor actions");
      act.matrices.push_back(ab);
    }
  return act;
}

/// Generalized Fourier coefficients, one d_rho x d_rho block per irrep.
struct GftCoefficients {
  std::vector<CMatrix> blocks;

  double frobenius_energy() const {
    double s = 0.0;
    for (const auto& b : blocks) s += b.squaredNorm();
    return s;
  }
};

/// f_hat(rho) = sum_g sqrt(d_rho/|G|) f(g) rho(g^-1); rho(g^-1) = rho(g)^H
/// for unitary irreps.
inline GftCoefficients gft_forward(const CVector& f, const std::vector<Irrep>& reps) {
  require(!reps.empty(), ErrorKind::Dimension, "empty irrep list");
  const auto order = static_cast<Eigen::Index>(reps.front().matrices.size());
  require(f.size() == order, ErrorKind::Dimension, "function length must equal group order");
  GftCoefficients out;
  out.blocks.reserve(reps.size());
  for (const auto& r : reps) {
    const double scale = std::sqrt(static_cast<double>(r.dim) / static_cast<double>(order));
    CMatrix acc = CMatrix::Zero(r.dim, r.dim);
    for (Eigen::Index g = 0; g < order; ++g) acc += f(g) * r.matrices[g].adjoint();
    out.blocks.push_back(scale * acc);
  }
  return out;
}

inline GftCoefficients gft_forward(const Vector& f, const std::vector<Irrep>& reps) {
  return gft_forward(CVector(f.cast<Complex>()), reps);
}

/// f(g) = sum_rho sqrt(d_rho/|G|) Tr[f_hat(rho) rho(g)].
inline CVector gft_inverse(const GftCoefficients& coeffs, const std::vector<Irrep>& reps) {
  require(coeffs.blocks.size() == reps.size(), ErrorKind::Dimension, "one coefficient block per irrep required");
  require(!reps.empty(), ErrorKind::Dimension, "empty irrep list");
  const auto order = static_cast<Eigen::Index>(reps.front().matrices.size());
  CVector f = CVector::Zero(order);
  for (std::size_t i = 0; i < reps.size(); ++i) {
    const auto& r = reps[i];
    const auto& b = coeffs.blocks[i];
    require(b.rows() == r.dim && b.cols() == r.dim, ErrorKind::Dimension,
            "coefficient block " + std::to_string(i) + " has wrong shape");
    const double scale = std::sqrt(static_cast<double>(r.dim) / static_cast<double>(order));
    for (Eigen::Index g = 0; g < order; ++g) f(g) += scale * (b * r.matrices[g]).trace();
  }
  return f;
}

/// Reciprocal condition number below which a Fourier block counts as singular.
inline constexpr double kSingularBlockRcond = 1e-12;

/// Leave-one-out error at the identity element for a G-stationary kernel.
///
/// `kernel_row` is kappa(g) = K[e, g]. Returns y(e) - prediction(e), computed as
///   sqrt(|G|) sum_s d_s Re Tr[kappa_hat_s^-1 y_hat_s^*] / sum_s d_s^{3/2} Tr[kappa_hat_s^-1].
/// For alternating labels on C_2N this equals lambda_N^-1 / <lambda^-1>.
/// Throws SingularKernelError when a block's reciprocal condition number
/// falls below kSingularBlockRcond.
inline double general_spectral_error(const Vector& kernel_row, const Vector& labels, const FiniteGroup& group,
                                     const std::vector<Irrep>& reps) {
  const int n = group.order();
  require(kernel_row.size() == n && labels.size() == n, ErrorKind::Dimension,
          "kernel row and labels must have |G| entries");
  require(group.identity() == 0, ErrorKind::InvalidArgument, "identity element must have index 0");
  const GftCoefficients kappa = gft_forward(kernel_row, reps);
  const GftCoefficients yhat = gft_forward(labels, reps);
  double num = 0.0, den = 0.0;
  for (std::size_t s = 0; s < reps.size(); ++s) {
    const CMatrix& kb = kappa.blocks[s];
    // The block is Hermitian for a symmetric Gram matrix; symmetrize away rounding.
    const CMatrix herm = 0.5 * (kb + kb.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(herm);
    const auto& ev = es.eigenvalues();
    const double emax = ev.cwiseAbs().maxCoeff();
    const double emin = ev.cwiseAbs().minCoeff();
    const double rcond = emax > 0.0 ? emin / emax : 0.0;
    if (rcond < kSingularBlockRcond) throw SingularKernelError(s, rcond);
    const CMatrix kinv = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().adjoint();
    const double d = reps[s].dim;
    num += d * (kinv * yhat.blocks[s].adjoint()).trace().real();
    den += std::pow(d, 1.5) * kinv.trace().real();
  }
  return std::sqrt(static_cast<double>(n)) * num / den;
}

/// Per-irrep blocks of U^* K U for a G-stationary K.
struct BlockDiagonalization {
  std::vector<CMatrix> blocks;       // sqrt(|G|/d_s) kappa_hat(s), repeated d_s times in U^* K U
  double reconstruction_error = 0.0;  // max |K - U (block diag) U^*|
  double stationarity_deviation = 0.0;
};

/// Max |K[g,h] - K[e, g^-1 h]| over all pairs.
inline double stationarity_deviation(const Matrix& gram, const FiniteGroup& group) {
  const int n = group.order();
  require(gram.rows() == n && gram.cols() == n, ErrorKind::Dimension, "gram must be |G| x |G|");
  const int e = group.identity();
  double worst = 0.0;
  for (int g = 0; g < n; ++g)
    for (int h = 0; h < n; ++h)
      worst = std::max(worst, std::abs(gram(g, h) - gram(e, group.mul(group.inv(g), h))));
  return worst;
}

/// Unitary change of basis U[g, (rho,a,b)] = sqrt(d_rho/|G|) rho_ab(g).
inline CMatrix irrep_basis(const std::vector<Irrep>& reps) {
  require(!reps.empty(), ErrorKind::Dimension, "empty irrep list");
  const auto order = static_cast<Eigen::Index>(reps.front().matrices.size());
  CMatrix u(order, order);
  Eigen::Index col = 0;
  for (const auto& r : reps) {
    const double scale = std::sqrt(static_cast<double>(r.dim) / static_cast<double>(order));
    for (int a = 0; a < r.dim; ++a)
      for (int b = 0; b < r.dim; ++b, ++col)
        for (Eigen::Index g = 0; g < order; ++g) u(g, col) = scale * r.matrices[g](a, b);
  }
  require(col == order, ErrorKind::Dimension, "irreps do not satisfy sum d^2 = |G|");
  return u;
}

/// Block-diagonalizes a G-stationary Gram matrix in the irrep basis.
/// Throws StationarityViolation when K[g,h] deviates from kappa(g^-1 h) by more
/// than `tol` times max|K|.
inline BlockDiagonalization block_diagonalize(const Matrix& gram, const FiniteGroup& group,
                                              const std::vector<Irrep>& reps, double tol = 1e-8) {
  BlockDiagonalization out;
  out.stationarity_deviation = stationarity_deviation(gram, group);
  const double scale = std::max(max_abs(gram), 1e-300);
  if (out.stationarity_deviation > tol * scale)
    throw Error(ErrorKind::StationarityViolation,
                "gram is not G-stationary (max deviation " + std::to_string(out.stationarity_deviation) + ")",
                out.stationarity_deviation);
  const CMatrix u = irrep_basis(reps);
  const CMatrix kt = u.adjoint() * gram.cast<Complex>() * u;
  const Eigen::Index n = gram.rows();
  CMatrix rebuilt = CMatrix::Zero(n, n);
  Eigen::Index base = 0;
  for (const auto& r : reps) {
    const int d = r.dim;
    CMatrix block(d, d);
    // Nonzero entries are ((s,a,b),(s,a,c)); the block is the same for every a.
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c) block(b, c) = kt(base + b, base + c);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        for (int c = 0; c < d; ++c) rebuilt(base + a * d + b, base + a * d + c) = block(b, c);
    out.blocks.push_back(block);
    base += static_cast<Eigen::Index>(d) * d;
  }
  out.reconstruction_error = (u * rebuilt * u.adjoint() - gram.cast<Complex>()).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace symkernel
