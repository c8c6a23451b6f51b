#ifndef CONDENSIM_CHAIN_HPP
#define CONDENSIM_CHAIN_HPP

// Finite-chain linear algebra: validation, invariant measure, Dirichlet
// forms, harmonic extensions, trace chains and the projection onto a face.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "condensim/error.hpp"
#include "condensim/site_set.hpp"

namespace condensim {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Tolerance for algebraic identities (dense solves on small systems).
inline constexpr double identity_tolerance = 1e-10;

namespace detail {

/// Directed reachability on the support of the rate matrix.
inline bool is_irreducible(const Matrix& rates) {
  const auto L = static_cast<int>(rates.rows());
  auto reach_all = [&](bool transpose) {
    std::vector<char> seen(static_cast<std::size_t>(L), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const int j = stack.back();
      stack.pop_back();
      for (int k = 0; k < L; ++k) {
        const double r = transpose ? rates(k, j) : rates(j, k);
        if (r > 0.0 && !seen[static_cast<std::size_t>(k)]) {
          seen[static_cast<std::size_t>(k)] = 1;
          stack.push_back(k);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  };
  // Strongly connected iff every site is reachable from 0 in G and in G^T.
  return reach_all(false) && reach_all(true);
}

inline void check_rate_matrix(const Matrix& rates) {
  if (rates.rows() != rates.cols()) throw Error(ErrorKind::InvalidRates, "rate matrix must be square");
  if (rates.rows() < 2) throw Error(ErrorKind::InvalidRates, "need at least two sites");
  if (static_cast<std::size_t>(rates.rows()) > SiteSet::max_sites)
    throw Error(ErrorKind::InvalidRates, "at most 32 sites are supported");
  for (Eigen::Index j = 0; j < rates.rows(); ++j) {
    if (rates(j, j) != 0.0) {
      std::ostringstream os;
      os << "r(" << j + 1 << "," << j + 1 << ") must be zero";
      throw Error(ErrorKind::InvalidRates, os.str());
    }
    for (Eigen::Index k = 0; k < rates.cols(); ++k) {
      if (!(rates(j, k) >= 0.0) || !std::isfinite(rates(j, k)))
        throw Error(ErrorKind::InvalidRates, "rates must be finite and nonnegative");
    }
  }
  if (!is_irreducible(rates)) throw Error(ErrorKind::Reducible, "rate matrix is not irreducible");
}

inline Matrix generator_matrix(const Matrix& rates) {
  Matrix g = rates;
  g.diagonal() = -rates.rowwise().sum();
  return g;
}

}  // namespace detail

/// Invariant measure of an irreducible rate matrix, normalized to sum 1.
inline Vector invariant_measure(const Matrix& rates) {
  detail::check_rate_matrix(rates);
  const auto L = rates.rows();
  // Solve G^T m = 0 with the last equation replaced by sum(m) = 1.
  Matrix system = detail::generator_matrix(rates).transpose();
  system.row(L - 1).setOnes();
  Vector rhs = Vector::Zero(L);
  rhs(L - 1) = 1.0;
  Eigen::FullPivLU<Matrix> lu(system);
  if (lu.rank() < L) throw Error(ErrorKind::SingularSystem, "invariant measure system is singular");
  Vector m = lu.solve(rhs);
  if ((m.array() <= 0.0).any()) throw Error(ErrorKind::NonPositiveMeasure, "computed measure has a nonpositive entry");
  return m;
}

/// Validated irreducible rate matrix together with an invariant measure.
/// Immutable after construction.
class ChainSpec {
 public:
  ChainSpec() = default;

  std::size_t size() const { return static_cast<std::size_t>(rates_.rows()); }
  const Matrix& rates() const { return rates_; }
  double rate(int j, int k) const { return rates_(j, k); }
  const Vector& measure() const { return m_; }
  double measure(int j) const { return m_(j); }
  /// lambda(j) = sum_k r(j,k).
  const Vector& holding_rates() const { return lambda_; }
  /// M_j = m_j lambda(j), invariant for the embedded chain.
  Vector embedded_measure() const { return m_.cwiseProduct(lambda_); }
  /// G = r - diag(lambda), so (L f) = G f.
  const Matrix& generator() const { return generator_; }
  Vector apply_generator(const Vector& f) const { return generator_ * f; }

  /// v_j = sum_k r(j,k)(e_k - e_j), i.e. row j of G.
  Vector jump_vector(int j) const { return generator_.row(j).transpose(); }

  bool same_as(const ChainSpec& other) const {
    return rates_.rows() == other.rates_.rows() && rates_ == other.rates_ && m_ == other.m_;
  }

 private:
  friend ChainSpec validate_chain(const Matrix& rates, std::optional<Vector> m);

  Matrix rates_;
  Matrix generator_;
  Vector m_;
  Vector lambda_;
};

/// Validates rates (and a supplied measure, which may be unnormalized) and
/// builds a ChainSpec. Without m the normalized invariant measure is used.
inline ChainSpec validate_chain(const Matrix& rates, std::optional<Vector> m = std::nullopt) {
  detail::check_rate_matrix(rates);
  ChainSpec c;
  c.rates_ = rates;
  c.generator_ = detail::generator_matrix(rates);
  c.lambda_ = rates.rowwise().sum();
  if (m) {
    if (m->size() != rates.rows()) throw Error(ErrorKind::InvalidRates, "measure length does not match rates");
    if ((m->array() <= 0.0).any()) throw Error(ErrorKind::NonPositiveMeasure, "measure entries must be positive");
    const double residual = (m->transpose() * c.generator_).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, m->sum() * c.lambda_.maxCoeff());
    if (residual > identity_tolerance * scale) {
      std::ostringstream os;
      os << "m^T G has residual " << residual;
      throw Error(ErrorKind::NotInvariant, os.str());
    }
    c.m_ = *m;
  } else {
    c.m_ = invariant_measure(rates);
  }
  return c;
}

/// Matrix a with a_{i,j} = <e_i, -L e_j>_m.
inline Matrix dirichlet_operator_matrix(const ChainSpec& chain) {
  return -(chain.measure().asDiagonal() * chain.generator());
}

/// Symmetric Dirichlet matrix a_s = (a + a^T)/2, so <v, a_s v> = <v, -S v>_m.
inline Matrix dirichlet_matrix(const ChainSpec& chain) {
  const Matrix a = dirichlet_operator_matrix(chain);
  return 0.5 * (a + a.transpose());
}

/// Harmonic extensions u_k, k in B: column i of `columns` is u_{B[i]}.
struct HarmonicBasis {
  SiteSet subset;
  std::vector<int> members;
  Matrix columns;  // L x |B|

  const auto column(int k) const { return columns.col(subset.index_of(k)); }
};

inline void check_subset(const ChainSpec& chain, SiteSet B, std::size_t min_size) {
  if (!B.is_subset_of(SiteSet::full(chain.size())))
    throw Error(ErrorKind::SubsetTooSmall, "subset contains sites outside the chain");
  if (B.size() < min_size) {
    std::ostringstream os;
    os << "subset has " << B.size() << " element(s), need at least " << min_size;
    throw Error(ErrorKind::SubsetTooSmall, os.str());
  }
}

/// Solves u_k = delta_k on B, (L u_k) = 0 off B for every k in B.
inline HarmonicBasis harmonic_extensions(const ChainSpec& chain, SiteSet B) {
  check_subset(chain, B, 1);
  const auto L = static_cast<Eigen::Index>(chain.size());
  HarmonicBasis basis{B, B.members(), Matrix::Zero(L, static_cast<Eigen::Index>(B.size()))};
  for (std::size_t i = 0; i < basis.members.size(); ++i)
    basis.columns(basis.members[i], static_cast<Eigen::Index>(i)) = 1.0;
  const SiteSet A = B.complement(chain.size());
  if (A.empty()) return basis;

  const std::vector<int> a_sites = A.members();
  const auto nA = static_cast<Eigen::Index>(a_sites.size());
  const auto nB = static_cast<Eigen::Index>(basis.members.size());
  Matrix gAA(nA, nA), gAB(nA, nB);
  const Matrix& g = chain.generator();
  for (Eigen::Index r = 0; r < nA; ++r) {
    for (Eigen::Index c = 0; c < nA; ++c) gAA(r, c) = g(a_sites[r], a_sites[c]);
    for (Eigen::Index c = 0; c < nB; ++c) gAB(r, c) = g(a_sites[r], basis.members[c]);
  }
  Eigen::FullPivLU<Matrix> lu(gAA);
  if (lu.rank() < nA) throw Error(ErrorKind::SingularSystem, "harmonic extension system is singular");
  const Matrix uA = lu.solve(-gAB);
  for (Eigen::Index r = 0; r < nA; ++r) basis.columns.row(a_sites[r]) = uA.row(r);
  return basis;
}

/// Trace of the chain on B with the objects the restricted diffusion needs.
struct TraceChainSpec {
  ChainSpec parent;
  SiteSet subset;
  std::vector<int> members;  // sorted; local index i <-> site members[i]
  Matrix rates;              // r^B, |B| x |B|, zero diagonal
  Vector measure;            // m_B
  Matrix drift_vectors;      // row i is v^B_{members[i]}
  Matrix dirichlet;          // a_s^B
  HarmonicBasis harmonic;

  std::size_t size() const { return members.size(); }
};

/// r^B(j,k) = sum_l r(j,l) u_k(l) for j != k in B.
inline TraceChainSpec trace_rates(const ChainSpec& chain, SiteSet B) {
  check_subset(chain, B, 2);
  TraceChainSpec t;
  t.parent = chain;
  t.subset = B;
  t.members = B.members();
  t.harmonic = harmonic_extensions(chain, B);
  const auto n = static_cast<Eigen::Index>(t.members.size());

  // Row j of r * U gives sum_l r(j,l) u_k(l) for all k at once.
  const Matrix ru = chain.rates() * t.harmonic.columns;
  t.rates = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < n; ++c)
      if (i != c) t.rates(i, c) = ru(t.members[i], c);

  t.measure.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) t.measure(i) = chain.measure(t.members[i]);

  t.drift_vectors = detail::generator_matrix(t.rates);
  const Matrix a = -(t.measure.asDiagonal() * t.drift_vectors);
  t.dirichlet = 0.5 * (a + a.transpose());
  return t;
}

/// The linear map Upsilon: R^S -> R^B with [Upsilon x]_k = u_k . x.
struct UpsilonMap {
  SiteSet subset;
  Matrix matrix;  // |B| x L, entry (k, j) = u_k(j)

  Vector operator()(const Vector& x) const { return matrix * x; }
};

inline UpsilonMap upsilon_map(const HarmonicBasis& basis) {
  return UpsilonMap{basis.subset, basis.columns.transpose()};
}

inline UpsilonMap upsilon_map(const ChainSpec& chain, SiteSet B) {
  check_subset(chain, B, 2);
  return upsilon_map(harmonic_extensions(chain, B));
}

/// Validates 1 < p < b < p + 1.
inline void check_absorption_exponents(double b, double p) {
  if (!(b > 1.0 && p > 1.0 && p < b && b < p + 1.0)) {
    std::ostringstream os;
    os << "exponents must satisfy 1 < p < b < p+1 (got b=" << b << ", p=" << p << ")";
    throw Error(ErrorKind::BadExponents, os.str());
  }
}

/// Radius a_0 for which L f_A <= 0 on Sigma_B(a_0 eps) cap Lambda_B(eps):
///   1/a_0 = max_{k in A} b <L e_k, 1_B>_m / ((b-p) <(-S) e_k, e_k>_m).
inline double psi4_radius(const ChainSpec& chain, SiteSet B, double b, double p) {
  check_absorption_exponents(b, p);
  check_subset(chain, B, 1);
  const SiteSet A = B.complement(chain.size());
  if (A.empty()) throw Error(ErrorKind::SubsetTooSmall, "complement of B is empty");
  const Matrix as = dirichlet_matrix(chain);
  double inv = 0.0;
  for (int k : A.members()) {
    double flux = 0.0;  // <L e_k, 1_B>_m = sum_{j in B} m_j r(j,k)
    for (int j : B.members()) flux += chain.measure(j) * chain.rate(j, k);
    inv = std::max(inv, b * flux / ((b - p) * as(k, k)));
  }
  if (!(inv > 0.0)) throw Error(ErrorKind::SingularSystem, "no flux from B into its complement");
  return 1.0 / inv;
}

}  // namespace condensim

#endif  // CONDENSIM_CHAIN_HPP
