#ifndef CONDENSIM_IDENTITIES_HPP
#define CONDENSIM_IDENTITIES_HPP

// Residuals of the algebraic identities linking harmonic extensions, trace
// chains and the projection Upsilon. Every residual is an absolute
// max-norm error and should sit at round-off level.

#include <algorithm>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "condensim/chain.hpp"

namespace condensim {

struct IdentityResidual {
  std::string name;
  double residual = 0.0;
};

/// Chain-level checks: invariance of m, zero row sums and positive
/// semidefiniteness of a_s (residual = max(0, -lambda_min)).
inline std::vector<IdentityResidual> chain_identity_residuals(const ChainSpec& chain) {
  const Matrix as = dirichlet_matrix(chain);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(as);
  return {
      {"invariance", (chain.measure().transpose() * chain.generator()).cwiseAbs().maxCoeff()},
      {"dirichlet_row_sums", as.rowwise().sum().cwiseAbs().maxCoeff()},
      {"dirichlet_psd", std::max(0.0, -eig.eigenvalues().minCoeff())},
  };
}

/// Subset-level checks for |B| >= 2:
///  - relation:        v^B_j(k) = (L u_k)(j) for j, k in B
///  - upsilon_drift:   Upsilon(v_j) = v^B_j for j in B
///  - upsilon_kernel:  Upsilon(v_j) = 0 for j outside B
///  - trace_invariance: m_B^T G^B = 0
///  - partition:       sum_k u_k = 1 on S
///  - harmonic:        (L u_k) = 0 off B, u_k = delta_k on B
///  - upsilon_face:    Upsilon(x) = x_B on the face Sigma_{B,0} (unit vectors of B)
///  - second_order:    U^T a_s U = a_s^B (second-order part of L(f o Upsilon))
///  - trace_dominates: max(0, r(j,k) - r^B(j,k)) for j != k in B
inline std::vector<IdentityResidual> subset_identity_residuals(const ChainSpec& chain, SiteSet B) {
  const TraceChainSpec t = trace_rates(chain, B);
  const Matrix& U = t.harmonic.columns;  // L x |B|
  const Matrix LU = chain.generator() * U;
  const UpsilonMap ups = upsilon_map(t.harmonic);
  const auto n = static_cast<Eigen::Index>(t.size());
  const auto L = static_cast<Eigen::Index>(chain.size());

  double relation = 0.0, drift = 0.0, kernel = 0.0, harmonic = 0.0, face = 0.0, dominate = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int j = t.members[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 0; c < n; ++c) {
      relation = std::max(relation, std::abs(t.drift_vectors(i, c) - LU(j, c)));
      if (i != c) dominate = std::max(dominate, chain.rate(j, t.members[static_cast<std::size_t>(c)]) - t.rates(i, c));
    }
    drift = std::max(drift, (ups(chain.jump_vector(j)) - t.drift_vectors.row(i).transpose()).cwiseAbs().maxCoeff());
    Vector e = Vector::Zero(L);
    e(j) = 1.0;
    Vector expect = Vector::Zero(n);
    expect(i) = 1.0;
    face = std::max(face, (ups(e) - expect).cwiseAbs().maxCoeff());
  }
  for (Eigen::Index j = 0; j < L; ++j) {
    if (B.contains(static_cast<int>(j))) {
      for (Eigen::Index c = 0; c < n; ++c)
        harmonic = std::max(harmonic, std::abs(U(j, c) - (t.members[static_cast<std::size_t>(c)] == j ? 1.0 : 0.0)));
    } else {
      kernel = std::max(kernel, ups(chain.jump_vector(static_cast<int>(j))).cwiseAbs().maxCoeff());
      harmonic = std::max(harmonic, LU.row(j).cwiseAbs().maxCoeff());
    }
  }
  const double partition = (U.rowwise().sum().array() - 1.0).abs().maxCoeff();
  const double invariance = (t.measure.transpose() * t.drift_vectors).cwiseAbs().maxCoeff();
  const double second = (U.transpose() * dirichlet_matrix(chain) * U - t.dirichlet).cwiseAbs().maxCoeff();

  return {
      {"relation", relation},          {"upsilon_drift", drift},    {"upsilon_kernel", kernel},
      {"trace_invariance", invariance}, {"partition", partition},    {"harmonic", harmonic},
      {"upsilon_face", face},           {"second_order", second},    {"trace_dominates", std::max(0.0, dominate)},
  };
}

}  // namespace condensim

#endif  // CONDENSIM_IDENTITIES_HPP
