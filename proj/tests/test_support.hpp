#ifndef CONDENSIM_TEST_SUPPORT_HPP
#define CONDENSIM_TEST_SUPPORT_HPP

#include <condensim/chain.hpp>
#include <condensim/rng.hpp>

namespace condensim::testing {

inline Matrix complete_rates(int L) {
  Matrix r = Matrix::Ones(L, L);
  r.diagonal().setZero();
  return r;
}

inline ChainSpec k3() { return validate_chain(complete_rates(3)); }
inline ChainSpec k4() { return validate_chain(complete_rates(4)); }

inline ChainSpec two_site_symmetric() { return validate_chain(complete_rates(2)); }

/// 1 -> 2 -> 3 -> 1 at rate 2 and the reverse direction at rate 1/2.
inline ChainSpec asymmetric_cycle3() {
  Matrix r(3, 3);
  r << 0.0, 2.0, 0.5,
       0.5, 0.0, 2.0,
       2.0, 0.5, 0.0;
  return validate_chain(r);
}

/// Non-reversible 4-site chain with one missing edge.
inline ChainSpec asymmetric4() {
  Matrix r(4, 4);
  r << 0.0, 1.0, 0.0, 2.0,
       0.5, 0.0, 1.5, 0.3,
       1.0, 0.2, 0.0, 0.7,
       0.4, 1.1, 0.9, 0.0;
  return validate_chain(r);
}

/// Random irreducible chain: a random directed cycle guarantees
/// irreducibility, the other entries are present with probability 1/2.
inline Matrix random_rates(int L, std::uint64_t seed) {
  CounterRng rng(stream_key(seed, static_cast<std::uint64_t>(L), 0xC4A1ULL));
  Matrix r = Matrix::Zero(L, L);
  for (int j = 0; j < L; ++j)
    for (int k = 0; k < L; ++k)
      if (j != k && rng.uniform() < 0.5) r(j, k) = 0.1 + 2.0 * rng.uniform();
  std::vector<int> perm(static_cast<std::size_t>(L));
  for (int i = 0; i < L; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (int i = L - 1; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[rng() % static_cast<std::uint64_t>(i + 1)]);
  for (int i = 0; i < L; ++i) {
    const int a = perm[static_cast<std::size_t>(i)], b = perm[static_cast<std::size_t>((i + 1) % L)];
    if (r(a, b) == 0.0) r(a, b) = 0.1 + 2.0 * rng.uniform();
  }
  return r;
}

}  // namespace condensim::testing

#endif
