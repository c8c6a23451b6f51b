#ifndef CONDENSIM_ZRP_HPP
#define CONDENSIM_ZRP_HPP

// Exact event-driven simulation of the condensing zero-range process and
// its diffusive rescaling X^N_t = eta_{t N^2} / N.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "condensim/chain.hpp"
#include "condensim/path.hpp"
#include "condensim/rng.hpp"

namespace condensim {

enum class JumpRateFamily {
  /// g_j(n) = m_j (1 + b/n)
  Default,
  /// g_j(n) = m_j (1 + b/n + c/n^2)
  Quadratic,
};

inline std::string to_string(JumpRateFamily f) {
  return f == JumpRateFamily::Default ? "default" : "quadratic";
}

struct JumpRates {
  JumpRateFamily family = JumpRateFamily::Default;
  double b = 1.5;
  double c = 1.0;  // only used by Quadratic

  /// g(n) for a site with invariant weight m_j; g(0) = 0.
  double operator()(double m_j, long n) const {
    if (n <= 0) return 0.0;
    const double inv = 1.0 / static_cast<double>(n);
    switch (family) {
      case JumpRateFamily::Default: return m_j * (1.0 + b * inv);
      case JumpRateFamily::Quadratic: return m_j * (1.0 + b * inv + c * inv * inv);
    }
    return 0.0;
  }
};

inline double jump_rate_g(int j, long n, const JumpRates& g, const Vector& m) { return g(m(j), n); }

/// Stopping rule: fixed horizon, condensation threshold, or both (whichever first).
struct ZrpStop {
  double horizon = std::numeric_limits<double>::infinity();  // macroscopic time
  std::optional<double> delta;
};

struct ZrpConfig {
  ChainSpec chain;
  long N = 100;
  JumpRates g;
  std::uint64_t seed = 0;
  std::vector<double> sample_times;  // macroscopic, strictly increasing
  ZrpStop stop;
  std::uint64_t config_hash = 0;
};

struct ZrpState {
  std::vector<long> eta;
  double t_micro = 0.0;
};

/// First macroscopic time a single site holds >= (1-delta)N particles, and
/// the first time any site becomes empty (diagnostic counterpart of the
/// first absorption time of the limit).
struct CondensationRecord {
  std::optional<double> time;
  int winner = -1;
  std::optional<double> first_empty_time;
  int first_empty_site = -1;
  double stop_time = 0.0;
};

struct ZrpPath {
  PathSample sample;
  CondensationRecord condensation;
  ZrpState final_state;
  std::uint64_t events = 0;
};

/// Observer hook receiving every holding interval [t0, t1) (macroscopic
/// time) together with the configuration held during it.
struct NoZrpObserver {
  void operator()(double, double, const std::vector<long>&) const {}
};

inline void check_zrp_config(const ZrpConfig& cfg) {
  if (cfg.N < 1) throw Error(ErrorKind::BadInitial, "N must be positive");
  for (std::size_t i = 1; i < cfg.sample_times.size(); ++i)
    if (!(cfg.sample_times[i] > cfg.sample_times[i - 1]))
      throw Error(ErrorKind::RangeError, "sample times must be strictly increasing");
  if (cfg.stop.delta && !(*cfg.stop.delta > 0.0 && *cfg.stop.delta < 1.0))
    throw Error(ErrorKind::RangeError, "condensation threshold must lie in (0,1)");
  if (!cfg.stop.delta && !std::isfinite(cfg.stop.horizon))
    throw Error(ErrorKind::RangeError, "ZRP run needs a finite horizon or a condensation threshold");
}

/// Smallest occupancy that counts as condensed: n >= (1-delta)N.
inline long condensation_threshold(long N, double delta) {
  const double target = (1.0 - delta) * static_cast<double>(N);
  auto n = static_cast<long>(std::ceil(target - 1e-9));
  return std::max<long>(n, 1);
}

/// Lattice point of Sigma_N closest to x (largest-remainder rounding).
inline std::vector<long> nearest_configuration(const Vector& x, long N) {
  const auto L = static_cast<std::size_t>(x.size());
  std::vector<long> eta(L);
  std::vector<std::pair<double, std::size_t>> rem(L);
  long total = 0;
  for (std::size_t j = 0; j < L; ++j) {
    const double v = x(static_cast<Eigen::Index>(j)) * static_cast<double>(N);
    eta[j] = static_cast<long>(std::floor(v));
    rem[j] = {v - static_cast<double>(eta[j]), j};
    total += eta[j];
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto a, auto b) { return a.first > b.first; });
  for (std::size_t i = 0; total < N; ++i, ++total) ++eta[rem[i % L].second];
  return eta;
}

/// (L_N H)(x) = N^2 sum_{j,k} g_j(N x_j) r(j,k) [H(x + (e_k - e_j)/N) - H(x)].
template <class H>
double zrp_generator_apply(const ChainSpec& chain, long N, const JumpRates& g, const H& h, const Vector& x) {
  const auto L = static_cast<int>(chain.size());
  const double n = static_cast<double>(N);
  std::vector<long> eta(static_cast<std::size_t>(L));
  long total = 0;
  for (int j = 0; j < L; ++j) {
    const double v = x(j) * n;
    const double r = std::round(v);
    if (std::abs(v - r) > 1e-9 || r < 0.0) throw Error(ErrorKind::NotLattice, "point is not in Sigma_N");
    eta[static_cast<std::size_t>(j)] = static_cast<long>(r);
    total += static_cast<long>(r);
  }
  if (total != N) throw Error(ErrorKind::NotLattice, "coordinates do not sum to 1");
  const double h0 = h(x);
  double out = 0.0;
  Vector y = x;
  for (int j = 0; j < L; ++j) {
    const double gj = g(chain.measure(j), eta[static_cast<std::size_t>(j)]);
    if (gj == 0.0) continue;
    for (int k = 0; k < L; ++k) {
      const double r = chain.rate(j, k);
      if (r == 0.0) continue;
      y(j) = x(j) - 1.0 / n;
      y(k) = x(k) + 1.0 / n;
      out += gj * r * (h(y) - h0);
      y(j) = x(j);
      y(k) = x(k);
    }
  }
  return n * n * out;
}

template <class H>
double zrp_generator_apply(const ZrpConfig& cfg, const H& h, const Vector& x) {
  return zrp_generator_apply(cfg.chain, cfg.N, cfg.g, h, x);
}

/// Exact CTMC trajectory from eta0 using path stream `path_index` of the
/// configured seed. A particle leaves j at rate g_j(eta_j) lambda(j) and
/// lands on k with probability r(j,k)/lambda(j).
template <class Observer = NoZrpObserver>
ZrpPath simulate_zrp_path(const ZrpConfig& cfg, std::span<const long> eta0, std::uint64_t path_index,
                          Observer&& observer = Observer{}) {
  check_zrp_config(cfg);
  const auto L = static_cast<int>(cfg.chain.size());
  if (eta0.size() != static_cast<std::size_t>(L)) throw Error(ErrorKind::BadInitial, "initial configuration has wrong length");
  long count = 0;
  for (long e : eta0) {
    if (e < 0) throw Error(ErrorKind::BadInitial, "negative occupancy");
    count += e;
  }
  if (count != cfg.N) {
    std::ostringstream os;
    os << "initial configuration holds " << count << " particles, expected " << cfg.N;
    throw Error(ErrorKind::BadInitial, os.str());
  }

  CounterRng rng(stream_key(cfg.seed, path_index, 0x5A52ULL));
  const double n_sq = static_cast<double>(cfg.N) * static_cast<double>(cfg.N);
  const double micro_horizon = cfg.stop.horizon * n_sq;

  // Per-site destination CDFs.
  std::vector<std::vector<double>> dest_cdf(static_cast<std::size_t>(L));
  std::vector<double> lambda(static_cast<std::size_t>(L));
  std::vector<double> m(static_cast<std::size_t>(L));
  for (int j = 0; j < L; ++j) {
    lambda[static_cast<std::size_t>(j)] = cfg.chain.holding_rates()(j);
    m[static_cast<std::size_t>(j)] = cfg.chain.measure(j);
    auto& cdf = dest_cdf[static_cast<std::size_t>(j)];
    cdf.resize(static_cast<std::size_t>(L));
    double acc = 0.0;
    for (int k = 0; k < L; ++k) {
      acc += cfg.chain.rate(j, k) / lambda[static_cast<std::size_t>(j)];
      cdf[static_cast<std::size_t>(k)] = acc;
    }
  }

  ZrpPath out;
  out.sample.engine = "zrp";
  out.sample.seed = cfg.seed;
  out.sample.config_hash = cfg.config_hash;
  std::vector<long> eta(eta0.begin(), eta0.end());
  std::vector<double> site_rate(static_cast<std::size_t>(L));
  auto refresh = [&](int j) {
    const auto s = static_cast<std::size_t>(j);
    site_rate[s] = cfg.g(m[s], eta[s]) * lambda[s];
  };
  for (int j = 0; j < L; ++j) refresh(j);

  const long cond_level = cfg.stop.delta ? condensation_threshold(cfg.N, *cfg.stop.delta) : cfg.N + 1;
  auto& rec = out.condensation;
  for (int j = 0; j < L; ++j) {
    if (eta[static_cast<std::size_t>(j)] >= cond_level && !rec.time) {
      rec.time = 0.0;
      rec.winner = j;
    }
  }

  std::size_t next_sample = 0;
  const auto& times = cfg.sample_times;
  auto emit_until = [&](double t_macro_exclusive_end, bool inclusive) {
    while (next_sample < times.size() &&
           (inclusive ? times[next_sample] <= t_macro_exclusive_end : times[next_sample] < t_macro_exclusive_end)) {
      Vector x(L);
      for (int j = 0; j < L; ++j) x(j) = static_cast<double>(eta[static_cast<std::size_t>(j)]) / static_cast<double>(cfg.N);
      out.sample.push(times[next_sample], std::move(x), SiteSet{});
      ++next_sample;
    }
  };

  double t = 0.0;
  bool stopped = rec.time.has_value();
  while (!stopped) {
    double total = 0.0;
    for (double r : site_rate) total += r;
    const double t_next = t + rng.exponential() / total;
    const bool hits_horizon = t_next >= micro_horizon;
    const double t_end = hits_horizon ? micro_horizon : t_next;
    // The configuration is constant on [t, t_end); samples at times < t_end
    // see the current state.
    emit_until(t_end / n_sq, hits_horizon);
    observer(t / n_sq, t_end / n_sq, eta);
    if (hits_horizon) {
      t = micro_horizon;
      break;
    }
    t = t_next;

    double u = rng.uniform() * total;
    int j = 0;
    while (j + 1 < L && u >= site_rate[static_cast<std::size_t>(j)]) {
      u -= site_rate[static_cast<std::size_t>(j)];
      ++j;
    }
    // Guard against landing on an empty site through round-off.
    while (eta[static_cast<std::size_t>(j)] == 0) j = (j + L - 1) % L;
    const auto& cdf = dest_cdf[static_cast<std::size_t>(j)];
    const double v = rng.uniform();
    int k = 0;
    while (k + 1 < L && v >= cdf[static_cast<std::size_t>(k)]) ++k;
    while (cfg.chain.rate(j, k) == 0.0) k = (k + L - 1) % L;

    --eta[static_cast<std::size_t>(j)];
    ++eta[static_cast<std::size_t>(k)];
    refresh(j);
    refresh(k);
    ++out.events;

    if (eta[static_cast<std::size_t>(j)] == 0 && !rec.first_empty_time) {
      rec.first_empty_time = t / n_sq;
      rec.first_empty_site = j;
    }
    if (eta[static_cast<std::size_t>(k)] >= cond_level && !rec.time) {
      rec.time = t / n_sq;
      rec.winner = k;
      stopped = true;
    }
  }
  rec.stop_time = t / n_sq;
  // Sample times after a condensation stop see the frozen final state.
  emit_until(cfg.stop.horizon, true);
  out.final_state = ZrpState{std::move(eta), t};
  return out;
}

}  // namespace condensim

#endif  // CONDENSIM_ZRP_HPP
