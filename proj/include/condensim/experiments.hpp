#ifndef CONDENSIM_EXPERIMENTS_HPP
#define CONDENSIM_EXPERIMENTS_HPP

// Statistical verification harness: winner laws of both engines, the
// first-absorption time bound, the sign of L f_A near a face, generator
// Taylor residuals and martingale residuals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "condensim/chain.hpp"
#include "condensim/diffusion.hpp"
#include "condensim/ensemble.hpp"
#include "condensim/generator.hpp"
#include "condensim/stats.hpp"
#include "condensim/zrp.hpp"

namespace condensim {

/// FNV-1a over the rates and measure; identifies a chain in reports.
inline std::uint64_t chain_fingerprint(const ChainSpec& chain) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const double* data, Eigen::Index n) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < static_cast<std::size_t>(n) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  feed(chain.rates().data(), chain.rates().size());
  feed(chain.measure().data(), chain.measure().size());
  return h;
}

struct WinnerHistogram {
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;
  std::string engine;
  std::uint64_t chain = 0;
};

inline WinnerHistogram winner_distribution(std::span<const int> winners, std::size_t L, std::string engine,
                                           std::uint64_t chain = 0) {
  if (winners.empty()) throw Error(ErrorKind::EmptyInput, "no paths to tally");
  WinnerHistogram h{std::vector<std::uint64_t>(L, 0), 0, std::move(engine), chain};
  for (int w : winners) {
    if (w < 0 || static_cast<std::size_t>(w) >= L) throw Error(ErrorKind::IncompletePath, "path did not reach its stopping rule");
    ++h.counts[static_cast<std::size_t>(w)];
    ++h.total;
  }
  return h;
}

inline WinnerHistogram winner_distribution(std::span<const AbsorptionTrace> traces, std::size_t L, std::uint64_t chain = 0) {
  std::vector<int> w;
  w.reserve(traces.size());
  for (const auto& t : traces) w.push_back(t.trapped_vertex ? *t.trapped_vertex : -1);
  return winner_distribution(w, L, "diffusion", chain);
}

inline WinnerHistogram winner_distribution(std::span<const CondensationRecord> records, std::size_t L, std::uint64_t chain = 0) {
  std::vector<int> w;
  w.reserve(records.size());
  for (const auto& r : records) w.push_back(r.time ? r.winner : -1);
  return winner_distribution(w, L, "zrp", chain);
}

struct WinnerComparison {
  double tv = 0.0;
  double tv_stderr = 0.0;
  ChiSquareResult chi_square;
};

inline WinnerComparison compare_winner(const WinnerHistogram& a, const WinnerHistogram& b) {
  if (a.counts.size() != b.counts.size() || a.chain != b.chain)
    throw Error(ErrorKind::MismatchedChains, "histograms come from different chains");
  return {tv_distance(a.counts, b.counts), tv_standard_error(a.counts, b.counts), chi_square_two_sample(a.counts, b.counts)};
}

// ---------------------------------------------------------------------------
// Excursion estimate of trace rates

struct TraceRateEstimate {
  Matrix rates;   // |B| x |B|, zero diagonal
  Matrix standard_error;  // per entry
  std::uint64_t excursions_per_site = 0;
};

/// r^B(j,k) = lambda(j) P_j[T_k = T_B^+] estimated from `excursions`
/// independent excursions out of each j in B. Uses stream (seed, j, 0x7E).
inline TraceRateEstimate trace_rates_monte_carlo(const ChainSpec& chain, SiteSet B, std::uint64_t excursions,
                                                 std::uint64_t seed) {
  check_subset(chain, B, 2);
  if (excursions == 0) throw Error(ErrorKind::EmptyInput, "need at least one excursion");
  const auto L = static_cast<int>(chain.size());
  const std::vector<int> members = B.members();
  const auto n = static_cast<Eigen::Index>(members.size());
  std::vector<std::vector<double>> cdf(static_cast<std::size_t>(L), std::vector<double>(static_cast<std::size_t>(L)));
  for (int j = 0; j < L; ++j) {
    double acc = 0.0;
    for (int k = 0; k < L; ++k) {
      acc += chain.rate(j, k) / chain.holding_rates()(j);
      cdf[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = acc;
    }
  }
  auto step = [&](CounterRng& rng, int j) {
    const auto& c = cdf[static_cast<std::size_t>(j)];
    const double u = rng.uniform();
    int k = 0;
    while (k + 1 < L && u >= c[static_cast<std::size_t>(k)]) ++k;
    while (chain.rate(j, k) == 0.0) k = (k + L - 1) % L;
    return k;
  };

  TraceRateEstimate est{Matrix::Zero(n, n), Matrix::Zero(n, n), excursions};
  for (Eigen::Index i = 0; i < n; ++i) {
    const int j = members[static_cast<std::size_t>(i)];
    CounterRng rng(stream_key(seed, static_cast<std::uint64_t>(j), 0x7EULL));
    std::vector<std::uint64_t> hits(static_cast<std::size_t>(n), 0);
    for (std::uint64_t e = 0; e < excursions; ++e) {
      int site = step(rng, j);
      while (!B.contains(site)) site = step(rng, site);
      ++hits[static_cast<std::size_t>(B.index_of(site))];
    }
    const double lambda = chain.holding_rates()(j);
    for (Eigen::Index c = 0; c < n; ++c) {
      if (c == i) continue;
      const double p = static_cast<double>(hits[static_cast<std::size_t>(c)]) / static_cast<double>(excursions);
      est.rates(i, c) = lambda * p;
      est.standard_error(i, c) = lambda * std::sqrt(p * (1.0 - p) / static_cast<double>(excursions));
    }
  }
  return est;
}

// ---------------------------------------------------------------------------
// First-absorption bound

struct R06Check {
  SiteSet subset;
  double b = 0.0;
  double q = 0.0;
  double d = 0.0;
  double bound = 0.0;
  double empirical_mean_sigma1 = 0.0;
  double stderr_sigma1 = 0.0;
  double ci_halfwidth = 0.0;
  std::uint64_t samples = 0;
  bool violated = false;
};

/// d(B) = min_{j in B} <(-S^B) e_j, e_j>_{m_B}, using the trace chain on B
/// (equal to the parent chain when B = S).
inline double dirichlet_floor(const ChainSpec& chain, SiteSet B) {
  const Matrix as = B == SiteSet::full(chain.size()) ? dirichlet_matrix(chain) : trace_rates(chain, B).dirichlet;
  return as.diagonal().minCoeff();
}

/// |B|^{(q-1) v 1} / ((q+1)(q-b) d(B)).
inline double r06_bound(const ChainSpec& chain, SiteSet B, double b, double q) {
  if (!(q > b)) throw Error(ErrorKind::BadExponents, "need q > b");
  check_subset(chain, B, 2);
  const double size = static_cast<double>(B.size());
  return std::pow(size, std::max(q - 1.0, 1.0)) / ((q + 1.0) * (q - b) * dirichlet_floor(chain, B));
}

inline R06Check r06_bound_check(const ChainSpec& chain, SiteSet B, double b, double q, std::span<const double> sigma1) {
  R06Check c;
  c.subset = B;
  c.b = b;
  c.q = q;
  c.bound = r06_bound(chain, B, b, q);
  c.d = dirichlet_floor(chain, B);
  if (sigma1.empty()) throw Error(ErrorKind::EmptyInput, "no sigma_1 samples");
  const RunningStats s = summarize(sigma1);
  c.samples = s.count();
  c.empirical_mean_sigma1 = s.mean();
  c.stderr_sigma1 = s.stderr_mean();
  c.ci_halfwidth = 1.96 * c.stderr_sigma1;
  c.violated = c.empirical_mean_sigma1 - c.ci_halfwidth > c.bound;
  return c;
}

// ---------------------------------------------------------------------------
// Sign of L f_A near the face x_A = 0

/// (p+1)^{-1} (L f_A)(x) written as the three-term closed form with
/// f_A = (prod_{k in A} x_k)^{p+1}, A = B^c. Valid for x_B > 0.
inline double psi4_closed_form(const ChainSpec& chain, SiteSet B, double b, double p, const Vector& x) {
  const SiteSet A = B.complement(chain.size());
  const std::vector<int> a_sites = A.members();
  const Matrix as = dirichlet_matrix(chain);
  // f_A(x) / (x_j x_k) with the powers combined so the value is finite at x_A = 0.
  auto scaled = [&](int j, int k) {
    double v = 1.0;
    for (int i : a_sites) {
      const double e = p + 1.0 - (i == j ? 1.0 : 0.0) - (i == k ? 1.0 : 0.0);
      v *= std::pow(x(i), e);
    }
    return v;
  };
  double first = 0.0, second = 0.0, third = 0.0;
  for (int j : a_sites)
    for (int k : a_sites)
      if (j != k) first += scaled(j, k) * (-as(j, k));  // <S e_j, e_k>_m = -a_s(j,k)
  for (int k : a_sites)
    for (int j : B.members())
      second += scaled(k, -1) / x(j) * chain.measure(j) * chain.rate(j, k);  // <L e_k, e_j>_m
  for (int k : a_sites) third += scaled(k, k) * as(k, k);
  return -(p + 1.0 - b) * first + b * second - (b - p) * third;
}

struct Psi4Report {
  SiteSet subset;  // B
  double b = 0.0;
  double p = 0.0;
  double epsilon = 0.0;
  double a0 = 0.0;
  int grid_resolution = 0;
  std::uint64_t points = 0;
  double max_value = -std::numeric_limits<double>::infinity();
  Vector argmax;
};

/// Calls fn(x) for a tensor grid filling Sigma_B(a0 eps) cap Lambda_B(eps):
/// A-coordinates on [0, a0 eps], the first |B|-1 B-coordinates on [eps, 1],
/// and the last B-coordinate fixed by the simplex constraint (kept if >= eps).
template <class Fn>
std::uint64_t for_each_psi4_grid_point(std::size_t L, SiteSet B, double eps, double a0, int res, Fn&& fn) {
  const std::vector<int> a_sites = B.complement(L).members();
  const std::vector<int> b_sites = B.members();
  std::vector<int> free_sites = a_sites;
  std::vector<std::pair<double, double>> ranges(a_sites.size(), {0.0, a0 * eps});
  for (std::size_t i = 0; i + 1 < b_sites.size(); ++i) {
    free_sites.push_back(b_sites[i]);
    ranges.emplace_back(eps, 1.0);
  }
  const int last = b_sites.back();
  std::vector<int> idx(free_sites.size(), 0);
  std::uint64_t visited = 0;
  Vector x = Vector::Zero(static_cast<Eigen::Index>(L));
  for (;;) {
    double sum = 0.0;
    for (std::size_t i = 0; i < free_sites.size(); ++i) {
      const auto [lo, hi] = ranges[i];
      const double v = res == 1 ? lo : lo + (hi - lo) * idx[i] / static_cast<double>(res - 1);
      x(free_sites[i]) = v;
      sum += v;
    }
    x(last) = 1.0 - sum;
    if (x(last) >= eps) {
      fn(static_cast<const Vector&>(x));
      ++visited;
    }
    std::size_t d = 0;
    while (d < idx.size() && ++idx[d] == res) idx[d++] = 0;
    if (d == idx.size()) break;
  }
  return visited;
}

inline Psi4Report psi4_sign_check(const ChainSpec& chain, SiteSet B, double b, double p, double eps, int res) {
  check_absorption_exponents(b, p);
  if (res < 2) throw Error(ErrorKind::RangeError, "grid resolution must be at least 2");
  if (!(eps > 0.0)) throw Error(ErrorKind::RangeError, "epsilon must be positive");
  Psi4Report r;
  r.subset = B;
  r.b = b;
  r.p = p;
  r.epsilon = eps;
  r.grid_resolution = res;
  r.a0 = psi4_radius(chain, B, b, p);
  r.points = for_each_psi4_grid_point(chain.size(), B, eps, r.a0, res, [&](const Vector& x) {
    const double v = psi4_closed_form(chain, B, b, p, x);
    if (v > r.max_value) {
      r.max_value = v;
      r.argmax = x;
    }
  });
  if (r.points == 0) throw Error(ErrorKind::EmptyRegion, "no grid point satisfies the region constraints");
  return r;
}

// ---------------------------------------------------------------------------
// Generator Taylor residual

/// Calls fn(eta) for every configuration of N particles on L sites.
template <class Fn>
void for_each_configuration(std::size_t L, long N, Fn&& fn) {
  std::vector<long> eta(L, 0);
  auto fill = [&](auto&& self, std::size_t site, long remaining) -> void {
    if (site + 1 == L) {
      eta[site] = remaining;
      fn(static_cast<const std::vector<long>&>(eta));
      return;
    }
    for (long n = remaining; n >= 0; --n) {
      eta[site] = n;
      self(self, site + 1, remaining - n);
    }
  };
  fill(fill, 0, N);
}

/// max over Sigma_N of |L_N H - L H - 1/2 sum_j (g_j(N x_j) - m_j) Delta_j H|.
template <SmoothFunction F>
double texp_residual_at(const ChainSpec& chain, double b, const JumpRates& g, const F& h, long N) {
  const std::size_t L = chain.size();
  auto value = [&h](const Vector& y) { return h.value(y); };
  double worst = 0.0;
  Vector x(static_cast<Eigen::Index>(L));
  for_each_configuration(L, N, [&](const std::vector<long>& eta) {
    for (std::size_t j = 0; j < L; ++j) x(static_cast<Eigen::Index>(j)) = static_cast<double>(eta[j]) / static_cast<double>(N);
    const double lhs = zrp_generator_apply(chain, N, g, value, x);
    const double lim = limit_generator_apply(chain, b, h, x);
    const Vector lap = edge_laplacians(chain, h.hessian(x));
    double corr = 0.0;
    for (std::size_t j = 0; j < L; ++j)
      corr += 0.5 * (g(chain.measure(static_cast<int>(j)), eta[j]) - chain.measure(static_cast<int>(j))) * lap(static_cast<Eigen::Index>(j));
    worst = std::max(worst, std::abs(lhs - lim - corr));
  });
  return worst;
}

template <SmoothFunction F>
std::vector<double> texp_residual(const ChainSpec& chain, double b, const JumpRates& g, const F& h,
                                  std::span<const long> Ns) {
  std::vector<double> out;
  out.reserve(Ns.size());
  for (long N : Ns) out.push_back(texp_residual_at(chain, b, g, h, N));
  return out;
}

// ---------------------------------------------------------------------------
// Martingale residuals

/// H(X_T) - H(X_0) - int_0^T (G H)(X_s) ds on a recorded path, with the
/// time integral by the trapezoid rule on the sample grid.
template <SmoothFunction F, class Evaluator>
double martingale_increment(const PathSample& path, const F& h, Evaluator&& generator) {
  if (path.size() == 0) throw Error(ErrorKind::EmptyInput, "empty path");
  double integral = 0.0;
  double prev = generator(path.points.front());
  for (std::size_t i = 1; i < path.size(); ++i) {
    const double cur = generator(path.points[i]);
    integral += 0.5 * (prev + cur) * (path.times[i] - path.times[i - 1]);
    prev = cur;
  }
  return h.value(path.points.back()) - h.value(path.points.front()) - integral;
}

template <SmoothFunction F, class Evaluator>
RunningStats martingale_residual(std::span<const PathSample> paths, const F& h, Evaluator&& generator) {
  RunningStats s;
  for (const auto& p : paths) s.add(martingale_increment(p, h, generator));
  return s;
}

/// Exact Dynkin residual for one ZRP path on [0, T]: L_N H is constant
/// between events, so the time integral is a finite sum.
template <SmoothFunction F>
double zrp_dynkin_increment(const ZrpConfig& cfg, const F& h, std::span<const long> eta0, std::uint64_t path) {
  const auto L = static_cast<Eigen::Index>(cfg.chain.size());
  auto value = [&h](const Vector& y) { return h.value(y); };
  double integral = 0.0;
  Vector x(L);
  auto observer = [&](double t0, double t1, const std::vector<long>& eta) {
    for (Eigen::Index j = 0; j < L; ++j) x(j) = static_cast<double>(eta[static_cast<std::size_t>(j)]) / static_cast<double>(cfg.N);
    integral += zrp_generator_apply(cfg, value, x) * (t1 - t0);
  };
  const ZrpPath p = simulate_zrp_path(cfg, eta0, path, observer);
  Vector x0(L), xT(L);
  for (Eigen::Index j = 0; j < L; ++j) {
    x0(j) = static_cast<double>(eta0[static_cast<std::size_t>(j)]) / static_cast<double>(cfg.N);
    xT(j) = static_cast<double>(p.final_state.eta[static_cast<std::size_t>(j)]) / static_cast<double>(cfg.N);
  }
  return h.value(xT) - h.value(x0) - integral;
}

// ---------------------------------------------------------------------------
// Ensembles

struct ZrpOutcome {
  CondensationRecord record;
  std::uint64_t events = 0;
};

inline std::vector<ZrpOutcome> run_zrp_ensemble(const ZrpConfig& cfg, std::span<const long> eta0, std::size_t paths) {
  std::vector<long> start(eta0.begin(), eta0.end());
  return run_ensemble(paths, [&](std::size_t i) {
    ZrpPath p = simulate_zrp_path(cfg, start, i);
    return ZrpOutcome{p.condensation, p.events};
  });
}

struct DiffusionOutcome {
  AbsorptionTrace absorption;
  std::optional<double> condensation_time;
  int condensation_site = -1;
  double stop_time = 0.0;
  std::uint64_t steps = 0;
};

inline std::vector<DiffusionOutcome> run_diffusion_ensemble(const DiffusionConfig& cfg, const Vector& x0,
                                                            std::size_t paths, const TraceCache& cache) {
  return run_ensemble(paths, [&](std::size_t i) {
    DiffusionPath p = simulate_diffusion_path(cfg, x0, i, cache);
    return DiffusionOutcome{std::move(p.absorption), p.condensation_time, p.condensation_site, p.stop_time, p.steps};
  });
}

/// Per-ensemble reductions shared by the CLI and the acceptance suite.
struct ZrpSummary {
  WinnerHistogram winners;
  std::vector<double> condensation_times;
  std::vector<double> first_empty_times;
  std::uint64_t incomplete = 0;  // no condensation before the horizon
  std::uint64_t events = 0;
};

inline ZrpSummary summarize_zrp(std::span<const ZrpOutcome> out, const ChainSpec& chain) {
  ZrpSummary s;
  std::vector<int> w;
  for (const auto& o : out) {
    s.events += o.events;
    if (o.record.first_empty_time) s.first_empty_times.push_back(*o.record.first_empty_time);
    if (!o.record.time) {
      ++s.incomplete;
      continue;
    }
    w.push_back(o.record.winner);
    s.condensation_times.push_back(*o.record.time);
  }
  s.winners = w.empty() ? WinnerHistogram{std::vector<std::uint64_t>(chain.size(), 0), 0, "zrp", chain_fingerprint(chain)}
                       : winner_distribution(w, chain.size(), "zrp", chain_fingerprint(chain));
  return s;
}

struct DiffusionSummary {
  WinnerHistogram winners;
  std::vector<double> condensation_times;
  std::vector<double> first_absorption_times;
  std::uint64_t untrapped = 0;
  std::uint64_t malformed = 0;  // traces violating the absorption structure
  std::uint64_t steps = 0;
};

inline bool absorption_structure_ok(const AbsorptionTrace& t);

inline DiffusionSummary summarize_diffusion(std::span<const DiffusionOutcome> out, const ChainSpec& chain) {
  DiffusionSummary s;
  std::vector<int> w;
  for (const auto& o : out) {
    s.steps += o.steps;
    if (!absorption_structure_ok(o.absorption)) ++s.malformed;
    if (o.condensation_time) s.condensation_times.push_back(*o.condensation_time);
    if (auto t = o.absorption.first_absorption()) s.first_absorption_times.push_back(*t);
    if (!o.absorption.trapped_vertex) {
      ++s.untrapped;
      continue;
    }
    w.push_back(*o.absorption.trapped_vertex);
  }
  s.winners = w.empty() ? WinnerHistogram{std::vector<std::uint64_t>(chain.size(), 0), 0, "diffusion", chain_fingerprint(chain)}
                       : winner_distribution(w, chain.size(), "diffusion", chain_fingerprint(chain));
  return s;
}

/// Structural checks on an absorption trace: strictly decreasing faces,
/// strictly increasing times.
inline bool absorption_structure_ok(const AbsorptionTrace& t) {
  for (std::size_t n = 1; n < t.events.size(); ++n) {
    if (!t.events[n].active.is_proper_subset_of(t.events[n - 1].active)) return false;
    if (!(t.events[n].time > t.events[n - 1].time)) return false;
  }
  if (t.trapped_vertex && t.events.back().active.size() != 1) return false;
  return true;
}

}  // namespace condensim

#endif  // CONDENSIM_EXPERIMENTS_HPP
