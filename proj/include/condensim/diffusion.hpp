#ifndef CONDENSIM_DIFFUSION_HPP
#define CONDENSIM_DIFFUSION_HPP

// Euler-Maruyama integration of the absorbed diffusion on the simplex.
// When coordinates vanish the path continues on the face spanned by the
// survivors, driven by the trace chain on that face, until it is trapped at
// a vertex.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <sstream>
#include <unordered_map>
#include <utility>
#include <vector>

#include "condensim/chain.hpp"
#include "condensim/path.hpp"
#include "condensim/rng.hpp"

namespace condensim {

/// Edge columns sigma_e = sqrt(m_j r^B(j,k)) (e_k - e_j) for ordered j != k
/// with r^B(j,k) > 0. sum_e sigma_e sigma_e^T = 2 a_s^B.
struct NoiseBasis {
  Matrix columns;                          // |B| x E, local coordinates
  std::vector<std::pair<int, int>> edges;  // local (j, k) per column

  std::size_t edge_count() const { return edges.size(); }
};

inline NoiseBasis noise_basis(const TraceChainSpec& trace) {
  const auto n = static_cast<int>(trace.size());
  NoiseBasis nb;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      if (j != k && trace.rates(j, k) > 0.0) nb.edges.emplace_back(j, k);
  nb.columns = Matrix::Zero(n, static_cast<Eigen::Index>(nb.edges.size()));
  for (std::size_t e = 0; e < nb.edges.size(); ++e) {
    const auto [j, k] = nb.edges[e];
    const double s = std::sqrt(trace.measure(j) * trace.rates(j, k));
    nb.columns(k, static_cast<Eigen::Index>(e)) = s;
    nb.columns(j, static_cast<Eigen::Index>(e)) = -s;
  }
  return nb;
}

/// Trace chain of a face together with its noise basis.
struct FaceData {
  TraceChainSpec trace;
  NoiseBasis noise;
};

/// Lazily memoized face data for every subset with >= 2 sites. Safe to
/// share between worker threads.
class TraceCache {
 public:
  explicit TraceCache(ChainSpec chain) : chain_(std::move(chain)) {}

  const ChainSpec& chain() const { return chain_; }

  std::shared_ptr<const FaceData> get(SiteSet B) const {
    {
      std::shared_lock lock(mutex_);
      auto it = faces_.find(B.mask());
      if (it != faces_.end()) return it->second;
    }
    auto built = std::make_shared<FaceData>();
    built->trace = trace_rates(chain_, B);
    built->noise = noise_basis(built->trace);
    std::unique_lock lock(mutex_);
    auto [it, inserted] = faces_.emplace(B.mask(), std::move(built));
    return it->second;
  }

 private:
  ChainSpec chain_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<std::uint32_t, std::shared_ptr<const FaceData>> faces_;
};

struct DiffusionConfig {
  ChainSpec chain;
  double b = 1.5;
  double dt_base = 1e-3;
  double eps_abs = 1e-4;
  /// Additional step control: dt <= drift_cap * x_j / |b_j(x)| for every
  /// coordinate drifting toward the boundary. Infinity disables it.
  double drift_cap = 0.25;
  double noise_scale = 1.0;
  std::uint64_t seed = 0;
  /// Macroscopic horizon; infinity runs until the path is trapped.
  double horizon = 100.0;
  /// Stop (and freeze) the path at the first absorption time sigma_1.
  bool stop_at_first_absorption = false;
  std::vector<double> sample_times;
  /// Threshold for the condensation-time record (max_j x_j >= 1 - delta).
  double delta = 0.05;
  bool allow_subcritical = false;
  std::uint64_t config_hash = 0;

  double eps_guard() const { return 10.0 * eps_abs; }
};

/// Current face, position and time. x is full length with x_j = 0 off B.
struct DiffusionState {
  SiteSet active;
  Vector x;
  double t = 0.0;
  std::shared_ptr<const FaceData> face;  // null when |B| = 1

  const TraceChainSpec& trace() const { return face->trace; }
};

struct AbsorptionEvent {
  double time = 0.0;
  SiteSet active;
};

/// (sigma_n, B_n) for n = 0, 1, ...; events[0] is (0, B_0).
struct AbsorptionTrace {
  std::vector<AbsorptionEvent> events;
  std::optional<int> trapped_vertex;
  double trapped_time = std::numeric_limits<double>::quiet_NaN();

  /// sigma_1, if the path left its initial face.
  std::optional<double> first_absorption() const {
    if (events.size() < 2) return std::nullopt;
    return events[1].time;
  }
};

struct DiffusionPath {
  PathSample sample;
  AbsorptionTrace absorption;
  std::optional<double> condensation_time;
  int condensation_site = -1;
  double stop_time = 0.0;
  std::uint64_t steps = 0;
};

inline void check_diffusion_config(const DiffusionConfig& cfg) {
  if (!(cfg.b > 1.0) && !cfg.allow_subcritical)
    throw Error(ErrorKind::RangeError, "b <= 1: absorption is not expected (override with allow_subcritical)");
  if (!(cfg.dt_base > 0.0)) throw Error(ErrorKind::RangeError, "dt_base must be positive");
  if (!(cfg.eps_abs > 0.0 && cfg.eps_abs < 0.1)) throw Error(ErrorKind::RangeError, "eps_abs must lie in (0, 0.1)");
  if (!(cfg.noise_scale >= 0.0 && cfg.noise_scale <= 1.0)) throw Error(ErrorKind::RangeError, "noise_scale must lie in [0,1]");
  if (!(cfg.drift_cap > 0.0)) throw Error(ErrorKind::RangeError, "drift_cap must be positive");
  if (!(cfg.horizon >= 0.0)) throw Error(ErrorKind::RangeError, "horizon must be nonnegative");
  for (std::size_t i = 1; i < cfg.sample_times.size(); ++i)
    if (!(cfg.sample_times[i] > cfg.sample_times[i - 1]))
      throw Error(ErrorKind::RangeError, "sample times must be strictly increasing");
}

namespace detail {

/// Restricted drift into `out` (local coordinates of the face).
inline void face_drift(const TraceChainSpec& trace, double b, const Vector& x, Vector& out) {
  const auto n = static_cast<Eigen::Index>(trace.size());
  out.setZero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xi = x(trace.members[static_cast<std::size_t>(i)]);
    if (!(xi > 0.0)) {
      std::ostringstream os;
      os << "coordinate " << trace.members[static_cast<std::size_t>(i)] + 1 << " is " << xi << " inside the active face";
      throw Error(ErrorKind::ZeroCoordinate, os.str());
    }
    out.noalias() += (b * trace.measure(i) / xi) * trace.drift_vectors.row(i).transpose();
  }
}

}  // namespace detail

/// b^B(x) = b sum_{j in B} (m_j / x_j) v^B_j, in local coordinates of B.
inline Vector drift(const DiffusionState& state, double b) {
  if (state.active.size() < 2 || !state.face) throw Error(ErrorKind::SubsetTooSmall, "drift needs |B| >= 2");
  Vector out;
  detail::face_drift(state.trace(), b, state.x, out);
  return out;
}

/// One Euler-Maruyama step x' = x + b(x) dt + sqrt(dt) sum_e sigma_e xi_e,
/// renormalized onto the hyperplane. Negative coordinates are kept; the
/// caller decides about absorption.
inline Vector em_step(const DiffusionState& state, double b, double dt, std::span<const double> draws,
                      double noise_scale = 1.0) {
  const auto& face = *state.face;
  if (draws.size() != face.noise.edge_count())
    throw Error(ErrorKind::RangeError, "need one Gaussian draw per edge of the face");
  Vector d = drift(state, b);
  Vector local = d * dt;
  const double sq = std::sqrt(dt) * noise_scale;
  if (sq != 0.0)
    for (std::size_t e = 0; e < draws.size(); ++e)
      local += (sq * draws[e]) * face.noise.columns.col(static_cast<Eigen::Index>(e));
  Vector out = state.x;
  for (std::size_t i = 0; i < face.trace.members.size(); ++i)
    out(face.trace.members[i]) += local(static_cast<Eigen::Index>(i));
  const double s = out.sum();
  if (std::abs(s - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "step left the simplex hyperplane (sum " << s << ")";
    throw Error(ErrorKind::StepBlowup, os.str());
  }
  return out / s;
}

/// Per-step observer: called with (t0, t1, x(t0), x(t1), B at t0) for every
/// accepted step, where x(t1) is after absorption handling.
struct NoDiffusionObserver {
  void operator()(double, double, const Vector&, const Vector&, SiteSet) const {}
};

/// Integrates one path from x0 using stream `path_index` of cfg.seed.
/// Step size: min(dt_base, dt_base (min_B x / eps_guard)^2, drift_cap-limited),
/// truncated to land on sample times and the horizon. Coordinates at or
/// below eps_abs (or negative) are set to 0 and the rest renormalized.
template <class Observer = NoDiffusionObserver>
DiffusionPath simulate_diffusion_path(const DiffusionConfig& cfg, const Vector& x0, std::uint64_t path_index,
                                      const TraceCache& cache, Observer&& observer = Observer{}) {
  check_diffusion_config(cfg);
  const auto L = static_cast<Eigen::Index>(cfg.chain.size());
  if (x0.size() != L) throw Error(ErrorKind::NonSimplexStart, "start point has wrong length");
  if ((x0.array() < 0.0).any() || std::abs(x0.sum() - 1.0) > 1e-9)
    throw Error(ErrorKind::NonSimplexStart, "start point is not on the simplex");

  DiffusionPath out;
  out.sample.engine = "diffusion";
  out.sample.seed = cfg.seed;
  out.sample.config_hash = cfg.config_hash;

  DiffusionState st;
  st.x = x0;
  // Coordinates already inside the absorption layer start absorbed.
  for (Eigen::Index j = 0; j < L; ++j)
    if (st.x(j) <= cfg.eps_abs) st.x(j) = 0.0;
  st.x /= st.x.sum();
  for (Eigen::Index j = 0; j < L; ++j)
    if (st.x(j) > 0.0) st.active.insert(static_cast<int>(j));
  st.t = 0.0;
  out.absorption.events.push_back({0.0, st.active});
  if (st.active.size() >= 2) st.face = cache.get(st.active);

  auto check_condensed = [&](double t) {
    if (out.condensation_time) return;
    Eigen::Index arg = 0;
    if (st.x.maxCoeff(&arg) >= 1.0 - cfg.delta) {
      out.condensation_time = t;
      out.condensation_site = static_cast<int>(arg);
    }
  };
  check_condensed(0.0);

  const auto& times = cfg.sample_times;
  std::size_t next_sample = 0;
  auto emit_at_current = [&] {
    while (next_sample < times.size() && times[next_sample] <= st.t) {
      out.sample.push(times[next_sample], st.x, st.active);
      ++next_sample;
    }
  };
  emit_at_current();

  Vector d, local, x_prev;
  std::vector<double> draws;
  const double eps_guard = cfg.eps_guard();
  bool stopped = false;

  while (!stopped && st.active.size() >= 2 && st.t < cfg.horizon) {
    const FaceData& face = *st.face;
    const auto& members = face.trace.members;
    const auto n = static_cast<Eigen::Index>(members.size());
    detail::face_drift(face.trace, cfg.b, st.x, d);

    double xmin = 1.0;
    double dt = cfg.dt_base;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double xi = st.x(members[static_cast<std::size_t>(i)]);
      xmin = std::min(xmin, xi);
      if (d(i) < 0.0) dt = std::min(dt, cfg.drift_cap * xi / -d(i));
    }
    dt = std::min(dt, cfg.dt_base * (xmin / eps_guard) * (xmin / eps_guard));
    double t_target = st.t + dt;
    const double t_limit = std::min(cfg.horizon, next_sample < times.size() ? times[next_sample] : cfg.horizon);
    if (t_target >= t_limit) {
      t_target = t_limit;
      dt = t_limit - st.t;
    }

    CounterRng rng(stream_key(cfg.seed, path_index, out.steps));
    const std::size_t E = face.noise.edge_count();
    draws.resize(E);
    for (std::size_t e = 0; e < E; ++e) draws[e] = rng.normal();

    local = d * dt;
    const double sq = std::sqrt(dt) * cfg.noise_scale;
    if (sq != 0.0)
      for (std::size_t e = 0; e < E; ++e) local.noalias() += (sq * draws[e]) * face.noise.columns.col(static_cast<Eigen::Index>(e));

    x_prev = st.x;
    for (Eigen::Index i = 0; i < n; ++i) st.x(members[static_cast<std::size_t>(i)]) += local(i);
    const double s = st.x.sum();
    if (std::abs(s - 1.0) > 1e-9) {
      std::ostringstream os;
      os << "step left the simplex hyperplane (sum " << s << ") at t=" << st.t << " with dt=" << dt;
      throw Error(ErrorKind::StepBlowup, os.str());
    }
    st.x /= s;

    SiteSet survivors = st.active;
    for (int j : members)
      if (st.x(j) <= cfg.eps_abs) survivors.erase(j);
    if (survivors.size() == 0) {
      // Only possible for large L with a wide layer: keep the largest coordinate.
      Eigen::Index arg = 0;
      st.x.maxCoeff(&arg);
      survivors.insert(static_cast<int>(arg));
    }
    const SiteSet before = st.active;
    if (survivors != st.active) {
      for (int j : members)
        if (!survivors.contains(j)) st.x(j) = 0.0;
      st.x /= st.x.sum();
      st.active = survivors;
      out.absorption.events.push_back({t_target, survivors});
      st.face = survivors.size() >= 2 ? cache.get(survivors) : nullptr;
      if (cfg.stop_at_first_absorption) stopped = true;
    }
    st.t = t_target;
    ++out.steps;
    observer(st.t - dt, st.t, x_prev, st.x, before);
    check_condensed(st.t);
    emit_at_current();
  }

  if (st.active.size() == 1) {
    out.absorption.trapped_vertex = st.active.members().front();
    out.absorption.trapped_time = out.absorption.events.back().time;
  }
  out.stop_time = st.t;
  // The path is frozen after trapping or a first-absorption stop.
  while (next_sample < times.size() && times[next_sample] <= cfg.horizon) {
    out.sample.push(times[next_sample], st.x, st.active);
    ++next_sample;
  }
  return out;
}

}  // namespace condensim

#endif  // CONDENSIM_DIFFUSION_HPP
