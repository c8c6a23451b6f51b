#ifndef CONDENSIM_STATS_HPP
#define CONDENSIM_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "condensim/error.hpp"

namespace condensim {

/// Welford running moments; merge() is associative so ensemble reductions
/// give the same answer in any grouping (up to round-off).
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }

  void merge(const RunningStats& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(n_ + o.n_);
    const double delta = o.mean_ - mean_;
    mean_ += delta * static_cast<double>(o.n_) / n;
    m2_ += o.m2_ + delta * delta * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
    n_ += o.n_;
  }

  std::uint64_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  double stderr_mean() const { return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

inline RunningStats summarize(std::span<const double> xs) {
  RunningStats s;
  for (double x : xs) s.add(x);
  return s;
}

/// Total variation distance between the empirical laws of two count vectors.
inline double tv_distance(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::MismatchedChains, "histograms have different supports");
  double na = 0.0, nb = 0.0;
  for (auto c : a) na += static_cast<double>(c);
  for (auto c : b) nb += static_cast<double>(c);
  if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::EmptyInput, "empty histogram");
  double tv = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j)
    tv += std::abs(static_cast<double>(a[j]) / na - static_cast<double>(b[j]) / nb);
  return 0.5 * tv;
}

/// Plug-in standard error of the difference p_hat - q_hat summed in TV:
/// 0.5 * sqrt(sum_j p_j(1-p_j)/n_a + q_j(1-q_j)/n_b).
inline double tv_standard_error(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  double na = 0.0, nb = 0.0;
  for (auto c : a) na += static_cast<double>(c);
  for (auto c : b) nb += static_cast<double>(c);
  double v = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double p = static_cast<double>(a[j]) / na;
    const double q = static_cast<double>(b[j]) / nb;
    v += p * (1.0 - p) / na + q * (1.0 - q) / nb;
  }
  return 0.5 * std::sqrt(v);
}

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Two-sample chi-square homogeneity test on a 2 x K table; categories
/// empty in both samples are dropped.
inline ChiSquareResult chi_square_two_sample(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::MismatchedChains, "histograms have different supports");
  double na = 0.0, nb = 0.0;
  for (auto c : a) na += static_cast<double>(c);
  for (auto c : b) nb += static_cast<double>(c);
  if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::EmptyInput, "empty histogram");
  const double n = na + nb;
  ChiSquareResult r;
  int used = 0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double col = static_cast<double>(a[j] + b[j]);
    if (col == 0.0) continue;
    ++used;
    const double ea = na * col / n, eb = nb * col / n;
    r.statistic += (static_cast<double>(a[j]) - ea) * (static_cast<double>(a[j]) - ea) / ea;
    r.statistic += (static_cast<double>(b[j]) - eb) * (static_cast<double>(b[j]) - eb) / eb;
  }
  r.dof = std::max(used - 1, 0);
  r.p_value = r.dof > 0 ? boost::math::gamma_q(0.5 * r.dof, 0.5 * r.statistic) : 1.0;
  return r;
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov distance sup_t |F_a(t) - F_b(t)| with the
/// asymptotic Kolmogorov p-value.
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::EmptyInput, "empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  KsResult r;
  r.statistic = d;
  const double ne = na * nb / (na + nb);
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    p += term;
    if (std::abs(term) < 1e-12) break;
  }
  r.p_value = std::clamp(p, 0.0, 1.0);
  if (lambda < 1e-3) r.p_value = 1.0;
  return r;
}

}  // namespace condensim

#endif  // CONDENSIM_STATS_HPP
