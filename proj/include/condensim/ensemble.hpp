#ifndef CONDENSIM_ENSEMBLE_HPP
#define CONDENSIM_ENSEMBLE_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace condensim {

/// Number of workers used for path ensembles (at least 1).
inline std::size_t worker_count() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

/// Runs fn(i) for i in [0, count) across worker threads and returns the
/// results indexed by i. Each path owns its RNG stream, so the output does
/// not depend on scheduling.
template <class Fn>
auto run_ensemble(std::size_t count, Fn&& fn, std::size_t workers = worker_count()) {
  using Result = decltype(fn(std::size_t{0}));
  std::vector<Result> results(count);
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) results[i] = fn(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          results[i] = fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(count);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace condensim

#endif  // CONDENSIM_ENSEMBLE_HPP
