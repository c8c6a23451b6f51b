#ifndef CONDENSIM_PATH_HPP
#define CONDENSIM_PATH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "condensim/chain.hpp"
#include "condensim/site_set.hpp"

namespace condensim {

/// Time-indexed simplex points in macroscopic time, from either engine.
/// `active` is the surviving coordinate set for diffusion samples and empty
/// for ZRP samples.
struct PathSample {
  std::vector<double> times;
  std::vector<Vector> points;
  std::vector<SiteSet> active;
  std::string engine;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;

  std::size_t size() const { return times.size(); }

  void push(double t, Vector x, SiteSet b) {
    times.push_back(t);
    points.push_back(std::move(x));
    active.push_back(b);
  }
};

}  // namespace condensim

#endif  // CONDENSIM_PATH_HPP
