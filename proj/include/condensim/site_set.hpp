#ifndef CONDENSIM_SITE_SET_HPP
#define CONDENSIM_SITE_SET_HPP

#include <bit>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace condensim {

/// Subset of S = {0, ..., L-1} stored as a bitmask (L <= 32).
/// Sites are 0-based internally; configs and CSV output use 1-based labels.
class SiteSet {
 public:
  static constexpr std::size_t max_sites = 32;

  constexpr SiteSet() = default;
  constexpr explicit SiteSet(std::uint32_t mask) : mask_(mask) {}
  SiteSet(std::initializer_list<int> sites) {
    for (int s : sites) mask_ |= bit(s);
  }

  static constexpr SiteSet full(std::size_t L) {
    return SiteSet(L >= 32 ? ~std::uint32_t{0} : ((std::uint32_t{1} << L) - 1));
  }
  static SiteSet from_sites(const std::vector<int>& sites) {
    SiteSet s;
    for (int j : sites) s.insert(j);
    return s;
  }

  constexpr std::uint32_t mask() const { return mask_; }
  constexpr bool contains(int j) const { return (mask_ & bit(j)) != 0; }
  constexpr std::size_t size() const { return static_cast<std::size_t>(std::popcount(mask_)); }
  constexpr bool empty() const { return mask_ == 0; }
  constexpr void insert(int j) { mask_ |= bit(j); }
  constexpr void erase(int j) { mask_ &= ~bit(j); }
  constexpr SiteSet complement(std::size_t L) const { return SiteSet(full(L).mask_ & ~mask_); }
  constexpr bool is_subset_of(SiteSet other) const { return (mask_ & ~other.mask_) == 0; }
  constexpr bool is_proper_subset_of(SiteSet other) const {
    return is_subset_of(other) && mask_ != other.mask_;
  }

  /// Members in increasing order.
  std::vector<int> members() const {
    std::vector<int> out;
    out.reserve(size());
    for (std::uint32_t m = mask_; m != 0; m &= m - 1) out.push_back(std::countr_zero(m));
    return out;
  }

  /// Position of site j among the sorted members, or -1.
  int index_of(int j) const {
    if (!contains(j)) return -1;
    return std::popcount(mask_ & (bit(j) - 1));
  }

  friend constexpr bool operator==(SiteSet, SiteSet) = default;

 private:
  static constexpr std::uint32_t bit(int j) { return std::uint32_t{1} << j; }
  std::uint32_t mask_ = 0;
};

/// All subsets of {0..L-1} with at least `min_size` elements, in mask order.
inline std::vector<SiteSet> subsets_of_size_at_least(std::size_t L, std::size_t min_size) {
  std::vector<SiteSet> out;
  const std::uint32_t top = SiteSet::full(L).mask();
  for (std::uint32_t m = 1; m <= top && m != 0; ++m) {
    SiteSet s(m);
    if (s.size() >= min_size) out.push_back(s);
    if (m == top) break;
  }
  return out;
}

}  // namespace condensim

#endif  // CONDENSIM_SITE_SET_HPP
