#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "segvirt/segment_allocator.hpp"

namespace segvirt::oracle {

/// Occupancy of a machine at 4 KiB granularity: bit set = page not free
/// (reserved or allocated).
class PageBitmap {
 public:
  PageBitmap(Bytes total_bytes, Bytes reserved_bytes)
      : pages_(total_bytes / kPageSize), words_((pages_ + 63) / 64, 0) {
    set_range(0, reserved_bytes, true);
  }

  /// Marks a granted range; throws if any page was already occupied.
  void occupy(Bytes base, Bytes limit) { set_range(base, limit, true); }
  /// Clears a released range; throws if any page was already free.
  void vacate(Bytes base, Bytes limit) { set_range(base, limit, false); }

  bool occupied(Bytes addr) const {
    const auto p = addr / kPageSize;
    return (words_[p / 64] >> (p % 64)) & 1u;
  }

  std::size_t occupied_pages() const {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  /// Occupancy implied by a free list: everything outside free segments.
  static PageBitmap from_free_segments(Bytes total_bytes,
                                       std::span<const SegmentDescriptor> free_segments) {
    PageBitmap b(total_bytes, 0);
    std::fill(b.words_.begin(), b.words_.end(), ~std::uint64_t{0});
    for (const auto& s : free_segments) b.clear_words(s.base / kPageSize, s.limit / kPageSize);
    b.trim();
    return b;
  }

  bool operator==(const PageBitmap& other) const { return words_ == other.words_; }

 private:
  // Unchecked clear of pages [first, last), a word at a time.
  void clear_words(std::uint64_t first, std::uint64_t last) {
    while (first < last) {
      const auto bit = first % 64;
      const auto n = std::min<std::uint64_t>(64 - bit, last - first);
      const std::uint64_t mask = n == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1) << bit;
      words_[first / 64] &= ~mask;
      first += n;
    }
  }

  // Clears the bits past the last page.
  void trim() {
    if (pages_ % 64) words_.back() &= (std::uint64_t{1} << (pages_ % 64)) - 1;
  }

  void set_range(Bytes base, Bytes limit, bool value) {
    if (base % kPageSize != 0 || limit % kPageSize != 0 || limit < base ||
        limit / kPageSize > pages_) {
      throw std::logic_error("page bitmap: range not page-aligned or out of bounds");
    }
    for (auto p = base / kPageSize; p < limit / kPageSize; ++p) {
      auto& w = words_[p / 64];
      const std::uint64_t bit = std::uint64_t{1} << (p % 64);
      if (((w & bit) != 0) == value) {
        throw std::logic_error(value ? "page bitmap: page already occupied"
                                     : "page bitmap: page already free");
      }
      w ^= bit;
    }
  }

  std::uint64_t pages_;
  std::vector<std::uint64_t> words_;
};

}  // namespace segvirt::oracle
