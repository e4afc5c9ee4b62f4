#pragma once

#include <cstdint>
#include <list>
#include <map>
#include <optional>
#include <vector>

#include "segvirt/segment_allocator.hpp"
#include "segvirt/units.hpp"

namespace segvirt {

/// Binary buddy allocator over 4 KiB pages, used as the stock-hypervisor
/// baseline. Free lists are LIFO per order. A demand is served greedily with
/// the largest blocks available, and the granted pages are reported as
/// maximal contiguous runs, so k is the run count.
///
/// Demands are rounded up to whole pages.
class BuddyAllocator {
 public:
  static constexpr unsigned kDefaultMaxOrder = 18;  // 1 GiB blocks

  BuddyAllocator(Bytes total_bytes, Bytes reserved_bytes, unsigned max_order = kDefaultMaxOrder);

  Bytes total_bytes() const noexcept { return total_pages_ * kPageSize; }
  Bytes reserved_bytes() const noexcept { return first_page_ * kPageSize; }
  Bytes free_bytes() const noexcept { return free_pages_ * kPageSize; }
  unsigned max_order() const noexcept { return max_order_; }

  /// Throws InvalidSizeError for a zero demand, InsufficientMemoryError when
  /// the rounded demand exceeds free memory (state untouched).
  VMAllocation allocate(VmId vm_id, Bytes demand, Timestamp now);

  /// Frees every page of the allocation's runs. Throws OverlapError, leaving
  /// the state untouched, if a run is not page-aligned or touches free pages.
  void release(const VMAllocation& allocation);

  /// Free memory as maximal coalesced runs, ascending (date is always 0).
  std::vector<SegmentDescriptor> free_layout() const;

  /// Number of free blocks per order (index = order).
  std::vector<std::size_t> free_block_counts() const;

 private:
  using Page = std::uint64_t;
  struct FreeEntry {
    unsigned order;
    std::list<Page>::iterator pos;
  };

  void push_free(Page start, unsigned order);
  void remove_free(Page start);
  bool is_free_block(Page start, unsigned order) const;
  bool overlaps_free(Page first, Page last) const;
  std::optional<Page> take_block(unsigned order);
  void free_block(Page start, unsigned order);

  Page first_page_;
  Page total_pages_;
  unsigned max_order_;
  Page free_pages_ = 0;
  std::vector<std::list<Page>> free_lists_;
  std::map<Page, FreeEntry> free_index_;
};

}  // namespace segvirt
