#include "segvirt/buddy_allocator.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "segvirt/errors.hpp"

namespace segvirt {

namespace {

constexpr std::uint64_t block_pages(unsigned order) { return std::uint64_t{1} << order; }

}  // namespace

BuddyAllocator::BuddyAllocator(Bytes total_bytes, Bytes reserved_bytes, unsigned max_order)
    : first_page_(0), total_pages_(0), max_order_(max_order), free_lists_(max_order + 1) {
  if (max_order > 40) throw InvalidSizeError("buddy max order too large");
  if (total_bytes % kPageSize != 0 || reserved_bytes % kPageSize != 0) {
    throw InvalidSizeError("buddy allocator sizes must be multiples of 4 KiB");
  }
  if (total_bytes == 0 || reserved_bytes >= total_bytes) {
    throw InvalidSizeError("buddy allocator needs total_bytes > reserved_bytes");
  }
  first_page_ = reserved_bytes / kPageSize;
  total_pages_ = total_bytes / kPageSize;

  // Maximal aligned blocks covering the user region; pushed high-to-low so
  // the lowest block sits at the head of its list.
  std::vector<std::pair<Page, unsigned>> blocks;
  for (Page p = first_page_; p < total_pages_;) {
    unsigned order = max_order_;
    while (order > 0 && (p % block_pages(order) != 0 || p + block_pages(order) > total_pages_)) {
      --order;
    }
    blocks.emplace_back(p, order);
    p += block_pages(order);
  }
  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) push_free(it->first, it->second);
}

void BuddyAllocator::push_free(Page start, unsigned order) {
  auto& list = free_lists_[order];
  list.push_front(start);
  free_index_.emplace(start, FreeEntry{order, list.begin()});
  free_pages_ += block_pages(order);
}

void BuddyAllocator::remove_free(Page start) {
  auto it = free_index_.find(start);
  free_lists_[it->second.order].erase(it->second.pos);
  free_pages_ -= block_pages(it->second.order);
  free_index_.erase(it);
}

bool BuddyAllocator::is_free_block(Page start, unsigned order) const {
  auto it = free_index_.find(start);
  return it != free_index_.end() && it->second.order == order;
}

bool BuddyAllocator::overlaps_free(Page first, Page last) const {
  auto it = free_index_.lower_bound(first);
  if (it != free_index_.end() && it->first < last) return true;
  if (it != free_index_.begin()) {
    auto prev = std::prev(it);
    if (prev->first + block_pages(prev->second.order) > first) return true;
  }
  return false;
}

std::optional<BuddyAllocator::Page> BuddyAllocator::take_block(unsigned order) {
  unsigned found = order;
  while (found <= max_order_ && free_lists_[found].empty()) ++found;
  if (found > max_order_) return std::nullopt;

  const Page start = free_lists_[found].front();
  remove_free(start);
  while (found > order) {
    --found;
    push_free(start + block_pages(found), found);
  }
  return start;
}

void BuddyAllocator::free_block(Page start, unsigned order) {
  while (order < max_order_) {
    const Page buddy = start ^ block_pages(order);
    if (!is_free_block(buddy, order)) break;
    remove_free(buddy);
    start = std::min(start, buddy);
    ++order;
  }
  push_free(start, order);
}

VMAllocation BuddyAllocator::allocate(VmId vm_id, Bytes demand, Timestamp now) {
  if (demand == 0) throw InvalidSizeError("allocation demand must be positive");
  const Page pages = (demand + kPageSize - 1) / kPageSize;
  if (pages > free_pages_) {
    throw InsufficientMemoryError("demand of " + std::to_string(demand) + " bytes exceeds " +
                                  std::to_string(free_bytes()) + " free bytes");
  }

  std::vector<std::pair<Page, unsigned>> blocks;
  Page remaining = pages;
  for (int order = static_cast<int>(max_order_); order >= 0 && remaining > 0; --order) {
    const auto o = static_cast<unsigned>(order);
    while (remaining >= block_pages(o)) {
      auto block = take_block(o);
      if (!block) break;
      blocks.emplace_back(*block, o);
      remaining -= block_pages(o);
    }
  }

  std::sort(blocks.begin(), blocks.end());
  VMAllocation result;
  result.vm_id = std::move(vm_id);
  for (const auto& [start, order] : blocks) {
    const Bytes base = start * kPageSize;
    const Bytes limit = (start + block_pages(order)) * kPageSize;
    if (!result.segments.empty() && result.segments.back().limit == base) {
      result.segments.back().limit = limit;
    } else {
      result.segments.push_back({base, limit, now});
    }
  }
  return result;
}

void BuddyAllocator::release(const VMAllocation& allocation) {
  std::vector<SegmentDescriptor> runs = allocation.segments;
  std::sort(runs.begin(), runs.end(),
            [](const auto& a, const auto& b) { return a.base < b.base; });
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i - 1].limit > runs[i].base) {
      throw OverlapError("released runs of VM '" + allocation.vm_id + "' overlap each other");
    }
  }
  for (const auto& s : runs) {
    if (s.base % kPageSize != 0 || s.limit % kPageSize != 0 || s.base >= s.limit ||
        s.base / kPageSize < first_page_ || s.limit / kPageSize > total_pages_) {
      throw OverlapError("released run of VM '" + allocation.vm_id + "' is not a valid page run");
    }
    if (overlaps_free(s.base / kPageSize, s.limit / kPageSize)) {
      throw OverlapError("released run of VM '" + allocation.vm_id + "' intersects free pages");
    }
  }
  for (const auto& s : runs) {
    Page p = s.base / kPageSize;
    const Page end = s.limit / kPageSize;
    while (p < end) {
      unsigned order = max_order_;
      while (order > 0 && (p % block_pages(order) != 0 || p + block_pages(order) > end)) --order;
      free_block(p, order);
      p += block_pages(order);
    }
  }
}

std::vector<SegmentDescriptor> BuddyAllocator::free_layout() const {
  std::vector<SegmentDescriptor> runs;
  for (const auto& [start, entry] : free_index_) {
    const Bytes base = start * kPageSize;
    const Bytes limit = (start + block_pages(entry.order)) * kPageSize;
    if (!runs.empty() && runs.back().limit == base) {
      runs.back().limit = limit;
    } else {
      runs.push_back({base, limit, 0});
    }
  }
  return runs;
}

std::vector<std::size_t> BuddyAllocator::free_block_counts() const {
  std::vector<std::size_t> counts(max_order_ + 1, 0);
  for (std::size_t o = 0; o <= max_order_; ++o) counts[o] = free_lists_[o].size();
  return counts;
}

}  // namespace segvirt
