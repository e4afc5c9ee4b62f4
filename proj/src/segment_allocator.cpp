#include "segvirt/segment_allocator.hpp"

#include <algorithm>
#include <string>

#include "segvirt/errors.hpp"

namespace segvirt {

std::string_view to_string(AllocationPolicy policy) {
  return policy == AllocationPolicy::Opt1 ? "opt1" : "opt2";
}

std::optional<AllocationPolicy> parse_policy(std::string_view text) {
  if (text == "opt1") return AllocationPolicy::Opt1;
  if (text == "opt2") return AllocationPolicy::Opt2;
  return std::nullopt;
}

std::string_view to_string(VmMode mode) { return mode == VmMode::DSn ? "dsn" : "fallback"; }

Bytes VMAllocation::size() const noexcept {
  Bytes total = 0;
  for (const auto& s : segments) total += s.size();
  return total;
}

FreeSegmentList::FreeSegmentList(MachineId machine_id, Bytes total_bytes, Bytes reserved_bytes)
    : machine_id_(machine_id), total_bytes_(total_bytes), reserved_bytes_(reserved_bytes) {
  if (total_bytes == 0 || reserved_bytes >= total_bytes) {
    throw InvalidSizeError("machine needs total_bytes > reserved_bytes (total=" +
                           std::to_string(total_bytes) +
                           ", reserved=" + std::to_string(reserved_bytes) + ")");
  }
  segments_.push_back({reserved_bytes, total_bytes, 0});
  free_bytes_ = total_bytes - reserved_bytes;
}

FreeSegmentList new_machine(Bytes total_bytes, Bytes reserved_bytes, MachineId machine_id) {
  return FreeSegmentList(machine_id, total_bytes, reserved_bytes);
}

Bytes FreeSegmentList::largest_segment() const noexcept {
  Bytes best = 0;
  for (const auto& s : segments_) best = std::max(best, s.size());
  return best;
}

std::optional<FreeSegmentList::Index> FreeSegmentList::exact_fit(Bytes demand) const {
  for (Index i = 0; i < segments_.size(); ++i) {
    if (segments_[i].size() == demand) return i;
  }
  return std::nullopt;
}

// Strict comparisons keep the lowest base on ties since the scan is ascending.
std::optional<FreeSegmentList::Index> FreeSegmentList::largest_above(Bytes demand) const {
  std::optional<Index> best;
  for (Index i = 0; i < segments_.size(); ++i) {
    const Bytes size = segments_[i].size();
    if (size > demand && (!best || size > segments_[*best].size())) best = i;
  }
  return best;
}

FreeSegmentList::Index FreeSegmentList::largest() const {
  Index best = 0;
  for (Index i = 1; i < segments_.size(); ++i) {
    if (segments_[i].size() > segments_[best].size()) best = i;
  }
  return best;
}

FreeSegmentList::Index FreeSegmentList::smallest() const {
  Index best = 0;
  for (Index i = 1; i < segments_.size(); ++i) {
    if (segments_[i].size() < segments_[best].size()) best = i;
  }
  return best;
}

void FreeSegmentList::take_whole(Index idx, Timestamp now, std::vector<SegmentDescriptor>& out) {
  const SegmentDescriptor seg = segments_[idx];
  segments_.erase(segments_.begin() + static_cast<std::ptrdiff_t>(idx));
  out.push_back({seg.base, seg.limit, now});
  free_bytes_ -= seg.size();
  allocated_bytes_ += seg.size();
}

bool FreeSegmentList::take_fitting(Bytes demand, Timestamp now,
                                   std::vector<SegmentDescriptor>& out) {
  if (auto idx = exact_fit(demand)) {
    take_whole(*idx, now, out);
    return true;
  }
  if (auto idx = largest_above(demand)) {
    SegmentDescriptor& seg = segments_[*idx];
    out.push_back({seg.base, seg.base + demand, now});
    // The remainder now starts right after the freshly granted range.
    seg.base += demand;
    seg.date = now;
    free_bytes_ -= demand;
    allocated_bytes_ += demand;
    return true;
  }
  return false;
}

VMAllocation FreeSegmentList::allocate(VmId vm_id, Bytes demand, AllocationPolicy policy,
                                       Timestamp now) {
  if (demand == 0) throw InvalidSizeError("allocation demand must be positive");
  if (demand > free_bytes_) {
    throw InsufficientMemoryError("demand of " + std::to_string(demand) + " bytes exceeds " +
                                  std::to_string(free_bytes_) + " free bytes on machine " +
                                  std::to_string(machine_id_));
  }

  VMAllocation result;
  result.vm_id = std::move(vm_id);
  Bytes residual = demand;
  // Each iteration either finishes or strictly shrinks the residual; the
  // residual never exceeds free_bytes_, so a segment is always available.
  while (residual > 0) {
    if (take_fitting(residual, now, result.segments)) break;
    if (policy == AllocationPolicy::Opt1) {
      while (residual > 0 && !largest_above(residual)) {
        const Index idx = smallest();
        residual -= segments_[idx].size();
        take_whole(idx, now, result.segments);
      }
    } else {
      const Index idx = largest();
      residual -= segments_[idx].size();
      take_whole(idx, now, result.segments);
    }
  }
  return result;
}

std::optional<std::size_t> FreeSegmentList::peek_segment_count(Bytes demand,
                                                               AllocationPolicy policy) const {
  if (demand == 0 || demand > free_bytes_) return std::nullopt;
  if (largest_above(demand) || exact_fit(demand)) return 1;
  FreeSegmentList scratch = *this;
  return scratch.allocate(VmId{}, demand, policy, 0).k();
}

void FreeSegmentList::insert_free(const SegmentDescriptor& range) {
  auto next = std::upper_bound(
      segments_.begin(), segments_.end(), range.base,
      [](Bytes base, const SegmentDescriptor& s) { return base < s.base; });
  const bool joins_next = next != segments_.end() && next->base == range.limit;
  const bool joins_prev = next != segments_.begin() && std::prev(next)->limit == range.base;

  if (joins_prev && joins_next) {
    std::prev(next)->limit = next->limit;
    segments_.erase(next);
  } else if (joins_prev) {
    std::prev(next)->limit = range.limit;
  } else if (joins_next) {
    next->base = range.base;
    next->date = 0;
  } else {
    segments_.insert(next, {range.base, range.limit, 0});
  }
  free_bytes_ += range.size();
  allocated_bytes_ -= range.size();
}

void FreeSegmentList::release(const VMAllocation& allocation, Timestamp /*now*/) {
  std::vector<SegmentDescriptor> sorted = allocation.segments;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.base < b.base; });

  Bytes released = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const SegmentDescriptor& s = sorted[i];
    if (s.base >= s.limit || s.base < reserved_bytes_ || s.limit > total_bytes_) {
      throw OverlapError("released range outside the user region of machine " +
                         std::to_string(machine_id_));
    }
    if (i > 0 && sorted[i - 1].limit > s.base) {
      throw OverlapError("released ranges of VM '" + allocation.vm_id + "' overlap each other");
    }
    auto next = std::upper_bound(
        segments_.begin(), segments_.end(), s.base,
        [](Bytes base, const SegmentDescriptor& f) { return base < f.base; });
    const bool hits_next = next != segments_.end() && next->base < s.limit;
    const bool hits_prev = next != segments_.begin() && std::prev(next)->limit > s.base;
    if (hits_next || hits_prev) {
      throw OverlapError("released range of VM '" + allocation.vm_id +
                         "' intersects free memory on machine " + std::to_string(machine_id_));
    }
    released += s.size();
  }
  if (released > allocated_bytes_) {
    throw OverlapError("release exceeds allocated bytes on machine " +
                       std::to_string(machine_id_));
  }

  for (const auto& s : sorted) insert_free(s);
}

void FreeSegmentList::carve(const SegmentDescriptor& range, Timestamp now) {
  auto next = std::upper_bound(
      segments_.begin(), segments_.end(), range.base,
      [](Bytes base, const SegmentDescriptor& f) { return base < f.base; });
  if (range.base >= range.limit || next == segments_.begin() ||
      std::prev(next)->limit < range.limit) {
    throw OverlapError("carved range is not inside a single free segment");
  }
  auto host = std::prev(next);
  const SegmentDescriptor old = *host;
  if (old.base == range.base && old.limit == range.limit) {
    segments_.erase(host);
  } else if (old.base == range.base) {
    host->base = range.limit;
    host->date = now;
  } else if (old.limit == range.limit) {
    host->limit = range.base;
  } else {
    host->limit = range.base;
    segments_.insert(next, {range.limit, old.limit, now});
  }
  free_bytes_ -= range.size();
  allocated_bytes_ += range.size();
}

void FreeSegmentList::check_invariants() const {
  Bytes sum = 0;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& s = segments_[i];
    if (s.base >= s.limit) throw InconsistencyError("empty or inverted free segment");
    if (s.base < reserved_bytes_ || s.limit > total_bytes_) {
      throw InconsistencyError("free segment outside the user region");
    }
    if (i > 0 && segments_[i - 1].limit >= s.base) {
      throw InconsistencyError("free segments overlap, touch, or are out of order");
    }
    sum += s.size();
  }
  if (sum != free_bytes_) throw InconsistencyError("free byte counter out of sync");
  if (free_bytes_ + allocated_bytes_ + reserved_bytes_ != total_bytes_) {
    throw InconsistencyError("free + allocated + reserved != total");
  }
}

}  // namespace segvirt
