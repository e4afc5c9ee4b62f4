#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "segvirt/units.hpp"

namespace segvirt {

/// A contiguous physical range [base, limit). `date` is the simulated time at
/// which the segment ending at base-1 was allocated (0 when unknown). It is
/// bookkeeping only; no allocation decision reads it.
struct SegmentDescriptor {
  Bytes base = 0;
  Bytes limit = 0;
  Timestamp date = 0;

  Bytes size() const noexcept { return limit - base; }
  bool contains(Bytes addr) const noexcept { return addr >= base && addr < limit; }
  bool operator==(const SegmentDescriptor&) const = default;
};

/// How a demand is composed when no single free segment can hold it.
///   Opt1: consume whole segments smallest-first, keeping large ones for later VMs.
///   Opt2: consume the largest segment whole and retry with the residual demand.
enum class AllocationPolicy { Opt1, Opt2 };

std::string_view to_string(AllocationPolicy policy);
std::optional<AllocationPolicy> parse_policy(std::string_view text);

/// Translation mode a VM ends up in: DS-n registers when k <= n, otherwise
/// the administrator's fallback (EPT or shadow paging).
enum class VmMode { DSn, Fallback };

std::string_view to_string(VmMode mode);

/// Host segments granted to one VM, in grant order.
struct VMAllocation {
  VmId vm_id;
  std::vector<SegmentDescriptor> segments;
  VmMode mode = VmMode::DSn;
  std::chrono::nanoseconds alloc_latency{0};

  std::size_t k() const noexcept { return segments.size(); }
  Bytes size() const noexcept;
};

/// Free-memory bookkeeping of one machine. Only the user part of physical
/// memory, [reserved_bytes, total_bytes), is ever handed out; the low part is
/// left to the hypervisor and privileged VM.
///
/// Invariants (checked by check_invariants()):
///   - segments ascending by base, non-empty, inside the user region
///   - fully coalesced: consecutive A, B satisfy A.limit < B.base
///   - free + allocated + reserved == total
class FreeSegmentList {
 public:
  FreeSegmentList(MachineId machine_id, Bytes total_bytes, Bytes reserved_bytes);

  MachineId machine_id() const noexcept { return machine_id_; }
  Bytes total_bytes() const noexcept { return total_bytes_; }
  Bytes reserved_bytes() const noexcept { return reserved_bytes_; }
  Bytes free_bytes() const noexcept { return free_bytes_; }
  Bytes allocated_bytes() const noexcept { return allocated_bytes_; }
  Bytes largest_segment() const noexcept;
  std::span<const SegmentDescriptor> segments() const noexcept { return segments_; }

  /// Grants `demand` bytes to `vm_id`:
  ///   1. a free segment of exactly `demand` bytes is taken whole;
  ///   2. otherwise the low end of the largest larger segment is taken;
  ///   3. otherwise the policy composes the demand from several segments.
  /// Ties go to the lowest base. Throws InvalidSizeError for a zero demand and
  /// InsufficientMemoryError (list untouched) when the demand exceeds free bytes.
  VMAllocation allocate(VmId vm_id, Bytes demand, AllocationPolicy policy, Timestamp now);

  /// Number of segments allocate() would grant, or nullopt when infeasible.
  /// Does not modify the list.
  std::optional<std::size_t> peek_segment_count(Bytes demand, AllocationPolicy policy) const;

  /// Returns the allocation's segments to the list, extending neighbours
  /// whose borders coincide. Throws OverlapError, leaving the list untouched,
  /// if any released range intersects free memory or leaves the user region.
  void release(const VMAllocation& allocation, Timestamp now);

  /// Marks an exact range as allocated. Used to mirror layouts produced by
  /// other allocators. Throws OverlapError unless the range lies inside a
  /// single free segment.
  void carve(const SegmentDescriptor& range, Timestamp now);

  /// Throws InconsistencyError describing the first violated invariant.
  void check_invariants() const;

  bool operator==(const FreeSegmentList&) const = default;

 private:
  using Index = std::size_t;

  std::optional<Index> exact_fit(Bytes demand) const;
  std::optional<Index> largest_above(Bytes demand) const;
  Index largest() const;
  Index smallest() const;
  bool take_fitting(Bytes demand, Timestamp now, std::vector<SegmentDescriptor>& out);
  void take_whole(Index idx, Timestamp now, std::vector<SegmentDescriptor>& out);
  void insert_free(const SegmentDescriptor& range);

  MachineId machine_id_;
  Bytes total_bytes_;
  Bytes reserved_bytes_;
  Bytes free_bytes_ = 0;
  Bytes allocated_bytes_ = 0;
  std::vector<SegmentDescriptor> segments_;
};

/// A machine whose whole user region is one free segment.
/// Throws InvalidSizeError unless 0 <= reserved_bytes < total_bytes.
FreeSegmentList new_machine(Bytes total_bytes, Bytes reserved_bytes, MachineId machine_id = 0);

}  // namespace segvirt
