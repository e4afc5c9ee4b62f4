#pragma once

#include "segvirt/segment_allocator.hpp"
#include "segvirt/units.hpp"

namespace segvirt {

/// The scheduler's picture of one physical machine: core counts and a local
/// copy of its free-segment list.
struct MachineView {
  MachineId machine_id = 0;
  unsigned cores_total = 0;
  unsigned cores_free = 0;
  FreeSegmentList free_list;

  Bytes free_bytes() const noexcept { return free_list.free_bytes(); }
  bool operator==(const MachineView&) const = default;
};

}  // namespace segvirt
