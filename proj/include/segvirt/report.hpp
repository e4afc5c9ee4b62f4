#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "segvirt/scheduler.hpp"
#include "segvirt/segment_allocator.hpp"
#include "segvirt/units.hpp"

namespace segvirt {

/// One placed VM.
struct VmRecord {
  VmId vm_id;
  MachineId machine_id = 0;
  std::size_t k = 0;
  VmMode mode = VmMode::DSn;
  std::chrono::nanoseconds alloc_latency{0};

  bool operator==(const VmRecord&) const = default;
};

struct PolicySwitch {
  Timestamp time = 0;
  AllocationPolicy policy = AllocationPolicy::Opt1;

  bool operator==(const PolicySwitch&) const = default;
};

struct MachineLayout {
  MachineId machine_id = 0;
  std::vector<SegmentDescriptor> free_segments;

  bool operator==(const MachineLayout&) const = default;
};

/// Raw output of one replay. records.size() + rejections == start_count.
struct SimulationReport {
  std::string label;
  SimVariant variant = SimVariant::BaseLine;
  unsigned n = 3;
  std::uint64_t seed = 0;

  std::vector<VmRecord> records;  // in placement order
  std::size_t start_count = 0;
  std::size_t rejections = 0;
  std::size_t anomalies = 0;
  std::vector<PolicySwitch> switches;
  std::vector<MachineLayout> final_layouts;  // at the last trace event

  bool operator==(const SimulationReport&) const = default;

  /// Equality ignoring measured latencies.
  bool same_outcome(const SimulationReport& other) const;
};

}  // namespace segvirt
