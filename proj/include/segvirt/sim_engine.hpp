#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "segvirt/buddy_allocator.hpp"
#include "segvirt/report.hpp"
#include "segvirt/scheduler.hpp"
#include "segvirt/segment_allocator.hpp"
#include "segvirt/trace_io.hpp"

namespace segvirt {

struct SimOptions {
  SimVariant variant = SimVariant::DynamicOptionSelec;
  unsigned n = 3;
  AllocationPolicy initial_policy = AllocationPolicy::Opt1;
  Timestamp reselect_period = kSecondsPerWeek;
  unsigned buddy_max_order = BuddyAllocator::kDefaultMaxOrder;
  /// When false every alloc_latency is recorded as zero, which makes reports
  /// of identical runs byte-identical.
  bool measure_latency = true;
  std::uint64_t seed = 0;
  std::string label;
};

/// Discrete-event state of one replay.
///
/// BaseLine hosts run the buddy allocator behind a load-balancing pick; the
/// other variants run the segment allocator behind the fewest-segments
/// filter. Either way the scheduler keeps a mirror of every machine's free
/// list, updated after each placement and release.
class SimulationState {
 public:
  struct LiveVm {
    std::size_t machine = 0;
    unsigned cores = 0;
    VMAllocation allocation;
  };

  SimulationState(const FleetSpec& fleet, SimOptions options);

  /// Applies one event. Stops of unknown VMs, duplicate Starts and events
  /// older than the clock are counted as anomalies; the first two leave the
  /// state unchanged. Placement failures are counted as rejections, and the
  /// rejected VM's Stop is ignored.
  void step(const VmEvent& event);

  Timestamp clock() const noexcept { return clock_; }
  AllocationPolicy current_policy() const noexcept { return policy_; }
  const SimOptions& options() const noexcept { return options_; }
  std::span<const MachineView> machines() const noexcept { return views_; }
  const std::unordered_map<VmId, LiveVm>& live() const noexcept { return live_; }
  const SimulationReport& report() const noexcept { return report_; }

  /// Free ranges of machine `idx` as held by its hypervisor allocator.
  std::vector<SegmentDescriptor> free_layout(std::size_t idx) const;
  /// The initial single-segment layout of machine `idx`.
  std::vector<SegmentDescriptor> initial_layout(std::size_t idx) const;

  /// Throws InconsistencyError if conservation, disjointness of live and
  /// free memory, or mirror fidelity is violated on any machine.
  void check_invariants() const;

  /// Captures the per-machine free layouts into the report.
  void snapshot_layouts();

 private:
  struct Host {
    std::optional<FreeSegmentList> segments;
    std::optional<BuddyAllocator> buddy;
  };

  bool dynamic() const noexcept { return options_.variant == SimVariant::DynamicOptionSelec; }
  void maybe_reselect(Timestamp now);
  void start_vm(const VmEvent& event);
  void stop_vm(const VmEvent& event);
  void reject(const VmId& vm_id);

  FleetSpec fleet_;
  SimOptions options_;
  SchedulerConfig config_;
  AllocationPolicy policy_;
  std::vector<MachineView> views_;
  std::vector<Host> hosts_;
  std::unordered_map<VmId, LiveVm> live_;
  std::unordered_set<VmId> rejected_;
  EventLog log_;
  std::optional<Timestamp> next_reselect_;
  Timestamp clock_ = 0;
  SimulationReport report_;
};

/// Replays `trace` (any order; replay_order is applied) against a fresh
/// fleet. Final layouts are captured at the last trace event; VMs still
/// running then get an implicit Stop, after which every machine must be back
/// to its initial layout (otherwise an anomaly is counted).
SimulationReport run(std::span<const VmEvent> trace, const FleetSpec& fleet,
                     const SimOptions& options);

}  // namespace segvirt
