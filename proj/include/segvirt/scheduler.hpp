#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "segvirt/machine_view.hpp"
#include "segvirt/segment_allocator.hpp"
#include "segvirt/trace_io.hpp"
#include "segvirt/units.hpp"

namespace segvirt {

enum class SimVariant { BaseLine, ImprovPlacementOpt1, ImprovPlacementOpt2, DynamicOptionSelec };

/// "baseline", "opt1", "opt2", "dynamic".
std::string_view to_string(SimVariant variant);
std::optional<SimVariant> parse_variant(std::string_view text);

struct PlacementRequest {
  VmId vm_id;
  unsigned cores = 1;
  Bytes memory_bytes = 0;
};

struct SchedulerConfig {
  unsigned n = 3;
  AllocationPolicy current_policy = AllocationPolicy::Opt1;
  Timestamp reselect_period = kSecondsPerWeek;
  SimVariant variant = SimVariant::DynamicOptionSelec;

  /// Throws ConfigError (n outside [1, 8], non-positive period).
  void validate() const;
};

// Filters work on indices into the machine span so callers can keep their own
// per-machine state alongside the views.

/// Machines with enough free cores and free bytes (both bounds inclusive).
std::vector<std::size_t> filter_resources(std::span<const MachineView> machines,
                                          const PlacementRequest& request);

/// The candidate whose free list would serve the request with the fewest
/// segments; ties go to more free bytes, then the lowest machine id. Throws
/// NoCandidateError when there are no candidates or none is feasible.
std::size_t filter_min_segments(std::span<const MachineView> machines,
                                std::span<const std::size_t> candidates,
                                const PlacementRequest& request, AllocationPolicy policy);

/// Stock load-balancing pick: most free cores, ties to the lowest machine id.
/// Throws NoCandidateError on an empty candidate set.
std::size_t baseline_pick(std::span<const MachineView> machines,
                          std::span<const std::size_t> candidates);

/// Append-only record of start/stop requests since the last reselection.
class EventLog {
 public:
  /// Appends the event. Returns false, and counts it, if it is older than
  /// the previous entry; the event is kept either way.
  bool record(VmEvent event);

  std::span<const VmEvent> events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }
  std::size_t out_of_order() const noexcept { return out_of_order_; }
  void reset();

 private:
  std::vector<VmEvent> events_;
  std::size_t out_of_order_ = 0;
};

/// Outcome of replaying a log on a fresh fleet with segment-aware placement.
struct ReplayOutcome {
  std::size_t placed = 0;
  std::size_t rejected = 0;
  std::size_t dsn_vms = 0;         // placed VMs with k <= n
  std::size_t total_segments = 0;  // sum of k over placed VMs
};

ReplayOutcome replay_with_policy(std::span<const VmEvent> events, const FleetSpec& fleet,
                                 AllocationPolicy policy, unsigned n);

/// Replays the log under Opt1 and Opt2 and returns the policy giving more
/// DS-n VMs, then fewer total segments, else the current policy. Resets the
/// log. An empty log keeps the current policy.
AllocationPolicy reselect_option(EventLog& log, const FleetSpec& fleet,
                                 const SchedulerConfig& config);

}  // namespace segvirt
