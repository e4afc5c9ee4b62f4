#include "segvirt/scheduler.hpp"

#include <unordered_map>

#include "segvirt/errors.hpp"
#include "segvirt/segment_allocator.hpp"

namespace segvirt {

std::string_view to_string(SimVariant variant) {
  switch (variant) {
    case SimVariant::BaseLine: return "baseline";
    case SimVariant::ImprovPlacementOpt1: return "opt1";
    case SimVariant::ImprovPlacementOpt2: return "opt2";
    case SimVariant::DynamicOptionSelec: return "dynamic";
  }
  return "unknown";
}

std::optional<SimVariant> parse_variant(std::string_view text) {
  if (text == "baseline") return SimVariant::BaseLine;
  if (text == "opt1") return SimVariant::ImprovPlacementOpt1;
  if (text == "opt2") return SimVariant::ImprovPlacementOpt2;
  if (text == "dynamic") return SimVariant::DynamicOptionSelec;
  return std::nullopt;
}

void SchedulerConfig::validate() const {
  if (n < 1 || n > 8) throw ConfigError("n must be in [1, 8]");
  if (reselect_period <= 0) throw ConfigError("reselection period must be positive");
}

std::vector<std::size_t> filter_resources(std::span<const MachineView> machines,
                                          const PlacementRequest& request) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < machines.size(); ++i) {
    const auto& m = machines[i];
    if (m.cores_free >= request.cores && m.free_bytes() >= request.memory_bytes) out.push_back(i);
  }
  return out;
}

std::size_t filter_min_segments(std::span<const MachineView> machines,
                                std::span<const std::size_t> candidates,
                                const PlacementRequest& request, AllocationPolicy policy) {
  std::optional<std::size_t> best;
  std::size_t best_k = 0;
  for (std::size_t idx : candidates) {
    const auto k = machines[idx].free_list.peek_segment_count(request.memory_bytes, policy);
    if (!k) continue;
    bool better = !best || *k < best_k;
    if (!better && *k == best_k) {
      const auto& a = machines[idx];
      const auto& b = machines[*best];
      better = a.free_bytes() > b.free_bytes() ||
               (a.free_bytes() == b.free_bytes() && a.machine_id < b.machine_id);
    }
    if (better) {
      best = idx;
      best_k = *k;
    }
  }
  if (!best) throw NoCandidateError("no machine can host VM '" + request.vm_id + "'");
  return *best;
}

std::size_t baseline_pick(std::span<const MachineView> machines,
                          std::span<const std::size_t> candidates) {
  if (candidates.empty()) throw NoCandidateError("no candidate machine");
  std::size_t best = candidates.front();
  for (std::size_t idx : candidates.subspan(1)) {
    const auto& a = machines[idx];
    const auto& b = machines[best];
    if (a.cores_free > b.cores_free || (a.cores_free == b.cores_free && a.machine_id < b.machine_id)) {
      best = idx;
    }
  }
  return best;
}

bool EventLog::record(VmEvent event) {
  const bool in_order = events_.empty() || event.time >= events_.back().time;
  if (!in_order) ++out_of_order_;
  events_.push_back(std::move(event));
  return in_order;
}

void EventLog::reset() {
  events_.clear();
  out_of_order_ = 0;
}

ReplayOutcome replay_with_policy(std::span<const VmEvent> events, const FleetSpec& fleet,
                                 AllocationPolicy policy, unsigned n) {
  auto machines = build_fleet(fleet);
  struct Live {
    std::size_t machine;
    unsigned cores;
    VMAllocation allocation;
  };
  std::unordered_map<VmId, Live> live;
  ReplayOutcome outcome;

  for (const auto& ev : replay_order(events)) {
    if (ev.kind == EventKind::Stop) {
      auto it = live.find(ev.vm_id);
      // Stops of VMs started before this log window are unknown here.
      if (it == live.end()) continue;
      auto& m = machines[it->second.machine];
      m.free_list.release(it->second.allocation, ev.time);
      m.cores_free += it->second.cores;
      live.erase(it);
      continue;
    }
    if (live.contains(ev.vm_id)) {
      ++outcome.rejected;
      continue;
    }
    const PlacementRequest request{ev.vm_id, ev.cores, ev.memory_bytes};
    const auto candidates = filter_resources(machines, request);
    if (candidates.empty()) {
      ++outcome.rejected;
      continue;
    }
    const std::size_t idx = filter_min_segments(machines, candidates, request, policy);
    auto& m = machines[idx];
    auto allocation = m.free_list.allocate(ev.vm_id, ev.memory_bytes, policy, ev.time);
    m.cores_free -= ev.cores;
    ++outcome.placed;
    outcome.total_segments += allocation.k();
    if (allocation.k() <= n) ++outcome.dsn_vms;
    live.emplace(ev.vm_id, Live{idx, ev.cores, std::move(allocation)});
  }
  return outcome;
}

AllocationPolicy reselect_option(EventLog& log, const FleetSpec& fleet,
                                 const SchedulerConfig& config) {
  AllocationPolicy chosen = config.current_policy;
  if (!log.empty()) {
    const auto opt1 = replay_with_policy(log.events(), fleet, AllocationPolicy::Opt1, config.n);
    const auto opt2 = replay_with_policy(log.events(), fleet, AllocationPolicy::Opt2, config.n);
    if (opt1.dsn_vms != opt2.dsn_vms) {
      chosen = opt1.dsn_vms > opt2.dsn_vms ? AllocationPolicy::Opt1 : AllocationPolicy::Opt2;
    } else if (opt1.total_segments != opt2.total_segments) {
      chosen = opt1.total_segments < opt2.total_segments ? AllocationPolicy::Opt1
                                                         : AllocationPolicy::Opt2;
    }
  }
  log.reset();
  return chosen;
}

}  // namespace segvirt
