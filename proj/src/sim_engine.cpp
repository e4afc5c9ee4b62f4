#include "segvirt/sim_engine.hpp"

#include <algorithm>
#include <chrono>

#include "segvirt/dsn_mmu.hpp"
#include "segvirt/errors.hpp"

namespace segvirt {

bool SimulationReport::same_outcome(const SimulationReport& other) const {
  if (label != other.label || variant != other.variant || n != other.n || seed != other.seed ||
      start_count != other.start_count || rejections != other.rejections ||
      anomalies != other.anomalies || switches != other.switches ||
      final_layouts != other.final_layouts || records.size() != other.records.size()) {
    return false;
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& a = records[i];
    const auto& b = other.records[i];
    if (a.vm_id != b.vm_id || a.machine_id != b.machine_id || a.k != b.k || a.mode != b.mode) {
      return false;
    }
  }
  return true;
}

namespace {

AllocationPolicy fixed_policy(SimVariant variant, AllocationPolicy fallback) {
  switch (variant) {
    case SimVariant::ImprovPlacementOpt1: return AllocationPolicy::Opt1;
    case SimVariant::ImprovPlacementOpt2: return AllocationPolicy::Opt2;
    default: return fallback;
  }
}

bool same_ranges(std::span<const SegmentDescriptor> a, std::span<const SegmentDescriptor> b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](const auto& x, const auto& y) {
    return x.base == y.base && x.limit == y.limit;
  });
}

}  // namespace

SimulationState::SimulationState(const FleetSpec& fleet, SimOptions options)
    : fleet_(fleet),
      options_(std::move(options)),
      policy_(fixed_policy(options_.variant, options_.initial_policy)),
      views_(build_fleet(fleet)) {
  config_.n = options_.n;
  config_.current_policy = policy_;
  config_.reselect_period = options_.reselect_period;
  config_.variant = options_.variant;
  config_.validate();

  hosts_.resize(views_.size());
  for (std::size_t i = 0; i < views_.size(); ++i) {
    const auto& list = views_[i].free_list;
    if (options_.variant == SimVariant::BaseLine) {
      hosts_[i].buddy.emplace(list.total_bytes(), list.reserved_bytes(), options_.buddy_max_order);
    } else {
      hosts_[i].segments.emplace(list);
    }
  }

  report_.label = options_.label;
  report_.variant = options_.variant;
  report_.n = options_.n;
  report_.seed = options_.seed;
}

std::vector<SegmentDescriptor> SimulationState::free_layout(std::size_t idx) const {
  const Host& host = hosts_[idx];
  if (host.buddy) return host.buddy->free_layout();
  const auto segs = host.segments->segments();
  return {segs.begin(), segs.end()};
}

std::vector<SegmentDescriptor> SimulationState::initial_layout(std::size_t idx) const {
  const auto& list = views_[idx].free_list;
  return {{list.reserved_bytes(), list.total_bytes(), 0}};
}

void SimulationState::maybe_reselect(Timestamp now) {
  if (!next_reselect_) next_reselect_ = now + options_.reselect_period;
  while (now >= *next_reselect_) {
    config_.current_policy = policy_;
    const AllocationPolicy chosen = reselect_option(log_, fleet_, config_);
    if (chosen != policy_) {
      policy_ = chosen;
      report_.switches.push_back({*next_reselect_, chosen});
    }
    *next_reselect_ += options_.reselect_period;
  }
}

void SimulationState::step(const VmEvent& event) {
  if (event.time < clock_) {
    ++report_.anomalies;
  } else {
    clock_ = event.time;
  }
  if (dynamic()) {
    maybe_reselect(event.time);
    log_.record(event);
  }
  if (event.kind == EventKind::Start) {
    start_vm(event);
  } else {
    stop_vm(event);
  }
}

void SimulationState::start_vm(const VmEvent& event) {
  ++report_.start_count;
  if (live_.contains(event.vm_id)) {
    ++report_.anomalies;
    ++report_.rejections;
    return;
  }

  const PlacementRequest request{event.vm_id, event.cores, event.memory_bytes};
  const auto candidates = filter_resources(views_, request);
  if (candidates.empty()) {
    reject(event.vm_id);
    return;
  }

  const bool baseline = options_.variant == SimVariant::BaseLine;
  std::size_t idx = 0;
  std::optional<std::size_t> peeked;
  if (baseline) {
    idx = baseline_pick(views_, candidates);
  } else {
    try {
      idx = filter_min_segments(views_, candidates, request, policy_);
    } catch (const NoCandidateError&) {
      reject(event.vm_id);
      return;
    }
    peeked = views_[idx].free_list.peek_segment_count(event.memory_bytes, policy_);
  }

  Host& host = hosts_[idx];
  VMAllocation allocation;
  try {
    const auto t0 = std::chrono::steady_clock::now();
    if (baseline) {
      allocation = host.buddy->allocate(event.vm_id, event.memory_bytes, event.time);
    } else {
      allocation = host.segments->allocate(event.vm_id, event.memory_bytes, policy_, event.time);
    }
    const auto t1 = std::chrono::steady_clock::now();
    if (options_.measure_latency) {
      allocation.alloc_latency = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0);
    }
  } catch (const InsufficientMemoryError&) {
    // Buddy rounding to whole pages can exceed the mirror's byte count.
    reject(event.vm_id);
    return;
  }
  if (peeked && *peeked != allocation.k()) ++report_.anomalies;

  MachineView& view = views_[idx];
  for (const auto& seg : allocation.segments) view.free_list.carve(seg, event.time);
  view.cores_free -= event.cores;

  const auto regs = build_register_file(allocation, allocation.size(), options_.n);
  allocation.mode = regs ? VmMode::DSn : VmMode::Fallback;

  report_.records.push_back(
      {event.vm_id, view.machine_id, allocation.k(), allocation.mode, allocation.alloc_latency});
  live_.emplace(event.vm_id, LiveVm{idx, event.cores, std::move(allocation)});
}

void SimulationState::reject(const VmId& vm_id) {
  ++report_.rejections;
  rejected_.insert(vm_id);
}

void SimulationState::stop_vm(const VmEvent& event) {
  auto it = live_.find(event.vm_id);
  if (it == live_.end()) {
    if (rejected_.erase(event.vm_id) == 0) ++report_.anomalies;
    return;
  }
  const LiveVm& vm = it->second;
  Host& host = hosts_[vm.machine];
  if (host.buddy) {
    host.buddy->release(vm.allocation);
  } else {
    host.segments->release(vm.allocation, event.time);
  }
  MachineView& view = views_[vm.machine];
  view.free_list.release(vm.allocation, event.time);
  view.cores_free += vm.cores;
  live_.erase(it);
}

void SimulationState::check_invariants() const {
  std::vector<std::vector<const SegmentDescriptor*>> owned(views_.size());
  std::vector<Bytes> live_bytes(views_.size(), 0);
  for (const auto& [id, vm] : live_) {
    for (const auto& seg : vm.allocation.segments) {
      owned[vm.machine].push_back(&seg);
      live_bytes[vm.machine] += seg.size();
    }
  }
  for (std::size_t i = 0; i < views_.size(); ++i) {
    const auto& view = views_[i];
    view.free_list.check_invariants();
    const auto layout = free_layout(i);
    if (!same_ranges(layout, view.free_list.segments())) {
      throw InconsistencyError("scheduler mirror of machine " + std::to_string(view.machine_id) +
                               " diverged from the hypervisor free list");
    }
    Bytes free = 0;
    for (const auto& s : layout) free += s.size();
    if (free + live_bytes[i] + view.free_list.reserved_bytes() != view.free_list.total_bytes()) {
      throw InconsistencyError("memory not conserved on machine " +
                               std::to_string(view.machine_id));
    }
    if (hosts_[i].segments) {
      hosts_[i].segments->check_invariants();
      if (*hosts_[i].segments != view.free_list) {
        throw InconsistencyError("mirror of machine " + std::to_string(view.machine_id) +
                                 " is not identical to the hypervisor list");
      }
    }
    // Live segments must not intersect free ranges or each other.
    auto segs = owned[i];
    std::sort(segs.begin(), segs.end(), [](auto* a, auto* b) { return a->base < b->base; });
    for (std::size_t j = 1; j < segs.size(); ++j) {
      if (segs[j - 1]->limit > segs[j]->base) {
        throw InconsistencyError("live allocations overlap on machine " +
                                 std::to_string(view.machine_id));
      }
    }
    for (const auto* s : segs) {
      for (const auto& f : layout) {
        if (s->base < f.limit && f.base < s->limit) {
          throw InconsistencyError("live allocation intersects free memory on machine " +
                                   std::to_string(view.machine_id));
        }
      }
    }
  }
}

void SimulationState::snapshot_layouts() {
  report_.final_layouts.clear();
  for (std::size_t i = 0; i < views_.size(); ++i) {
    report_.final_layouts.push_back({views_[i].machine_id, free_layout(i)});
  }
}

SimulationReport run(std::span<const VmEvent> trace, const FleetSpec& fleet,
                     const SimOptions& options) {
  SimulationState state(fleet, options);
  const auto ordered = replay_order(trace);
  for (const auto& ev : ordered) state.step(ev);
  state.snapshot_layouts();

  // Implicit stops at trace end, in start order.
  const auto closed = close_open_vms(ordered);
  for (std::size_t i = ordered.size(); i < closed.size(); ++i) state.step(closed[i]);

  SimulationReport report = state.report();
  for (std::size_t i = 0; i < state.machines().size(); ++i) {
    if (!same_ranges(state.free_layout(i), state.initial_layout(i))) ++report.anomalies;
  }
  return report;
}

}  // namespace segvirt
