#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "segvirt/machine_view.hpp"
#include "segvirt/units.hpp"

namespace segvirt {

enum class EventKind { Start, Stop };

struct VmEvent {
  VmId vm_id;
  EventKind kind = EventKind::Start;
  Timestamp time = 0;
  unsigned cores = 0;       // Start only
  Bytes memory_bytes = 0;   // Start only

  bool operator==(const VmEvent&) const = default;
};

VmEvent start_event(VmId vm_id, Timestamp time, unsigned cores, Bytes memory_bytes);
VmEvent stop_event(VmId vm_id, Timestamp time);

// ---------------------------------------------------------------------------
// Trace CSV
//
//   vm_id,kind,time,cores,memory_bytes
//   vm1,start,0,2,4294967296
//   vm1,stop,100,,
//
// The header line is optional on input and always written. Stop rows may also
// omit the two trailing empty fields. Times are non-negative integer seconds.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kTraceHeader = "vm_id,kind,time,cores,memory_bytes";

/// Parses and stably sorts by time. Throws ParseError with the offending line
/// for malformed rows, duplicate Starts, and Stops without a prior Start.
std::vector<VmEvent> parse_trace(std::istream& in);
std::vector<VmEvent> parse_trace_file(const std::string& path);

void write_trace(std::ostream& out, std::span<const VmEvent> events);

/// Appends a Stop at the last event time for every VM still running there.
std::vector<VmEvent> close_open_vms(std::span<const VmEvent> events);

/// Replay order: by time; at equal times Stops come before Starts; otherwise
/// input order is kept.
std::vector<VmEvent> replay_order(std::span<const VmEvent> events);

// ---------------------------------------------------------------------------
// Snapshots and bootstorms
// ---------------------------------------------------------------------------

struct SnapshotRecord {
  VmId vm_id;
  unsigned cores = 0;
  Bytes memory_bytes = 0;
  std::string host_id;
  Bytes host_ram_bytes = 0;
  unsigned host_cores = 0;

  bool operator==(const SnapshotRecord&) const = default;
};

inline constexpr std::string_view kSnapshotHeader =
    "vm_id,cores,memory_bytes,host_id,host_ram_bytes,host_cores";

std::vector<SnapshotRecord> parse_snapshot(std::istream& in);

/// Every VM starts at t=0 (ordered by vm_id) and stops at `horizon`.
std::vector<VmEvent> derive_bootstorm(std::span<const SnapshotRecord> snapshot, Timestamp horizon);

// ---------------------------------------------------------------------------
// Synthetic traces
// ---------------------------------------------------------------------------

struct Flavor {
  Bytes memory_bytes = 0;
  unsigned cores = 1;
  double weight = 1.0;
};

/// Time distribution in seconds. `Never` is only meaningful for lifetimes
/// and produces arrival-only traces.
struct Distribution {
  enum class Kind { Fixed, Exponential, Uniform, Never };
  Kind kind = Kind::Fixed;
  double a = 0;  // Fixed: value; Exponential: mean; Uniform: low
  double b = 0;  // Uniform: high

  static Distribution fixed(double v) { return {Kind::Fixed, v, 0}; }
  static Distribution exponential(double mean) { return {Kind::Exponential, mean, 0}; }
  static Distribution uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }
  static Distribution never() { return {Kind::Never, 0, 0}; }
};

/// Parses "fixed:V", "exp:MEAN", "uniform:LO:HI" or "never".
Distribution parse_distribution(std::string_view text);

struct SyntheticParams {
  std::size_t vm_count = 0;
  std::vector<Flavor> flavors;
  Distribution inter_arrival = Distribution::fixed(60);
  Distribution lifetime = Distribution::never();
  std::uint64_t seed = 1;
};

/// Fourteen Azure-like flavors (0.75 GiB .. 112 GiB), weighted toward small VMs.
std::vector<Flavor> azure_like_flavors();

/// Reads `memory_bytes,cores,weight` rows (header optional).
std::vector<Flavor> parse_flavors(std::istream& in);

/// VMs "vm<i>" arrive per the inter-arrival distribution and pick a flavor by
/// weight. Lifetimes are at least one second. Output is ordered by time,
/// Stops before Starts at equal times. Reproducible for a fixed seed. Throws
/// ConfigError for invalid parameters (negative means, uniform low > high,
/// non-positive weights, duplicate flavor sizes, `never` inter-arrival).
std::vector<VmEvent> gen_synthetic(const SyntheticParams& params);

// ---------------------------------------------------------------------------
// Fleets
// ---------------------------------------------------------------------------

struct GenerationSpec {
  std::string name;
  Bytes ram_bytes = 0;
  unsigned cores = 0;
  double proportion = 0;  // percent

  bool operator==(const GenerationSpec&) const = default;
};

struct FleetSpec {
  std::vector<GenerationSpec> generations;
  std::size_t machine_count = 0;
  Bytes reserved_bytes = 0;

  bool operator==(const FleetSpec&) const = default;
};

/// The five server generations (HPC, Gen4, Gen5, Gen6, Godzilla), 20% each.
FleetSpec reference_fleet(std::size_t machine_count);

/// JSON:
///   {"machine_count": 20, "reserved_bytes": 0,
///    "generations": [{"name": "HPC", "ram_bytes": 137438953472,
///                     "cores": 24, "proportion": 20}, ...]}
/// Throws ParseError.
FleetSpec parse_fleet_spec(std::istream& in);
std::string fleet_spec_to_json(const FleetSpec& spec);

/// Machine counts per generation by largest-remainder rounding (ties go to
/// the earlier generation). Throws ConfigError for invalid proportions.
std::vector<std::size_t> generation_counts(const FleetSpec& spec);

/// Machines 0..machine_count-1, grouped by generation in spec order.
std::vector<MachineView> build_fleet(const FleetSpec& spec);

}  // namespace segvirt
