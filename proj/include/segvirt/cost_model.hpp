#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

namespace segvirt {

enum class WalkMode { Native1D, DSn, EPT, Shadow };

std::string_view to_string(WalkMode mode);
std::optional<WalkMode> parse_walk_mode(std::string_view text);

inline constexpr unsigned kDefaultWalkLevels = 4;

/// Memory references per TLB miss. A 1D walk touches one entry per level;
/// a nested walk translates each of the levels+1 guest-physical addresses
/// through a full host walk: (levels+1)^2 - 1, i.e. 24 for radix-4 tables.
/// DS-n and shadow paging both walk a single dimension.
unsigned walk_refs(WalkMode mode, unsigned levels = kDefaultWalkLevels);

/// Register operations added per TLB miss under DS-n: one offset addition and
/// one bound comparison for each extracted guest-physical address.
/// Throws PreconditionError when levels == 0.
unsigned dsn_reg_ops(unsigned levels = kDefaultWalkLevels);

/// Measured inputs of the runtime and cost models. `c_exit` holds the
/// combined VMExit+VMEnter cost.
struct WorkloadCounters {
  double n_tlb = 0;      // TLB misses
  double n_exit = 0;     // shadow-paging VMExits from page-table updates
  double c_1d = 0;       // cycles per 1D walk
  double c_2d = 0;       // cycles per 2D walk
  double c_exit = 0;     // cycles per VMExit + VMEnter
  double c_handler = 0;  // mean hypervisor handler cycles
  double t_1d = 0;       // seconds, runtime with 1D walks
  double t_reg2reg = 0;  // seconds per miss of DS-n register arithmetic
  std::optional<double> cpu_hz;  // converts cycles to seconds when present

  /// Throws PreconditionError if any counter is negative or not finite.
  void validate() const;
};

/// Cost of memory virtualization for one mode, split into the page-walk term
/// and the VMExit term (zero except for shadow paging).
struct CostBreakdown {
  WalkMode mode = WalkMode::DSn;
  double walk_cycles = 0;
  double exit_cycles = 0;
  double total_cycles = 0;
  std::optional<double> total_seconds;
};

/// T_DSn = T_1D + N_tlb * T_reg2reg, in seconds.
double estimate_runtime_dsn(const WorkloadCounters& counters);

/// C_DSn = C_1D * N_tlb
/// C_EPT = C_2D * N_tlb
/// C_Sha = C_1D * N_tlb + N_exit * (C_exit + C_handler)
/// Native1D is costed like DS-n (same walk, no register term).
CostBreakdown virtualization_cost(WalkMode mode, const WorkloadCounters& counters);

/// Reads counters from `name = number` lines. Keys: n_tlb, n_exit, c_1d,
/// c_2d, c_exit, c_handler, t_1d, t_reg2reg, cpu_hz (all optional, default 0;
/// cpu_hz unset). Unknown keys and negative values are ParseErrors.
WorkloadCounters read_counters(std::istream& in);

/// One JSON object with mode, walk_cycles, exit_cycles, total_cycles and,
/// when known, total_seconds.
std::string to_json(const CostBreakdown& cost);

}  // namespace segvirt
