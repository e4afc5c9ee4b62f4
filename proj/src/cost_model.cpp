#include "segvirt/cost_model.hpp"

#include <cmath>
#include <istream>

#include <json.hpp>

#include "key_value.hpp"
#include "segvirt/errors.hpp"

namespace segvirt {

std::string_view to_string(WalkMode mode) {
  switch (mode) {
    case WalkMode::Native1D: return "native";
    case WalkMode::DSn: return "dsn";
    case WalkMode::EPT: return "ept";
    case WalkMode::Shadow: return "shadow";
  }
  return "unknown";
}

std::optional<WalkMode> parse_walk_mode(std::string_view text) {
  if (text == "native") return WalkMode::Native1D;
  if (text == "dsn") return WalkMode::DSn;
  if (text == "ept") return WalkMode::EPT;
  if (text == "shadow") return WalkMode::Shadow;
  return std::nullopt;
}

unsigned walk_refs(WalkMode mode, unsigned levels) {
  if (levels == 0) throw PreconditionError("page tables need at least one level");
  if (mode == WalkMode::EPT) return (levels + 1) * (levels + 1) - 1;
  return levels;
}

unsigned dsn_reg_ops(unsigned levels) {
  if (levels == 0) throw PreconditionError("page tables need at least one level");
  return 2 * levels;
}

void WorkloadCounters::validate() const {
  const double values[] = {n_tlb, n_exit, c_1d, c_2d, c_exit, c_handler, t_1d, t_reg2reg};
  for (double v : values) {
    if (!std::isfinite(v) || v < 0) throw PreconditionError("counters must be non-negative");
  }
  if (cpu_hz && (!std::isfinite(*cpu_hz) || *cpu_hz <= 0)) {
    throw PreconditionError("cpu_hz must be positive");
  }
}

double estimate_runtime_dsn(const WorkloadCounters& counters) {
  counters.validate();
  return counters.t_1d + counters.n_tlb * counters.t_reg2reg;
}

CostBreakdown virtualization_cost(WalkMode mode, const WorkloadCounters& counters) {
  counters.validate();
  CostBreakdown cost;
  cost.mode = mode;
  switch (mode) {
    case WalkMode::Native1D:
    case WalkMode::DSn:
      cost.walk_cycles = counters.c_1d * counters.n_tlb;
      break;
    case WalkMode::EPT:
      cost.walk_cycles = counters.c_2d * counters.n_tlb;
      break;
    case WalkMode::Shadow:
      cost.walk_cycles = counters.c_1d * counters.n_tlb;
      cost.exit_cycles = counters.n_exit * (counters.c_exit + counters.c_handler);
      break;
  }
  cost.total_cycles = cost.walk_cycles + cost.exit_cycles;
  if (counters.cpu_hz) cost.total_seconds = cost.total_cycles / *counters.cpu_hz;
  return cost;
}

WorkloadCounters read_counters(std::istream& in) {
  auto entries = detail::read_key_values(in);
  WorkloadCounters c;
  const std::pair<const char*, double*> fields[] = {
      {"n_tlb", &c.n_tlb},   {"n_exit", &c.n_exit},       {"c_1d", &c.c_1d},
      {"c_2d", &c.c_2d},     {"c_exit", &c.c_exit},       {"c_handler", &c.c_handler},
      {"t_1d", &c.t_1d},     {"t_reg2reg", &c.t_reg2reg},
  };
  for (const auto& [key, entry] : entries) {
    if (key == "cpu_hz") {
      const double hz = detail::parse_number(entry, key);
      if (hz <= 0) throw ParseError(entry.line, "'cpu_hz' must be positive");
      c.cpu_hz = hz;
      continue;
    }
    double* target = nullptr;
    for (const auto& [name, field] : fields) {
      if (key == name) target = field;
    }
    if (!target) throw ParseError(entry.line, "unknown counter '" + key + "'");
    *target = detail::parse_number(entry, key);
    if (*target < 0) throw ParseError(entry.line, "'" + key + "' must be non-negative");
  }
  return c;
}

std::string to_json(const CostBreakdown& cost) {
  nlohmann::ordered_json j;
  j["mode"] = std::string(to_string(cost.mode));
  j["walk_cycles"] = cost.walk_cycles;
  j["exit_cycles"] = cost.exit_cycles;
  j["total_cycles"] = cost.total_cycles;
  if (cost.total_seconds) j["total_seconds"] = *cost.total_seconds;
  return j.dump(2);
}

}  // namespace segvirt
