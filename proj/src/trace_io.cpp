#include "segvirt/trace_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "segvirt/errors.hpp"

namespace segvirt {

VmEvent start_event(VmId vm_id, Timestamp time, unsigned cores, Bytes memory_bytes) {
  return VmEvent{std::move(vm_id), EventKind::Start, time, cores, memory_bytes};
}

VmEvent stop_event(VmId vm_id, Timestamp time) {
  return VmEvent{std::move(vm_id), EventKind::Stop, time, 0, 0};
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_count(std::string_view field, std::size_t line, std::string_view what) {
  if (!field.empty() && field.front() == '-') {
    throw ParseError(line, std::string(what) + " must not be negative");
  }
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError(line, std::string(what) + " is not a non-negative integer: '" +
                               std::string(field) + "'");
  }
  return value;
}

struct ParsedEvent {
  VmEvent event;
  std::size_t line;
};

}  // namespace

std::vector<VmEvent> parse_trace(std::istream& in) {
  std::vector<ParsedEvent> parsed;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (line.empty()) continue;
    if (line_no == 1 && line == kTraceHeader) continue;

    const auto f = split_csv(line);
    if (f.size() != 3 && f.size() != 5) {
      throw ParseError(line_no, "expected 5 fields (vm_id,kind,time,cores,memory_bytes), got " +
                                    std::to_string(f.size()));
    }
    if (f[0].empty()) throw ParseError(line_no, "empty vm_id");
    VmEvent ev;
    ev.vm_id = std::string(f[0]);
    ev.time = static_cast<Timestamp>(parse_count<std::uint64_t>(f[2], line_no, "time"));
    if (f[1] == "start") {
      if (f.size() != 5) throw ParseError(line_no, "start row needs cores and memory_bytes");
      ev.kind = EventKind::Start;
      ev.cores = parse_count<unsigned>(f[3], line_no, "cores");
      ev.memory_bytes = parse_count<Bytes>(f[4], line_no, "memory_bytes");
      if (ev.cores == 0) throw ParseError(line_no, "cores must be positive");
      if (ev.memory_bytes == 0) throw ParseError(line_no, "memory_bytes must be positive");
    } else if (f[1] == "stop") {
      ev.kind = EventKind::Stop;
      if (f.size() == 5 && (!f[3].empty() || !f[4].empty())) {
        throw ParseError(line_no, "stop row must leave cores and memory_bytes empty");
      }
    } else {
      throw ParseError(line_no, "kind must be 'start' or 'stop', got '" + std::string(f[1]) + "'");
    }
    parsed.push_back({std::move(ev), line_no});
  }

  std::stable_sort(parsed.begin(), parsed.end(),
                   [](const auto& a, const auto& b) { return a.event.time < b.event.time; });

  enum class State { Running, Stopped };
  std::unordered_map<std::string, State> state;
  std::vector<VmEvent> events;
  events.reserve(parsed.size());
  for (auto& p : parsed) {
    auto it = state.find(p.event.vm_id);
    if (p.event.kind == EventKind::Start) {
      if (it != state.end()) throw ParseError(p.line, "duplicate start for '" + p.event.vm_id + "'");
      state.emplace(p.event.vm_id, State::Running);
    } else {
      if (it == state.end()) {
        throw ParseError(p.line, "stop for '" + p.event.vm_id + "' precedes its start");
      }
      if (it->second == State::Stopped) {
        throw ParseError(p.line, "duplicate stop for '" + p.event.vm_id + "'");
      }
      it->second = State::Stopped;
    }
    events.push_back(std::move(p.event));
  }
  return events;
}

std::vector<VmEvent> parse_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace '" + path + "'");
  return parse_trace(in);
}

void write_trace(std::ostream& out, std::span<const VmEvent> events) {
  out << kTraceHeader << '\n';
  for (const auto& ev : events) {
    if (ev.kind == EventKind::Start) {
      out << ev.vm_id << ",start," << ev.time << ',' << ev.cores << ',' << ev.memory_bytes << '\n';
    } else {
      out << ev.vm_id << ",stop," << ev.time << ",,\n";
    }
  }
}

std::vector<VmEvent> close_open_vms(std::span<const VmEvent> events) {
  std::vector<VmEvent> out(events.begin(), events.end());
  if (events.empty()) return out;
  Timestamp end = 0;
  std::vector<std::string> order;
  std::unordered_map<std::string, bool> running;
  for (const auto& ev : events) {
    end = std::max(end, ev.time);
    if (ev.kind == EventKind::Start) {
      if (!running.contains(ev.vm_id)) order.push_back(ev.vm_id);
      running[ev.vm_id] = true;
    } else {
      running[ev.vm_id] = false;
    }
  }
  for (const auto& id : order) {
    if (running[id]) out.push_back(stop_event(id, end));
  }
  return out;
}

std::vector<VmEvent> replay_order(std::span<const VmEvent> events) {
  std::vector<VmEvent> out(events.begin(), events.end());
  std::stable_sort(out.begin(), out.end(), [](const VmEvent& a, const VmEvent& b) {
    if (a.time != b.time) return a.time < b.time;
    return a.kind == EventKind::Stop && b.kind == EventKind::Start;
  });
  return out;
}

std::vector<SnapshotRecord> parse_snapshot(std::istream& in) {
  std::vector<SnapshotRecord> out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (line.empty()) continue;
    if (line_no == 1 && line == kSnapshotHeader) continue;
    const auto f = split_csv(line);
    if (f.size() != 6) {
      throw ParseError(line_no, "expected 6 fields (" + std::string(kSnapshotHeader) + "), got " +
                                    std::to_string(f.size()));
    }
    SnapshotRecord r;
    r.vm_id = std::string(f[0]);
    r.cores = parse_count<unsigned>(f[1], line_no, "cores");
    r.memory_bytes = parse_count<Bytes>(f[2], line_no, "memory_bytes");
    r.host_id = std::string(f[3]);
    r.host_ram_bytes = parse_count<Bytes>(f[4], line_no, "host_ram_bytes");
    r.host_cores = parse_count<unsigned>(f[5], line_no, "host_cores");
    if (r.vm_id.empty()) throw ParseError(line_no, "empty vm_id");
    if (r.cores == 0 || r.memory_bytes == 0 || r.host_ram_bytes == 0 || r.host_cores == 0) {
      throw ParseError(line_no, "sizes must be positive");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<VmEvent> derive_bootstorm(std::span<const SnapshotRecord> snapshot, Timestamp horizon) {
  std::vector<const SnapshotRecord*> vms;
  for (const auto& r : snapshot) vms.push_back(&r);
  std::stable_sort(vms.begin(), vms.end(),
                   [](const auto* a, const auto* b) { return a->vm_id < b->vm_id; });
  std::vector<VmEvent> events;
  events.reserve(2 * vms.size());
  for (const auto* r : vms) events.push_back(start_event(r->vm_id, 0, r->cores, r->memory_bytes));
  for (const auto* r : vms) events.push_back(stop_event(r->vm_id, horizon));
  return events;
}

// ---------------------------------------------------------------------------

Distribution parse_distribution(std::string_view text) {
  auto number = [&](std::string_view s) {
    const std::string str(s);
    char* end = nullptr;
    const double v = std::strtod(str.c_str(), &end);
    if (str.empty() || *end != '\0' || !std::isfinite(v)) {
      throw ConfigError("bad number '" + str + "' in distribution '" + std::string(text) + "'");
    }
    return v;
  };
  if (text == "never") return Distribution::never();
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw ConfigError("distribution must be fixed:V, exp:MEAN, uniform:LO:HI or never");
  }
  const auto kind = text.substr(0, colon);
  const auto rest = text.substr(colon + 1);
  if (kind == "fixed") return Distribution::fixed(number(rest));
  if (kind == "exp") return Distribution::exponential(number(rest));
  if (kind == "uniform") {
    const auto c2 = rest.find(':');
    if (c2 == std::string_view::npos) throw ConfigError("uniform needs LO:HI");
    return Distribution::uniform(number(rest.substr(0, c2)), number(rest.substr(c2 + 1)));
  }
  throw ConfigError("unknown distribution '" + std::string(kind) + "'");
}

std::vector<Flavor> azure_like_flavors() {
  // (memory, cores, weight); weights sum to 100.
  return {
      {768 * MiB, 1, 10}, {1792 * MiB, 1, 20}, {2 * GiB, 1, 10},  {3584 * MiB, 2, 15},
      {4 * GiB, 2, 8},    {7 * GiB, 2, 10},    {8 * GiB, 2, 6},   {14 * GiB, 4, 6},
      {16 * GiB, 4, 4},   {28 * GiB, 8, 4},    {32 * GiB, 8, 3},  {56 * GiB, 16, 2},
      {64 * GiB, 16, 1},  {112 * GiB, 16, 1},
  };
}

std::vector<Flavor> parse_flavors(std::istream& in) {
  std::vector<Flavor> out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line_no == 1 && line == "memory_bytes,cores,weight") continue;
    const auto f = split_csv(line);
    if (f.size() != 3) throw ParseError(line_no, "expected memory_bytes,cores,weight");
    Flavor fl;
    fl.memory_bytes = parse_count<Bytes>(f[0], line_no, "memory_bytes");
    fl.cores = parse_count<unsigned>(f[1], line_no, "cores");
    const std::string w(f[2]);
    char* end = nullptr;
    fl.weight = std::strtod(w.c_str(), &end);
    if (w.empty() || *end != '\0' || !(fl.weight > 0)) {
      throw ParseError(line_no, "weight must be a positive number");
    }
    out.push_back(fl);
  }
  return out;
}

namespace {

void validate_distribution(const Distribution& d, std::string_view what, bool allow_never) {
  using K = Distribution::Kind;
  const bool ok = [&] {
    switch (d.kind) {
      case K::Fixed: return std::isfinite(d.a) && d.a >= 0;
      case K::Exponential: return std::isfinite(d.a) && d.a > 0;
      case K::Uniform: return std::isfinite(d.a) && std::isfinite(d.b) && d.a >= 0 && d.a <= d.b;
      case K::Never: return allow_never;
    }
    return false;
  }();
  if (!ok) throw ConfigError("invalid " + std::string(what) + " distribution");
}

// Portable sampling on top of mt19937_64: the standard distributions are
// implementation-defined and would make traces differ across toolchains.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform01() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  double draw(const Distribution& d) {
    switch (d.kind) {
      case Distribution::Kind::Fixed: return d.a;
      case Distribution::Kind::Exponential: return -d.a * std::log1p(-uniform01());
      case Distribution::Kind::Uniform: return d.a + (d.b - d.a) * uniform01();
      case Distribution::Kind::Never: return 0;
    }
    return 0;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

std::vector<VmEvent> gen_synthetic(const SyntheticParams& params) {
  validate_distribution(params.inter_arrival, "inter-arrival", false);
  validate_distribution(params.lifetime, "lifetime", true);
  if (params.vm_count == 0) return {};
  if (params.flavors.empty()) throw ConfigError("flavor set is empty");
  std::set<Bytes> sizes;
  double total_weight = 0;
  for (const auto& f : params.flavors) {
    if (f.memory_bytes == 0 || f.cores == 0) throw ConfigError("flavor sizes must be positive");
    if (!(f.weight > 0) || !std::isfinite(f.weight)) throw ConfigError("flavor weights must be positive");
    if (!sizes.insert(f.memory_bytes).second) throw ConfigError("duplicate flavor memory size");
    total_weight += f.weight;
  }

  Sampler sampler(params.seed);
  struct Row {
    VmEvent event;
    std::size_t seq;
  };
  std::vector<Row> rows;
  rows.reserve(2 * params.vm_count);
  double clock = 0;
  for (std::size_t i = 0; i < params.vm_count; ++i) {
    if (i > 0) clock += sampler.draw(params.inter_arrival);
    double pick = sampler.uniform01() * total_weight;
    std::size_t chosen = params.flavors.size() - 1;
    for (std::size_t f = 0; f < params.flavors.size(); ++f) {
      if (pick < params.flavors[f].weight) {
        chosen = f;
        break;
      }
      pick -= params.flavors[f].weight;
    }
    const Flavor& flavor = params.flavors[chosen];
    const auto start = static_cast<Timestamp>(std::llround(clock));
    const std::string id = "vm" + std::to_string(i);
    rows.push_back({start_event(id, start, flavor.cores, flavor.memory_bytes), rows.size()});
    if (params.lifetime.kind != Distribution::Kind::Never) {
      const auto life =
          std::max<Timestamp>(1, static_cast<Timestamp>(std::llround(sampler.draw(params.lifetime))));
      rows.push_back({stop_event(id, start + life), rows.size()});
    }
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.event.time != b.event.time) return a.event.time < b.event.time;
    if (a.event.kind != b.event.kind) return a.event.kind == EventKind::Stop;
    return a.seq < b.seq;
  });
  std::vector<VmEvent> out;
  out.reserve(rows.size());
  for (auto& r : rows) out.push_back(std::move(r.event));
  return out;
}

// ---------------------------------------------------------------------------

FleetSpec reference_fleet(std::size_t machine_count) {
  FleetSpec spec;
  spec.machine_count = machine_count;
  spec.generations = {
      {"HPC", 128 * GiB, 24, 20},  {"Gen4", 192 * GiB, 24, 20},     {"Gen5", 256 * GiB, 40, 20},
      {"Gen6", 192 * GiB, 48, 20}, {"Godzilla", 512 * GiB, 32, 20},
  };
  return spec;
}

FleetSpec parse_fleet_spec(std::istream& in) {
  FleetSpec spec;
  try {
    const auto j = nlohmann::json::parse(in);
    spec.machine_count = j.at("machine_count").get<std::size_t>();
    spec.reserved_bytes = j.value("reserved_bytes", Bytes{0});
    for (const auto& g : j.at("generations")) {
      GenerationSpec gen;
      gen.name = g.at("name").get<std::string>();
      gen.ram_bytes = g.at("ram_bytes").get<Bytes>();
      gen.cores = g.at("cores").get<unsigned>();
      gen.proportion = g.at("proportion").get<double>();
      spec.generations.push_back(std::move(gen));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("fleet spec: ") + e.what());
  }
  return spec;
}

std::string fleet_spec_to_json(const FleetSpec& spec) {
  nlohmann::ordered_json j;
  j["machine_count"] = spec.machine_count;
  j["reserved_bytes"] = spec.reserved_bytes;
  j["generations"] = nlohmann::ordered_json::array();
  for (const auto& g : spec.generations) {
    nlohmann::ordered_json row;
    row["name"] = g.name;
    row["ram_bytes"] = g.ram_bytes;
    row["cores"] = g.cores;
    row["proportion"] = g.proportion;
    j["generations"].push_back(row);
  }
  return j.dump(2) + "\n";
}

std::vector<std::size_t> generation_counts(const FleetSpec& spec) {
  if (spec.machine_count == 0) throw ConfigError("fleet needs at least one machine");
  if (spec.generations.empty()) throw ConfigError("fleet needs at least one generation");
  double sum = 0;
  for (const auto& g : spec.generations) {
    if (!(g.proportion >= 0) || !std::isfinite(g.proportion)) {
      throw ConfigError("generation proportions must be non-negative");
    }
    if (g.ram_bytes == 0 || g.cores == 0) throw ConfigError("generation sizes must be positive");
    if (g.ram_bytes <= spec.reserved_bytes) {
      throw ConfigError("generation '" + g.name + "' has no memory beyond the reserved region");
    }
    sum += g.proportion;
  }
  if (std::abs(sum - 100.0) > 1e-9) throw ConfigError("generation proportions must sum to 100");

  const std::size_t gens = spec.generations.size();
  std::vector<std::size_t> counts(gens);
  std::vector<double> remainder(gens);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < gens; ++i) {
    const double exact = spec.generations[i].proportion / 100.0 * static_cast<double>(spec.machine_count);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    remainder[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(gens);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < spec.machine_count; ++i, ++assigned) ++counts[order[i % gens]];
  return counts;
}

std::vector<MachineView> build_fleet(const FleetSpec& spec) {
  const auto counts = generation_counts(spec);
  std::vector<MachineView> machines;
  machines.reserve(spec.machine_count);
  MachineId next_id = 0;
  for (std::size_t g = 0; g < counts.size(); ++g) {
    const auto& gen = spec.generations[g];
    for (std::size_t i = 0; i < counts[g]; ++i, ++next_id) {
      machines.push_back(MachineView{next_id, gen.cores, gen.cores,
                                     new_machine(gen.ram_bytes, spec.reserved_bytes, next_id)});
    }
  }
  return machines;
}

}  // namespace segvirt
