#include "cli.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "segvirt/cost_model.hpp"
#include "segvirt/dsn_mmu.hpp"
#include "segvirt/errors.hpp"
#include "segvirt/metrics.hpp"
#include "segvirt/sim_engine.hpp"
#include "segvirt/trace_io.hpp"

namespace segvirt::cli {
namespace {

struct SimFlags {
  std::string fleet;
  std::string variant = "dynamic";
  unsigned n = 3;
  std::uint64_t seed = 0;
  double period_hours = 168;
  std::string policy = "opt1";
  std::string out;
  std::string format = "csv";
  bool no_timing = false;
  std::size_t max_anomalies = 0;
  unsigned jobs = 1;
};

void add_sim_flags(CLI::App* cmd, SimFlags& f) {
  cmd->add_option("--fleet", f.fleet,
                  "Fleet JSON file, or reference:N for N machines split evenly over the five "
                  "server generations")
      ->required();
  cmd->add_option("--variant", f.variant, "Simulated cloud: baseline, opt1, opt2, dynamic or all")
      ->check(CLI::IsMember({"baseline", "opt1", "opt2", "dynamic", "all"}))
      ->capture_default_str();
  cmd->add_option("--n", f.n, "Number of DS-n register pairs per VM (1-8)")
      ->check(CLI::Range(1u, kMaxDsnSegments))
      ->capture_default_str();
  cmd->add_option("--seed", f.seed, "Seed recorded in the report")->capture_default_str();
  cmd->add_option("--period-hours", f.period_hours,
                  "Option reselection period of the dynamic variant, in hours")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--policy", f.policy, "Initial allocation option of the dynamic variant")
      ->check(CLI::IsMember({"opt1", "opt2"}))
      ->capture_default_str();
  cmd->add_option("--out", f.out, "Output directory for report files (omit to print only)");
  cmd->add_option("--format", f.format, "Report format: csv, json or plotdata")
      ->check(CLI::IsMember({"csv", "json", "plotdata"}))
      ->capture_default_str();
  cmd->add_flag("--no-timing", f.no_timing,
                "Record zero allocation latency, making reports byte-identical across runs");
  cmd->add_option("--max-anomalies", f.max_anomalies,
                  "Exit with status 4 when a run counts more anomalies than this")
      ->capture_default_str();
  cmd->add_option("--jobs", f.jobs, "Runs executed in parallel with --variant all")
      ->check(CLI::Range(1u, 64u))
      ->capture_default_str();
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

FleetSpec load_fleet(const std::string& arg) {
  constexpr std::string_view prefix = "reference:";
  if (arg.rfind(prefix, 0) == 0) {
    const std::string count = arg.substr(prefix.size());
    std::size_t pos = 0;
    unsigned long n = 0;
    try {
      n = std::stoul(count, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != count.size() || n == 0) throw ConfigError("bad fleet '" + arg + "'");
    return reference_fleet(n);
  }
  auto in = open_input(arg);
  return parse_fleet_spec(in);
}

std::vector<SimVariant> selected_variants(const std::string& text) {
  if (text == "all") {
    return {SimVariant::BaseLine, SimVariant::ImprovPlacementOpt1,
            SimVariant::ImprovPlacementOpt2, SimVariant::DynamicOptionSelec};
  }
  return {*parse_variant(text)};
}

void print_summary(std::ostream& out, const std::vector<SimulationReport>& reports) {
  char line[256];
  std::snprintf(line, sizeof(line), "%-9s %8s %8s %9s %9s %9s %9s %12s %12s %9s\n", "variant",
                "placed", "rejected", "pct_1", "pct_2", "pct_3", "pct_gt3", "lat_mean_ms",
                "lat_stdev_ms", "anomalies");
  out << line;
  for (const auto& r : reports) {
    const auto h = segment_histogram(r);
    const auto lat = latency_stats(r);
    std::snprintf(line, sizeof(line), "%-9s %8zu %8zu %9s %9s %9s %9s %12.6f %12.6f %9zu\n",
                  std::string(to_string(r.variant)).c_str(), r.records.size(), r.rejections,
                  format_percentage(h.pct_1).c_str(), format_percentage(h.pct_2).c_str(),
                  format_percentage(h.pct_3).c_str(), format_percentage(h.pct_gt3).c_str(),
                  lat.mean, lat.stdev, r.anomalies);
    out << line;
  }
}

int simulate(const std::vector<VmEvent>& trace, const SimFlags& f, std::ostream& out,
             std::ostream& err) {
  const FleetSpec fleet = load_fleet(f.fleet);
  const auto variants = selected_variants(f.variant);

  std::vector<SimulationReport> reports(variants.size());
  std::vector<std::exception_ptr> failures(variants.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < variants.size(); i = next++) {
      try {
        SimOptions opts;
        opts.variant = variants[i];
        opts.n = f.n;
        opts.seed = f.seed;
        opts.initial_policy = *parse_policy(f.policy);
        opts.reselect_period =
            std::max<Timestamp>(1, static_cast<Timestamp>(f.period_hours * kSecondsPerHour));
        opts.measure_latency = !f.no_timing;
        opts.label = std::string(to_string(variants[i]));
        reports[i] = run(trace, fleet, opts);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::min<unsigned>(f.jobs, static_cast<unsigned>(variants.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : failures) {
    if (e) std::rethrow_exception(e);
  }

  out << "fleet " << f.fleet << " machines " << fleet.machine_count << '\n';
  print_summary(out, reports);

  if (!f.out.empty()) {
    const std::filesystem::path dir(f.out);
    const auto format = *parse_report_format(f.format);
    std::filesystem::create_directories(dir);
    {
      std::ofstream file(dir / "fleet.json", std::ios::binary | std::ios::trunc);
      file << fleet_spec_to_json(fleet) << '\n';
      if (!file) throw IoError("failed writing '" + (dir / "fleet.json").string() + "'");
    }
    if (reports.size() == 1) {
      emit(reports.front(), format, dir);
    } else if (format == ReportFormat::PlotData) {
      std::ofstream file(dir / "segments.dat", std::ios::binary | std::ios::trunc);
      file << segments_plotdata(reports);
      if (!file) throw IoError("failed writing '" + (dir / "segments.dat").string() + "'");
    } else {
      for (const auto& r : reports) emit(r, format, dir / std::string(to_string(r.variant)));
    }
  }

  int status = kOk;
  for (const auto& r : reports) {
    if (r.anomalies > f.max_anomalies) {
      err << "error: " << to_string(r.variant) << " run counted " << r.anomalies
          << " anomalies (limit " << f.max_anomalies << ")\n";
      status = kAnomalies;
    }
  }
  return status;
}

Bytes parse_address(const std::string& text) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos, 0);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size() || text.front() == '-') {
    throw ConfigError("bad address '" + text + "'");
  }
  return v;
}

std::string hex(Bytes v) {
  std::ostringstream s;
  s << "0x" << std::hex << v;
  return s.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Segment-based memory virtualization simulator"};
  app.name(args.empty() ? "segvirt" : std::filesystem::path(args.front()).filename().string());
  app.require_subcommand(1);

  SimFlags replay_flags;
  std::string trace_path;
  auto* replay = app.add_subcommand("replay", "Replay a VM start/stop trace on a fleet");
  replay->add_option("--trace", trace_path, "Trace CSV (vm_id,kind,time,cores,memory_bytes)")
      ->required();
  add_sim_flags(replay, replay_flags);

  SimFlags boot_flags;
  std::string snapshot_path;
  double horizon_hours = 1;
  auto* boot = app.add_subcommand("bootstorm", "Start every VM of a snapshot at once, then replay");
  boot->add_option("--snapshot", snapshot_path,
                   "Snapshot CSV (vm_id,cores,memory_bytes,host_id,host_ram_bytes,host_cores)")
      ->required();
  boot->add_option("--horizon-hours", horizon_hours, "Time at which every VM stops")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_sim_flags(boot, boot_flags);

  std::size_t vm_count = 0;
  std::string flavors_arg = "azure";
  std::string inter_arrival = "exp:60";
  std::string lifetime = "never";
  std::uint64_t gen_seed = 1;
  std::string gen_out = "-";
  auto* gen = app.add_subcommand("gen-trace", "Generate a synthetic trace");
  gen->add_option("--vms", vm_count, "Number of VMs")->required();
  gen->add_option("--flavors", flavors_arg,
                  "Flavor CSV (memory_bytes,cores,weight) or 'azure' for the built-in 14 flavors")
      ->capture_default_str();
  gen->add_option("--inter-arrival", inter_arrival,
                  "Seconds between arrivals: fixed:V, exp:MEAN or uniform:LO:HI")
      ->capture_default_str();
  gen->add_option("--lifetime", lifetime,
                  "VM lifetime in seconds: fixed:V, exp:MEAN, uniform:LO:HI or never")
      ->capture_default_str();
  gen->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output file, '-' for standard output")->capture_default_str();

  std::string registers_path;
  std::string gpa_text;
  auto* translate = app.add_subcommand("translate", "Translate a guest-physical address");
  translate->add_option("--registers", registers_path, "Register file (n, hbN, gbN, limit)")
      ->required();
  translate->add_option("--gpa", gpa_text, "Guest-physical address, decimal or 0x hex")
      ->required();

  std::vector<std::string> counters_paths;
  std::string mode_arg = "all";
  bool table = false;
  auto* cost = app.add_subcommand("costmodel", "Estimate the cost of memory virtualization");
  cost->add_option("--counters", counters_paths, "Counter file(s) of name = number lines")
      ->required();
  cost->add_option("--mode", mode_arg, "native, dsn, ept, shadow or all")
      ->check(CLI::IsMember({"native", "dsn", "ept", "shadow", "all"}))
      ->capture_default_str();
  cost->add_flag("--table", table,
                 "Print a CSV with C_DSn, C_EPT and C_Sha per counter file instead of JSON");

  std::string stats_trace;
  std::string stats_fleet;
  std::string cdf_path;
  auto* stats = app.add_subcommand("trace-stats", "Allocation frequency and demand-size CDF");
  stats->add_option("--trace", stats_trace, "Trace CSV")->required();
  stats->add_option("--fleet", stats_fleet, "Fleet JSON file or reference:N")->required();
  stats->add_option("--cdf", cdf_path, "Write the demand-size CDF as CSV to this file");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("segvirt");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*replay) {
      return simulate(parse_trace_file(trace_path), replay_flags, out, err);
    }
    if (*boot) {
      auto in = open_input(snapshot_path);
      const auto snapshot = parse_snapshot(in);
      const auto horizon =
          std::max<Timestamp>(1, static_cast<Timestamp>(horizon_hours * kSecondsPerHour));
      return simulate(derive_bootstorm(snapshot, horizon), boot_flags, out, err);
    }
    if (*gen) {
      SyntheticParams params;
      params.vm_count = vm_count;
      params.seed = gen_seed;
      params.inter_arrival = parse_distribution(inter_arrival);
      params.lifetime = parse_distribution(lifetime);
      if (flavors_arg == "azure") {
        params.flavors = azure_like_flavors();
      } else {
        auto in = open_input(flavors_arg);
        params.flavors = parse_flavors(in);
      }
      const auto events = gen_synthetic(params);
      if (gen_out == "-") {
        write_trace(out, events);
      } else {
        std::ofstream file(gen_out, std::ios::binary | std::ios::trunc);
        if (!file) throw IoError("cannot write '" + gen_out + "'");
        write_trace(file, events);
        if (!file) throw IoError("failed writing '" + gen_out + "'");
      }
      return kOk;
    }
    if (*translate) {
      auto in = open_input(registers_path);
      const auto regs = read_register_file(in);
      const Bytes gpa = parse_address(gpa_text);
      if (const auto hpa = try_translate(regs, gpa)) {
        out << "hpa " << hex(*hpa) << "\n";
        return kOk;
      }
      out << "violation gpa " << hex(gpa) << "\n";
      return kTranslationFault;
    }
    if (*cost) {
      std::vector<std::pair<std::string, WorkloadCounters>> workloads;
      for (const auto& path : counters_paths) {
        auto in = open_input(path);
        try {
          workloads.emplace_back(std::filesystem::path(path).stem().string(), read_counters(in));
        } catch (const ParseError& e) {
          throw ParseError(e.line(), path + ": " + e.reason());
        }
      }
      if (table) {
        out << cost_summary_csv(workloads);
        return kOk;
      }
      std::vector<WalkMode> modes;
      if (mode_arg == "all") {
        modes = {WalkMode::Native1D, WalkMode::DSn, WalkMode::EPT, WalkMode::Shadow};
      } else {
        modes = {*parse_walk_mode(mode_arg)};
      }
      for (const auto& [name, counters] : workloads) {
        for (WalkMode m : modes) out << to_json(virtualization_cost(m, counters)) << "\n";
      }
      return kOk;
    }
    if (*stats) {
      const auto trace = parse_trace_file(stats_trace);
      const auto machines = load_fleet(stats_fleet).machine_count;
      const auto freq = alloc_frequency(trace, machines);
      const auto cdf = demand_size_cdf(trace);
      out << "starts " << cdf.samples << "\n";
      out << "machines " << machines << "\n";
      out << "alloc_per_hour_per_server " << (freq ? std::to_string(*freq) : "undefined") << "\n";
      out << "distinct_sizes " << cdf.distinct << "\n";
      if (!cdf_path.empty()) {
        std::ofstream file(cdf_path, std::ios::binary | std::ios::trunc);
        if (!file) throw IoError("cannot write '" + cdf_path + "'");
        file << "memory_bytes,fraction\n";
        for (const auto& [size, frac] : cdf.points) {
          char buf[32];
          std::snprintf(buf, sizeof(buf), "%.9g", frac);
          file << size << ',' << buf << '\n';
        }
        if (!file) throw IoError("failed writing '" + cdf_path + "'");
      }
      return kOk;
    }
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kParse;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return kUsage;
}

}  // namespace segvirt::cli
