#include "segvirt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "segvirt/errors.hpp"

namespace segvirt {

SegmentHistogram segment_histogram(std::span<const std::size_t> segment_counts) {
  SegmentHistogram h;
  h.placed = segment_counts.size();
  if (segment_counts.empty()) return h;
  h.empty = false;
  std::size_t c1 = 0, c2 = 0, c3 = 0, more = 0;
  for (std::size_t k : segment_counts) {
    if (k <= 1) {
      ++c1;
    } else if (k == 2) {
      ++c2;
    } else if (k == 3) {
      ++c3;
    } else {
      ++more;
    }
  }
  const double total = static_cast<double>(segment_counts.size());
  h.pct_1 = 100.0 * static_cast<double>(c1) / total;
  h.pct_2 = 100.0 * static_cast<double>(c2) / total;
  h.pct_3 = 100.0 * static_cast<double>(c3) / total;
  h.pct_gt3 = 100.0 * static_cast<double>(more) / total;
  return h;
}

SegmentHistogram segment_histogram(const SimulationReport& report) {
  std::vector<std::size_t> ks;
  ks.reserve(report.records.size());
  for (const auto& r : report.records) ks.push_back(r.k);
  return segment_histogram(ks);
}

LatencyStats latency_stats(std::span<const double> samples_ms) {
  LatencyStats s;
  s.count = samples_ms.size();
  if (samples_ms.empty()) return s;
  s.defined = true;
  double sum = 0;
  for (double v : samples_ms) sum += v;
  s.mean = sum / static_cast<double>(s.count);
  double sq = 0;
  for (double v : samples_ms) sq += (v - s.mean) * (v - s.mean);
  s.stdev = std::sqrt(sq / static_cast<double>(s.count));
  return s;
}

LatencyStats latency_stats(const SimulationReport& report) {
  std::vector<double> ms;
  ms.reserve(report.records.size());
  for (const auto& r : report.records) {
    ms.push_back(std::chrono::duration<double, std::milli>(r.alloc_latency).count());
  }
  return latency_stats(ms);
}

std::optional<double> alloc_frequency(std::span<const VmEvent> trace, std::size_t machine_count,
                                      std::optional<double> duration_seconds) {
  if (machine_count == 0) return std::nullopt;
  std::size_t starts = 0;
  Timestamp lo = 0, hi = 0;
  bool first = true;
  for (const auto& ev : trace) {
    if (ev.kind == EventKind::Start) ++starts;
    lo = first ? ev.time : std::min(lo, ev.time);
    hi = first ? ev.time : std::max(hi, ev.time);
    first = false;
  }
  if (starts == 0) return 0.0;
  const double duration = duration_seconds.value_or(static_cast<double>(hi - lo));
  if (!(duration > 0)) return std::nullopt;
  const double hours = duration / static_cast<double>(kSecondsPerHour);
  return static_cast<double>(starts) / hours / static_cast<double>(machine_count);
}

DemandCdf demand_size_cdf(std::span<const VmEvent> trace) {
  std::map<Bytes, std::size_t> counts;
  DemandCdf cdf;
  for (const auto& ev : trace) {
    if (ev.kind != EventKind::Start) continue;
    ++counts[ev.memory_bytes];
    ++cdf.samples;
  }
  cdf.distinct = counts.size();
  std::size_t cumulative = 0;
  for (const auto& [size, count] : counts) {
    cumulative += count;
    cdf.points.emplace_back(size, static_cast<double>(cumulative) / static_cast<double>(cdf.samples));
  }
  return cdf;
}

std::string format_percentage(double pct) {
  char buf[32];
  if (pct != 0 && std::abs(pct) < 1e-3) {
    std::snprintf(buf, sizeof(buf), "%.2E", pct);
  } else {
    std::snprintf(buf, sizeof(buf), "%.3f", pct);
  }
  return buf;
}

std::string_view to_string(ReportFormat format) {
  switch (format) {
    case ReportFormat::Csv: return "csv";
    case ReportFormat::Json: return "json";
    case ReportFormat::PlotData: return "plotdata";
  }
  return "unknown";
}

std::optional<ReportFormat> parse_report_format(std::string_view text) {
  if (text == "csv") return ReportFormat::Csv;
  if (text == "json") return ReportFormat::Json;
  if (text == "plotdata") return ReportFormat::PlotData;
  return std::nullopt;
}

std::string histogram_csv(const SegmentHistogram& h) {
  return "pct_1,pct_2,pct_3,pct_gt3\n" + format_percentage(h.pct_1) + "," +
         format_percentage(h.pct_2) + "," + format_percentage(h.pct_3) + "," +
         format_percentage(h.pct_gt3) + "\n";
}

std::string vms_csv(const SimulationReport& report) {
  std::ostringstream out;
  out << "vm_id,machine_id,k,mode,alloc_latency_ns\n";
  for (const auto& r : report.records) {
    out << r.vm_id << ',' << r.machine_id << ',' << r.k << ',' << to_string(r.mode) << ','
        << r.alloc_latency.count() << '\n';
  }
  return out.str();
}

std::string summary_csv(const SimulationReport& report) {
  std::ostringstream out;
  out << "label,variant,n,seed,starts,placed,rejections,anomalies,switches\n";
  out << report.label << ',' << to_string(report.variant) << ',' << report.n << ','
      << report.seed << ',' << report.start_count << ',' << report.records.size() << ','
      << report.rejections << ',' << report.anomalies << ',' << report.switches.size() << '\n';
  return out.str();
}

std::string switches_csv(const SimulationReport& report) {
  std::ostringstream out;
  out << "time,policy\n";
  for (const auto& s : report.switches) out << s.time << ',' << to_string(s.policy) << '\n';
  return out.str();
}

std::string report_json(const SimulationReport& report) {
  using nlohmann::ordered_json;
  const auto h = segment_histogram(report);
  ordered_json j;
  j["label"] = report.label;
  j["variant"] = std::string(to_string(report.variant));
  j["n"] = report.n;
  j["seed"] = report.seed;
  j["starts"] = report.start_count;
  j["placed"] = report.records.size();
  j["rejections"] = report.rejections;
  j["anomalies"] = report.anomalies;
  j["histogram"] = {{"pct_1", h.pct_1}, {"pct_2", h.pct_2}, {"pct_3", h.pct_3},
                    {"pct_gt3", h.pct_gt3}};
  j["switches"] = ordered_json::array();
  for (const auto& s : report.switches) {
    j["switches"].push_back({{"time", s.time}, {"policy", std::string(to_string(s.policy))}});
  }
  j["vms"] = ordered_json::array();
  for (const auto& r : report.records) {
    j["vms"].push_back({{"vm_id", r.vm_id},
                        {"machine_id", r.machine_id},
                        {"k", r.k},
                        {"mode", std::string(to_string(r.mode))},
                        {"alloc_latency_ns", r.alloc_latency.count()}});
  }
  j["final_layouts"] = ordered_json::array();
  for (const auto& m : report.final_layouts) {
    ordered_json segs = ordered_json::array();
    for (const auto& s : m.free_segments) segs.push_back({s.base, s.limit});
    j["final_layouts"].push_back({{"machine_id", m.machine_id}, {"free", segs}});
  }
  return j.dump(2) + "\n";
}

std::string segments_plotdata(std::span<const SimulationReport> reports) {
  std::ostringstream out;
  out << "# " << kPlotDataVersion << "\n# cloud k proportion\n";
  for (const auto& r : reports) {
    const auto h = segment_histogram(r);
    const std::string cloud = r.label.empty() ? std::string(to_string(r.variant)) : r.label;
    const double pct[] = {h.pct_1, h.pct_2, h.pct_3, h.pct_gt3};
    for (int k = 0; k < 4; ++k) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), " %d %.6f\n", k + 1, pct[k] / 100.0);
      out << cloud << buf;
    }
  }
  return out.str();
}

std::string cost_summary_csv(
    std::span<const std::pair<std::string, WorkloadCounters>> workloads) {
  const bool seconds = !workloads.empty() &&
                       std::all_of(workloads.begin(), workloads.end(),
                                   [](const auto& w) { return w.second.cpu_hz.has_value(); });
  std::ostringstream out;
  out << "technology";
  for (const auto& [name, counters] : workloads) out << ',' << name;
  out << '\n';
  const std::pair<const char*, WalkMode> rows[] = {
      {"C_DSn", WalkMode::DSn}, {"C_EPT", WalkMode::EPT}, {"C_Sha", WalkMode::Shadow}};
  for (const auto& [label, mode] : rows) {
    out << label;
    for (const auto& [name, counters] : workloads) {
      const auto cost = virtualization_cost(mode, counters);
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.6g", seconds ? *cost.total_seconds : cost.total_cycles);
      out << ',' << buf;
    }
    out << '\n';
  }
  return out.str();
}

namespace {

std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name,
                                 const std::string& contents) {
  const auto path = dir / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << contents;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
  return path;
}

}  // namespace

std::vector<std::filesystem::path> emit(const SimulationReport& report, ReportFormat format,
                                        const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());

  std::vector<std::filesystem::path> written;
  switch (format) {
    case ReportFormat::Csv:
      written.push_back(write_file(out_dir, "histogram.csv", histogram_csv(segment_histogram(report))));
      written.push_back(write_file(out_dir, "vms.csv", vms_csv(report)));
      written.push_back(write_file(out_dir, "summary.csv", summary_csv(report)));
      written.push_back(write_file(out_dir, "switches.csv", switches_csv(report)));
      break;
    case ReportFormat::Json:
      written.push_back(write_file(out_dir, "report.json", report_json(report)));
      break;
    case ReportFormat::PlotData:
      written.push_back(write_file(out_dir, "segments.dat",
                                   segments_plotdata(std::span<const SimulationReport>(&report, 1))));
      break;
  }
  return written;
}

}  // namespace segvirt
