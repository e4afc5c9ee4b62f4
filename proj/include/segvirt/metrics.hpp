#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "segvirt/cost_model.hpp"
#include "segvirt/report.hpp"
#include "segvirt/trace_io.hpp"

namespace segvirt {

/// Share of placed VMs by segment count.
struct SegmentHistogram {
  double pct_1 = 0;
  double pct_2 = 0;
  double pct_3 = 0;
  double pct_gt3 = 0;
  std::size_t placed = 0;
  bool empty = true;  // no placed VMs; all percentages are zero
};

SegmentHistogram segment_histogram(const SimulationReport& report);
SegmentHistogram segment_histogram(std::span<const std::size_t> segment_counts);

/// Mean and population standard deviation. `defined` is false for an empty
/// sample set.
struct LatencyStats {
  double mean = 0;
  double stdev = 0;
  std::size_t count = 0;
  bool defined = false;

  /// stdev / mean; 0 when the mean is 0.
  double coefficient_of_variation() const noexcept { return mean > 0 ? stdev / mean : 0; }
};

LatencyStats latency_stats(std::span<const double> samples_ms);
/// Latencies of every placed VM, in milliseconds.
LatencyStats latency_stats(const SimulationReport& report);

/// Starts per hour per server. 0 when the trace has no Start; nullopt when it
/// has Starts but zero duration (max time - min time, unless given).
std::optional<double> alloc_frequency(std::span<const VmEvent> trace, std::size_t machine_count,
                                      std::optional<double> duration_seconds = std::nullopt);

/// Empirical CDF of Start memory sizes: (size, fraction of Starts <= size),
/// ascending.
struct DemandCdf {
  std::vector<std::pair<Bytes, double>> points;
  std::size_t distinct = 0;
  std::size_t samples = 0;
};

DemandCdf demand_size_cdf(std::span<const VmEvent> trace);

/// Percentages with three decimals; non-zero values below 1e-3 in scientific
/// notation with three significant digits ("6.18E-05").
std::string format_percentage(double pct);

enum class ReportFormat { Csv, Json, PlotData };

std::string_view to_string(ReportFormat format);
std::optional<ReportFormat> parse_report_format(std::string_view text);

/// Files written for each format (names relative to the output directory):
///   csv:      histogram.csv, vms.csv, summary.csv, switches.csv
///   json:     report.json
///   plotdata: segments.dat
/// Latencies appear in vms.csv / report.json only; with latency measurement
/// disabled they are zero and output is byte-identical across runs.
/// Returns the written paths. Throws IoError if a file cannot be written.
std::vector<std::filesystem::path> emit(const SimulationReport& report, ReportFormat format,
                                        const std::filesystem::path& out_dir);

std::string histogram_csv(const SegmentHistogram& histogram);
std::string vms_csv(const SimulationReport& report);
std::string summary_csv(const SimulationReport& report);
std::string switches_csv(const SimulationReport& report);
std::string report_json(const SimulationReport& report);

/// Version tag on the first line of plotdata output.
inline constexpr std::string_view kPlotDataVersion = "segvirt-plotdata 1";

/// Whitespace-separated (cloud, k, proportion) rows for k = 1, 2, 3, 4 (>3),
/// one block per report, preceded by '#' header lines.
std::string segments_plotdata(std::span<const SimulationReport> reports);

/// Total cost per technology and workload: header `technology,<workload>...`
/// followed by the rows C_DSn, C_EPT and C_Sha. Values are seconds when every
/// workload has cpu_hz, cycles otherwise.
std::string cost_summary_csv(
    std::span<const std::pair<std::string, WorkloadCounters>> workloads);

}  // namespace segvirt
