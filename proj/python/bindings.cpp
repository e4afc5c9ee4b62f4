#include <sstream>

#include <pybind11/chrono.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "segvirt/buddy_allocator.hpp"
#include "segvirt/cost_model.hpp"
#include "segvirt/dsn_mmu.hpp"
#include "segvirt/errors.hpp"
#include "segvirt/metrics.hpp"
#include "segvirt/scheduler.hpp"
#include "segvirt/segment_allocator.hpp"
#include "segvirt/sim_engine.hpp"
#include "segvirt/trace_io.hpp"

namespace py = pybind11;
using namespace segvirt;

namespace {

std::vector<SegmentDescriptor> segments_of(const FreeSegmentList& list) {
  const auto s = list.segments();
  return {s.begin(), s.end()};
}

void register_errors(py::module_& m) {
  auto& base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidSizeError>(m, "InvalidSizeError", base.ptr());
  py::register_exception<InsufficientMemoryError>(m, "InsufficientMemoryError", base.ptr());
  py::register_exception<OverlapError>(m, "OverlapError", base.ptr());
  py::register_exception<InconsistencyError>(m, "InconsistencyError", base.ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<DsnViolation>(m, "DsnViolation", base.ptr());
  py::register_exception<NoCandidateError>(m, "NoCandidateError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
}

void bind_allocators(py::module_& m) {
  py::class_<SegmentDescriptor>(m, "SegmentDescriptor")
      .def(py::init<Bytes, Bytes, Timestamp>(), py::arg("base"), py::arg("limit"),
           py::arg("date") = 0)
      .def_readwrite("base", &SegmentDescriptor::base)
      .def_readwrite("limit", &SegmentDescriptor::limit)
      .def_readwrite("date", &SegmentDescriptor::date)
      .def_property_readonly("size", &SegmentDescriptor::size)
      .def(py::self == py::self)
      .def("__repr__", [](const SegmentDescriptor& s) {
        std::ostringstream o;
        o << "SegmentDescriptor(0x" << std::hex << s.base << ", 0x" << s.limit << std::dec
          << ", date=" << s.date << ")";
        return o.str();
      });

  py::enum_<AllocationPolicy>(m, "AllocationPolicy")
      .value("Opt1", AllocationPolicy::Opt1)
      .value("Opt2", AllocationPolicy::Opt2);

  py::enum_<VmMode>(m, "VmMode").value("DSn", VmMode::DSn).value("Fallback", VmMode::Fallback);

  py::class_<VMAllocation>(m, "VMAllocation")
      .def(py::init([](VmId id, std::vector<SegmentDescriptor> segs) {
             return VMAllocation{std::move(id), std::move(segs)};
           }),
           py::arg("vm_id"), py::arg("segments"))
      .def_readonly("vm_id", &VMAllocation::vm_id)
      .def_readonly("segments", &VMAllocation::segments)
      .def_readonly("mode", &VMAllocation::mode)
      .def_readonly("alloc_latency", &VMAllocation::alloc_latency)
      .def_property_readonly("k", &VMAllocation::k)
      .def_property_readonly("size", &VMAllocation::size);

  py::class_<FreeSegmentList>(m, "FreeSegmentList")
      .def(py::init<MachineId, Bytes, Bytes>(), py::arg("machine_id"), py::arg("total_bytes"),
           py::arg("reserved_bytes"))
      .def_property_readonly("machine_id", &FreeSegmentList::machine_id)
      .def_property_readonly("total_bytes", &FreeSegmentList::total_bytes)
      .def_property_readonly("reserved_bytes", &FreeSegmentList::reserved_bytes)
      .def_property_readonly("free_bytes", &FreeSegmentList::free_bytes)
      .def_property_readonly("allocated_bytes", &FreeSegmentList::allocated_bytes)
      .def_property_readonly("largest_segment", &FreeSegmentList::largest_segment)
      .def_property_readonly("segments", &segments_of)
      .def("allocate", &FreeSegmentList::allocate, py::arg("vm_id"), py::arg("demand"),
           py::arg("policy") = AllocationPolicy::Opt1, py::arg("now") = 0)
      .def("peek_segment_count", &FreeSegmentList::peek_segment_count, py::arg("demand"),
           py::arg("policy") = AllocationPolicy::Opt1)
      .def("release", &FreeSegmentList::release, py::arg("allocation"), py::arg("now") = 0)
      .def("carve", &FreeSegmentList::carve, py::arg("range"), py::arg("now") = 0)
      .def("check_invariants", &FreeSegmentList::check_invariants)
      .def(py::self == py::self);

  m.def("new_machine", &new_machine, py::arg("total_bytes"), py::arg("reserved_bytes") = 0,
        py::arg("machine_id") = 0);

  py::class_<BuddyAllocator>(m, "BuddyAllocator")
      .def(py::init<Bytes, Bytes, unsigned>(), py::arg("total_bytes"),
           py::arg("reserved_bytes") = 0, py::arg("max_order") = BuddyAllocator::kDefaultMaxOrder)
      .def_property_readonly("free_bytes", &BuddyAllocator::free_bytes)
      .def("allocate", &BuddyAllocator::allocate, py::arg("vm_id"), py::arg("demand"),
           py::arg("now") = 0)
      .def("release", &BuddyAllocator::release, py::arg("allocation"))
      .def("free_layout", &BuddyAllocator::free_layout);
}

void bind_mmu(py::module_& m) {
  m.attr("MAX_DSN_SEGMENTS") = kMaxDsnSegments;

  py::class_<DsnRegisterFile>(m, "DsnRegisterFile")
      .def_readonly("n", &DsnRegisterFile::n)
      .def_readonly("guest_base", &DsnRegisterFile::guest_base)
      .def_readonly("host_base", &DsnRegisterFile::host_base)
      .def_readonly("limit", &DsnRegisterFile::limit)
      .def_property_readonly("k", &DsnRegisterFile::k)
      .def_property_readonly("guest_size", &DsnRegisterFile::guest_size)
      .def(py::self == py::self)
      .def("__str__", [](const DsnRegisterFile& r) {
        std::ostringstream o;
        write_register_file(o, r);
        return o.str();
      });

  m.def("build_register_file", &build_register_file, py::arg("allocation"),
        py::arg("guest_mem_bytes"), py::arg("n") = 3);
  m.def("translate_gpa", &translate_gpa, py::arg("regs"), py::arg("gpa"));
  m.def("read_register_file", [](const std::string& text) {
    std::istringstream in(text);
    return read_register_file(in);
  });

  py::enum_<WalkMode>(m, "WalkMode")
      .value("Native1D", WalkMode::Native1D)
      .value("DSn", WalkMode::DSn)
      .value("EPT", WalkMode::EPT)
      .value("Shadow", WalkMode::Shadow);

  m.def("walk_refs", &walk_refs, py::arg("mode"), py::arg("levels") = kDefaultWalkLevels);
  m.def("dsn_reg_ops", &dsn_reg_ops, py::arg("levels") = kDefaultWalkLevels);

  py::class_<WorkloadCounters>(m, "WorkloadCounters")
      .def(py::init<>())
      .def_readwrite("n_tlb", &WorkloadCounters::n_tlb)
      .def_readwrite("n_exit", &WorkloadCounters::n_exit)
      .def_readwrite("c_1d", &WorkloadCounters::c_1d)
      .def_readwrite("c_2d", &WorkloadCounters::c_2d)
      .def_readwrite("c_exit", &WorkloadCounters::c_exit)
      .def_readwrite("c_handler", &WorkloadCounters::c_handler)
      .def_readwrite("t_1d", &WorkloadCounters::t_1d)
      .def_readwrite("t_reg2reg", &WorkloadCounters::t_reg2reg)
      .def_readwrite("cpu_hz", &WorkloadCounters::cpu_hz);

  py::class_<CostBreakdown>(m, "CostBreakdown")
      .def_readonly("mode", &CostBreakdown::mode)
      .def_readonly("walk_cycles", &CostBreakdown::walk_cycles)
      .def_readonly("exit_cycles", &CostBreakdown::exit_cycles)
      .def_readonly("total_cycles", &CostBreakdown::total_cycles)
      .def_readonly("total_seconds", &CostBreakdown::total_seconds)
      .def("to_json", [](const CostBreakdown& c) { return to_json(c); });

  m.def("estimate_runtime_dsn", &estimate_runtime_dsn, py::arg("counters"));
  m.def("virtualization_cost", &virtualization_cost, py::arg("mode"), py::arg("counters"));
}

void bind_traces(py::module_& m) {
  py::enum_<EventKind>(m, "EventKind")
      .value("Start", EventKind::Start)
      .value("Stop", EventKind::Stop);

  py::class_<VmEvent>(m, "VmEvent")
      .def_readonly("vm_id", &VmEvent::vm_id)
      .def_readonly("kind", &VmEvent::kind)
      .def_readonly("time", &VmEvent::time)
      .def_readonly("cores", &VmEvent::cores)
      .def_readonly("memory_bytes", &VmEvent::memory_bytes)
      .def(py::self == py::self);

  m.def("start_event", &start_event, py::arg("vm_id"), py::arg("time"), py::arg("cores"),
        py::arg("memory_bytes"));
  m.def("stop_event", &stop_event, py::arg("vm_id"), py::arg("time"));
  m.def("parse_trace", [](const std::string& text) {
    std::istringstream in(text);
    return parse_trace(in);
  });
  m.def("write_trace", [](const std::vector<VmEvent>& events) {
    std::ostringstream out;
    write_trace(out, events);
    return out.str();
  });

  py::class_<Flavor>(m, "Flavor")
      .def(py::init<Bytes, unsigned, double>(), py::arg("memory_bytes"), py::arg("cores"),
           py::arg("weight") = 1.0)
      .def_readonly("memory_bytes", &Flavor::memory_bytes)
      .def_readonly("cores", &Flavor::cores)
      .def_readonly("weight", &Flavor::weight);

  m.def("azure_like_flavors", &azure_like_flavors);
  m.def(
      "gen_synthetic",
      [](std::size_t vm_count, std::optional<std::vector<Flavor>> flavors,
         const std::string& inter_arrival, const std::string& lifetime, std::uint64_t seed) {
        SyntheticParams p;
        p.vm_count = vm_count;
        p.flavors = flavors ? *flavors : azure_like_flavors();
        p.inter_arrival = parse_distribution(inter_arrival);
        p.lifetime = parse_distribution(lifetime);
        p.seed = seed;
        return gen_synthetic(p);
      },
      py::arg("vm_count"), py::arg("flavors") = py::none(), py::arg("inter_arrival") = "exp:60",
      py::arg("lifetime") = "never", py::arg("seed") = 1);

  py::class_<FleetSpec>(m, "FleetSpec")
      .def_readonly("machine_count", &FleetSpec::machine_count)
      .def_readwrite("reserved_bytes", &FleetSpec::reserved_bytes)
      .def("to_json", [](const FleetSpec& f) { return fleet_spec_to_json(f); });
  m.def("reference_fleet", &reference_fleet, py::arg("machine_count"));
  m.def("parse_fleet_spec", [](const std::string& text) {
    std::istringstream in(text);
    return parse_fleet_spec(in);
  });
}

void bind_simulation(py::module_& m) {
  py::enum_<SimVariant>(m, "SimVariant")
      .value("BaseLine", SimVariant::BaseLine)
      .value("ImprovPlacementOpt1", SimVariant::ImprovPlacementOpt1)
      .value("ImprovPlacementOpt2", SimVariant::ImprovPlacementOpt2)
      .value("DynamicOptionSelec", SimVariant::DynamicOptionSelec);

  py::class_<SimOptions>(m, "SimOptions")
      .def(py::init<>())
      .def_readwrite("variant", &SimOptions::variant)
      .def_readwrite("n", &SimOptions::n)
      .def_readwrite("initial_policy", &SimOptions::initial_policy)
      .def_readwrite("reselect_period", &SimOptions::reselect_period)
      .def_readwrite("buddy_max_order", &SimOptions::buddy_max_order)
      .def_readwrite("measure_latency", &SimOptions::measure_latency)
      .def_readwrite("seed", &SimOptions::seed)
      .def_readwrite("label", &SimOptions::label);

  py::class_<VmRecord>(m, "VmRecord")
      .def_readonly("vm_id", &VmRecord::vm_id)
      .def_readonly("machine_id", &VmRecord::machine_id)
      .def_readonly("k", &VmRecord::k)
      .def_readonly("mode", &VmRecord::mode)
      .def_readonly("alloc_latency", &VmRecord::alloc_latency);

  py::class_<SimulationReport>(m, "SimulationReport")
      .def_readonly("label", &SimulationReport::label)
      .def_readonly("variant", &SimulationReport::variant)
      .def_readonly("records", &SimulationReport::records)
      .def_readonly("start_count", &SimulationReport::start_count)
      .def_readonly("rejections", &SimulationReport::rejections)
      .def_readonly("anomalies", &SimulationReport::anomalies)
      .def_property_readonly("switches",
                             [](const SimulationReport& r) {
                               std::vector<std::pair<Timestamp, AllocationPolicy>> out;
                               for (const auto& s : r.switches) out.emplace_back(s.time, s.policy);
                               return out;
                             })
      .def("to_json", [](const SimulationReport& r) { return report_json(r); })
      .def("same_outcome", &SimulationReport::same_outcome);

  m.def(
      "run",
      [](const std::vector<VmEvent>& trace, const FleetSpec& fleet, const SimOptions& options) {
        py::gil_scoped_release release;
        return run(trace, fleet, options);
      },
      py::arg("trace"), py::arg("fleet"), py::arg("options") = SimOptions{});

  py::class_<SegmentHistogram>(m, "SegmentHistogram")
      .def_readonly("pct_1", &SegmentHistogram::pct_1)
      .def_readonly("pct_2", &SegmentHistogram::pct_2)
      .def_readonly("pct_3", &SegmentHistogram::pct_3)
      .def_readonly("pct_gt3", &SegmentHistogram::pct_gt3)
      .def_readonly("placed", &SegmentHistogram::placed)
      .def_readonly("empty", &SegmentHistogram::empty)
      .def("as_tuple", [](const SegmentHistogram& h) {
        return py::make_tuple(h.pct_1, h.pct_2, h.pct_3, h.pct_gt3);
      });

  m.def("segment_histogram",
        py::overload_cast<const SimulationReport&>(&segment_histogram), py::arg("report"));
  m.def("latency_stats", [](const SimulationReport& r) {
    const auto s = latency_stats(r);
    return s.defined ? py::object(py::make_tuple(s.mean, s.stdev)) : py::object(py::none());
  });
  m.def("format_percentage", &format_percentage);
}

}  // namespace

PYBIND11_MODULE(_segvirt, m) {
  m.doc() = "Direct-segment memory allocation, DS-n translation and placement simulator";
  m.attr("KiB") = KiB;
  m.attr("MiB") = MiB;
  m.attr("GiB") = GiB;
  m.attr("SECONDS_PER_WEEK") = kSecondsPerWeek;
  register_errors(m);
  bind_allocators(m);
  bind_mmu(m);
  bind_traces(m);
  bind_simulation(m);
}
