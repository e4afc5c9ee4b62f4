#include <random>

#include <gtest/gtest.h>

#include "segvirt/metrics.hpp"
#include "segvirt/sim_engine.hpp"

namespace segvirt {
namespace {

FleetSpec one_machine(Bytes ram, unsigned cores) { return {{{"m", ram, cores, 100}}, 1, 0}; }

SimOptions opts(SimVariant v) {
  SimOptions o;
  o.variant = v;
  o.measure_latency = false;
  return o;
}

const SimVariant kAllVariants[] = {SimVariant::BaseLine, SimVariant::ImprovPlacementOpt1,
                                   SimVariant::ImprovPlacementOpt2,
                                   SimVariant::DynamicOptionSelec};

TEST(Run, OneVmOneSegment) {
  const std::vector<VmEvent> trace = {start_event("vm", 0, 1, 4 * GiB)};
  for (auto v : kAllVariants) {
    const auto r = run(trace, one_machine(16 * GiB, 8), opts(v));
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_EQ(r.records[0].k, 1u);
    EXPECT_EQ(r.records[0].mode, VmMode::DSn);
    EXPECT_EQ(r.rejections, 0u);
    EXPECT_EQ(r.anomalies, 0u);
  }
}

TEST(Run, BootstormOverflowIsRejected) {
  // 4 machines of 16 GiB hold 8 VMs of 8 GiB; 11 are requested.
  std::vector<SnapshotRecord> snap;
  for (int i = 0; i < 11; ++i) {
    snap.push_back({"vm" + std::to_string(10 + i), 1, 8 * GiB, "h", 16 * GiB, 8});
  }
  const FleetSpec fleet{{{"m", 16 * GiB, 64, 100}}, 4, 0};
  for (auto v : kAllVariants) {
    const auto r = run(derive_bootstorm(snap, 100), fleet, opts(v));
    EXPECT_EQ(r.records.size(), 8u);
    EXPECT_EQ(r.rejections, 3u);
    EXPECT_EQ(r.start_count, 11u);
    EXPECT_EQ(r.anomalies, 0u);
  }
}

TEST(Run, CoreLimitRejects) {
  const std::vector<VmEvent> trace = {start_event("a", 0, 6, GiB), start_event("b", 0, 6, GiB)};
  const auto r = run(trace, one_machine(16 * GiB, 8), opts(SimVariant::ImprovPlacementOpt1));
  EXPECT_EQ(r.rejections, 1u);
}

TEST(Run, Deterministic) {
  SyntheticParams p;
  p.vm_count = 2000;
  p.flavors = azure_like_flavors();
  p.lifetime = Distribution::exponential(6000);
  const auto trace = gen_synthetic(p);
  for (auto v : kAllVariants) {
    auto o = opts(v);
    o.reselect_period = 6 * kSecondsPerHour;
    const auto a = run(trace, reference_fleet(5), o);
    const auto b = run(trace, reference_fleet(5), o);
    EXPECT_EQ(a, b);
    EXPECT_EQ(report_json(a), report_json(b));
  }
}

TEST(Run, FallbackWhenTooManySegments) {
  // Opt1 on {[0,1G),[2G,3G),[4G,6G)} with M = 3 GiB gives k = 3 > n = 2.
  const std::vector<VmEvent> trace = {
      start_event("a", 0, 1, GiB),     start_event("b", 0, 1, GiB),
      start_event("c", 0, 1, GiB),     start_event("d", 0, 1, GiB),
      start_event("e", 0, 1, 2 * GiB), stop_event("a", 1),
      stop_event("c", 1),              stop_event("e", 1),
      start_event("x", 2, 1, 3 * GiB)};
  auto o = opts(SimVariant::ImprovPlacementOpt1);
  o.n = 2;
  const auto r1 = run(trace, one_machine(6 * GiB, 16), o);
  EXPECT_EQ(r1.records.back().k, 3u);
  EXPECT_EQ(r1.records.back().mode, VmMode::Fallback);
  o.variant = SimVariant::ImprovPlacementOpt2;
  const auto r2 = run(trace, one_machine(6 * GiB, 16), o);
  EXPECT_EQ(r2.records.back().k, 2u);
  EXPECT_EQ(r2.records.back().mode, VmMode::DSn);
}

TEST(Step, StartThenStopRestoresLayout) {
  for (auto v : kAllVariants) {
    SimulationState s(one_machine(16 * GiB, 8), opts(v));
    s.step(start_event("a", 0, 1, 3 * GiB + 12345));
    s.check_invariants();
    s.step(stop_event("a", 5));
    s.check_invariants();
    EXPECT_EQ(s.free_layout(0), s.initial_layout(0));
  }
}

TEST(Step, UnknownStopIsAnomaly) {
  SimulationState s(one_machine(16 * GiB, 8), opts(SimVariant::ImprovPlacementOpt1));
  s.step(start_event("a", 0, 1, GiB));
  const auto layout = s.free_layout(0);
  s.step(stop_event("ghost", 1));
  EXPECT_EQ(s.report().anomalies, 1u);
  EXPECT_EQ(s.free_layout(0), layout);
  EXPECT_EQ(s.live().size(), 1u);
}

TEST(Step, StopOfRejectedVmIsIgnored) {
  SimulationState s(one_machine(4 * GiB, 8), opts(SimVariant::ImprovPlacementOpt1));
  s.step(start_event("big", 0, 1, 8 * GiB));
  s.step(stop_event("big", 1));
  EXPECT_EQ(s.report().rejections, 1u);
  EXPECT_EQ(s.report().anomalies, 0u);
}

TEST(Step, EqualTimeStartsKeepInputOrder) {
  const std::vector<VmEvent> trace = {start_event("a", 0, 1, 2 * GiB),
                                      start_event("z", 5, 1, 2 * GiB), stop_event("a", 5),
                                      start_event("m", 5, 1, 2 * GiB)};
  const auto r = run(trace, one_machine(4 * GiB, 8), opts(SimVariant::ImprovPlacementOpt1));
  ASSERT_EQ(r.records.size(), 3u);
  EXPECT_EQ(r.records[1].vm_id, "z");
  EXPECT_EQ(r.records[2].vm_id, "m");
  EXPECT_EQ(r.rejections, 0u);
}

TEST(Step, MirrorsStayFaithfulUnderChurn) {
  SyntheticParams p;
  p.vm_count = 1500;
  p.flavors = azure_like_flavors();
  p.inter_arrival = Distribution::exponential(20);
  p.lifetime = Distribution::exponential(4000);
  p.seed = 4;
  const auto trace = replay_order(gen_synthetic(p));
  for (auto v : kAllVariants) {
    auto o = opts(v);
    o.reselect_period = 3 * kSecondsPerHour;
    SimulationState s(reference_fleet(5), o);
    for (std::size_t i = 0; i < trace.size(); ++i) {
      s.step(trace[i]);
      if (i % 50 == 0) ASSERT_NO_THROW(s.check_invariants()) << to_string(v) << " event " << i;
    }
    s.check_invariants();
    EXPECT_EQ(s.report().anomalies, 0u);
  }
}

TEST(Run, ReversibleWithImplicitStops) {
  SyntheticParams p;
  p.vm_count = 800;
  p.flavors = azure_like_flavors();
  p.lifetime = Distribution::exponential(20000);
  const auto trace = gen_synthetic(p);
  for (auto v : kAllVariants) {
    const auto r = run(trace, reference_fleet(5), opts(v));
    EXPECT_EQ(r.anomalies, 0u) << to_string(v);
    EXPECT_EQ(r.records.size() + r.rejections, r.start_count);
  }
}

TEST(Run, DynamicRecordsSwitches) {
  // Week 1 favours Opt2 (see the reselection test); week 2 is idle.
  std::vector<VmEvent> trace = {
      start_event("a", 0, 1, GiB),     start_event("b", 0, 1, GiB),
      start_event("c", 0, 1, GiB),     start_event("d", 0, 1, GiB),
      start_event("e", 0, 1, 2 * GiB), stop_event("a", 1),
      stop_event("c", 1),              stop_event("e", 1),
      start_event("x", 2, 1, 3 * GiB), stop_event("x", 3),
      stop_event("b", 3),              stop_event("d", 3),
      start_event("y", kSecondsPerWeek + 10, 1, GiB)};
  auto o = opts(SimVariant::DynamicOptionSelec);
  o.n = 2;
  o.initial_policy = AllocationPolicy::Opt1;
  SimulationState s(one_machine(6 * GiB, 16), o);
  for (const auto& e : trace) s.step(e);
  ASSERT_EQ(s.report().switches.size(), 1u);
  EXPECT_EQ(s.report().switches[0].policy, AllocationPolicy::Opt2);
  EXPECT_EQ(s.report().switches[0].time, kSecondsPerWeek);
  EXPECT_EQ(s.current_policy(), AllocationPolicy::Opt2);
}

TEST(Run, LatencyMeasuredWhenEnabled) {
  SyntheticParams p;
  p.vm_count = 200;
  p.flavors = azure_like_flavors();
  auto o = opts(SimVariant::BaseLine);
  o.measure_latency = true;
  const auto r = run(gen_synthetic(p), reference_fleet(5), o);
  const auto stats = latency_stats(r);
  EXPECT_TRUE(stats.defined);
  EXPECT_GT(stats.mean, 0);
}

}  // namespace
}  // namespace segvirt
