#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "segvirt/cost_model.hpp"
#include "segvirt/errors.hpp"

namespace segvirt {
namespace {

TEST(WalkRefs, NestedWalkIsTwentyFour) {
  EXPECT_EQ(walk_refs(WalkMode::EPT), 24u);
  EXPECT_EQ(walk_refs(WalkMode::DSn), 4u);
  EXPECT_EQ(walk_refs(WalkMode::Native1D), 4u);
  EXPECT_EQ(walk_refs(WalkMode::Shadow), 4u);
}

TEST(WalkRefs, OtherDepths) {
  // (levels + 1)^2 - 1
  EXPECT_EQ(walk_refs(WalkMode::EPT, 5), 35u);
  EXPECT_EQ(walk_refs(WalkMode::EPT, 3), 15u);
  EXPECT_EQ(walk_refs(WalkMode::DSn, 5), 5u);
}

TEST(DsnRegOps, TwoPerLevel) {
  EXPECT_EQ(dsn_reg_ops(4), 8u);
  EXPECT_EQ(dsn_reg_ops(1), 2u);
  EXPECT_THROW(dsn_reg_ops(0), PreconditionError);
}

TEST(RuntimeDsn, Examples) {
  WorkloadCounters c;
  c.t_1d = 10;
  EXPECT_EQ(estimate_runtime_dsn(c), 10.0);
  c.n_tlb = 1e9;
  c.t_reg2reg = 5e-9;
  EXPECT_EQ(estimate_runtime_dsn(c), 15.0);
  EXPECT_EQ(estimate_runtime_dsn(WorkloadCounters{}), 0.0);
}

TEST(VirtualizationCost, Formulas) {
  WorkloadCounters c;
  c.c_1d = 100;
  c.n_tlb = 1e6;
  EXPECT_EQ(virtualization_cost(WalkMode::DSn, c).total_cycles, 1e8);
  EXPECT_EQ(virtualization_cost(WalkMode::Shadow, c).total_cycles, 1e8);

  c.c_2d = 600;
  EXPECT_EQ(virtualization_cost(WalkMode::EPT, c).total_cycles /
                virtualization_cost(WalkMode::DSn, c).total_cycles,
            6.0);

  c.n_exit = 1000;
  c.c_exit = 2000;
  c.c_handler = 500;
  const auto sha = virtualization_cost(WalkMode::Shadow, c);
  EXPECT_EQ(sha.walk_cycles, 1e8);
  EXPECT_EQ(sha.exit_cycles, 2.5e6);
  EXPECT_EQ(sha.total_cycles, 1.025e8);
}

TEST(VirtualizationCost, SecondsWhenClockKnown) {
  WorkloadCounters c;
  c.c_1d = 100;
  c.n_tlb = 1e6;
  EXPECT_FALSE(virtualization_cost(WalkMode::DSn, c).total_seconds.has_value());
  c.cpu_hz = 2e9;
  EXPECT_EQ(virtualization_cost(WalkMode::DSn, c).total_seconds, 0.05);
}

TEST(VirtualizationCost, Monotone) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1e6);
  for (int i = 0; i < 2000; ++i) {
    WorkloadCounters c;
    c.n_tlb = u(rng);
    c.c_1d = u(rng) / 1e3;
    c.c_2d = c.c_1d + u(rng) / 1e3;
    c.n_exit = u(rng);
    c.c_exit = u(rng) / 1e2;
    c.c_handler = u(rng) / 1e2;
    const auto dsn = virtualization_cost(WalkMode::DSn, c).total_cycles;
    EXPECT_GE(virtualization_cost(WalkMode::EPT, c).total_cycles, dsn);
    EXPECT_GE(virtualization_cost(WalkMode::Shadow, c).total_cycles, dsn);
  }
}

TEST(VirtualizationCost, NegativeCountersRejected) {
  WorkloadCounters c;
  c.n_tlb = -1;
  EXPECT_THROW(virtualization_cost(WalkMode::DSn, c), PreconditionError);
}

TEST(ReadCounters, ParsesKnownKeys) {
  std::istringstream in(
      "# mcf\n"
      "n_tlb = 1e6\n"
      "c_1d = 100   # cycles\n"
      "c_2d = 600\n"
      "cpu_hz = 2.5e9\n");
  const auto c = read_counters(in);
  EXPECT_EQ(c.n_tlb, 1e6);
  EXPECT_EQ(c.c_1d, 100);
  EXPECT_EQ(c.c_2d, 600);
  EXPECT_EQ(c.n_exit, 0);
  EXPECT_EQ(c.cpu_hz, 2.5e9);
}

TEST(ReadCounters, Errors) {
  std::istringstream unknown("n_tlbs = 1\n");
  EXPECT_THROW(read_counters(unknown), ParseError);
  std::istringstream negative("c_1d = -3\n");
  EXPECT_THROW(read_counters(negative), ParseError);
  std::istringstream junk("c_1d = 3x\n");
  EXPECT_THROW(read_counters(junk), ParseError);
  std::istringstream duplicate("c_1d = 3\nc_1d = 4\n");
  EXPECT_THROW(read_counters(duplicate), ParseError);
}

TEST(CostJson, FieldsAndTotals) {
  WorkloadCounters c;
  c.c_1d = 100;
  c.n_tlb = 10;
  c.n_exit = 2;
  c.c_exit = 5;
  const auto j = nlohmann::json::parse(to_json(virtualization_cost(WalkMode::Shadow, c)));
  EXPECT_EQ(j["mode"], "shadow");
  EXPECT_EQ(j["walk_cycles"], 1000.0);
  EXPECT_EQ(j["exit_cycles"], 10.0);
  EXPECT_EQ(j["total_cycles"], 1010.0);
  EXPECT_FALSE(j.contains("total_seconds"));
}

TEST(WalkMode, StringsRoundTrip) {
  for (auto m : {WalkMode::Native1D, WalkMode::DSn, WalkMode::EPT, WalkMode::Shadow}) {
    EXPECT_EQ(parse_walk_mode(to_string(m)), m);
  }
  EXPECT_EQ(parse_walk_mode("npt"), std::nullopt);
}

}  // namespace
}  // namespace segvirt
