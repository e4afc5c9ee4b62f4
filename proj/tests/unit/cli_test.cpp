#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cli.hpp"

namespace segvirt {
namespace {

namespace fs = std::filesystem;

struct Result {
  int status;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "segvirt");
  std::ostringstream out, err;
  const int status = cli::run(args, out, err);
  return {status, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("segvirt_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& contents) {
    const auto p = dir_ / name;
    std::ofstream(p, std::ios::binary) << contents;
    return p.string();
  }

  static std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path dir_;
};

TEST_F(CliTest, HelpDocumentsFlags) {
  const auto r = run_cli({"replay", "--help"});
  EXPECT_EQ(r.status, 0);
  for (const char* flag : {"--trace", "--fleet", "--variant", "--n", "--seed", "--period-hours",
                           "--out", "--format"}) {
    EXPECT_NE(r.out.find(flag), std::string::npos) << flag;
  }
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run_cli({}).status, cli::kUsage);
  EXPECT_EQ(run_cli({"replay", "--trace", "t.csv"}).status, cli::kUsage);
  EXPECT_EQ(run_cli({"replay", "--trace", "t.csv", "--fleet", "reference:5", "--variant", "x"}).status,
            cli::kUsage);
  EXPECT_EQ(run_cli({"replay", "--trace", "t.csv", "--fleet", "reference:5", "--n", "9"}).status,
            cli::kUsage);
}

TEST_F(CliTest, ReplayWritesReport) {
  const auto trace = write("t.csv",
                           "vm_id,kind,time,cores,memory_bytes\n"
                           "vm1,start,0,2,4294967296\nvm2,start,5,1,1073741824\nvm1,stop,10,,\n");
  const auto out = (dir_ / "out").string();
  const auto r = run_cli({"replay", "--trace", trace, "--fleet", "reference:5", "--variant", "opt1",
                          "--out", out, "--no-timing"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("opt1"), std::string::npos);
  EXPECT_EQ(read(dir_ / "out" / "histogram.csv"), "pct_1,pct_2,pct_3,pct_gt3\n100.000,0.000,0.000,0.000\n");
  EXPECT_TRUE(fs::exists(dir_ / "out" / "vms.csv"));
  EXPECT_EQ(r.out.rfind("fleet reference:5 machines 5\n", 0), 0u) << r.out;
  EXPECT_NE(read(dir_ / "out" / "fleet.json").find("\"Godzilla\""), std::string::npos);
}

TEST_F(CliTest, ReplayAllVariantsIsDeterministic) {
  const auto trace = (dir_ / "g.csv").string();
  ASSERT_EQ(run_cli({"gen-trace", "--vms", "300", "--lifetime", "exp:3000", "--out", trace}).status,
            0);
  for (const char* sub : {"a", "b"}) {
    const auto r = run_cli({"replay", "--trace", trace, "--fleet", "reference:5", "--variant", "all",
                            "--format", "json", "--no-timing", "--jobs", "4", "--out",
                            (dir_ / sub).string()});
    ASSERT_EQ(r.status, 0) << r.err;
  }
  for (const char* v : {"baseline", "opt1", "opt2", "dynamic"}) {
    const auto a = read(dir_ / "a" / v / "report.json");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, read(dir_ / "b" / v / "report.json"));
  }
}

TEST_F(CliTest, ReplayPlotDataCombinesVariants) {
  const auto trace = write("t.csv", "vm1,start,0,2,4294967296\n");
  const auto r = run_cli({"replay", "--trace", trace, "--fleet", "reference:5", "--variant", "all",
                          "--format", "plotdata", "--out", (dir_ / "p").string()});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto text = read(dir_ / "p" / "segments.dat");
  EXPECT_NE(text.find("baseline 1 1.000000"), std::string::npos);
  EXPECT_NE(text.find("dynamic 4 0.000000"), std::string::npos);
}

TEST_F(CliTest, ReplayMissingFile) {
  const auto r = run_cli({"replay", "--trace", (dir_ / "none.csv").string(), "--fleet", "reference:5"});
  EXPECT_EQ(r.status, cli::kIo);
  EXPECT_NE(r.err.find("none.csv"), std::string::npos);
}

TEST_F(CliTest, ReplayMalformedTraceNamesLine) {
  const auto trace = write("bad.csv", "vm1,start,0,2,4096\nvm2,start,1,2,-4096\n");
  const auto r = run_cli({"replay", "--trace", trace, "--fleet", "reference:5"});
  EXPECT_EQ(r.status, cli::kParse);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
}

TEST_F(CliTest, ReplayBadFleet) {
  const auto trace = write("t.csv", "vm1,start,0,2,4096\n");
  EXPECT_EQ(run_cli({"replay", "--trace", trace, "--fleet", "reference:x"}).status, cli::kUsage);
  const auto fleet = write("f.json", "{\"machine_count\": 1}");
  EXPECT_EQ(run_cli({"replay", "--trace", trace, "--fleet", fleet}).status, cli::kParse);
}

TEST_F(CliTest, AnomalyThreshold) {
  // Two Starts of the same id only get through the sim engine, not the parser,
  // so the threshold is exercised with a bootstorm snapshot listing a VM twice.
  const auto snap = write("s.csv", "vm1,1,1073741824,h,8589934592,4\nvm1,1,1073741824,h,8589934592,4\n");
  const auto r = run_cli({"bootstorm", "--snapshot", snap, "--fleet", "reference:1"});
  EXPECT_EQ(r.status, cli::kAnomalies);
  EXPECT_EQ(run_cli({"bootstorm", "--snapshot", snap, "--fleet", "reference:1", "--max-anomalies",
                     "10"}).status,
            0);
}

TEST_F(CliTest, Bootstorm) {
  const auto snap = write("s.csv",
                          "vm_id,cores,memory_bytes,host_id,host_ram_bytes,host_cores\n"
                          "vm1,2,2147483648,h1,137438953472,24\n"
                          "vm2,4,8589934592,h2,137438953472,24\n");
  const auto r = run_cli({"bootstorm", "--snapshot", snap, "--fleet", "reference:5", "--variant", "dynamic"});
  EXPECT_EQ(r.status, 0) << r.err;
  const auto bad = write("b.csv", "vm1,2,abc,h1,1,1\n");
  const auto rb = run_cli({"bootstorm", "--snapshot", bad, "--fleet", "reference:5"});
  EXPECT_EQ(rb.status, cli::kParse);
  EXPECT_NE(rb.err.find("line 1"), std::string::npos);
}

TEST_F(CliTest, GenTraceSeedDeterminismAndDistinctSizes) {
  const auto a = run_cli({"gen-trace", "--vms", "10000", "--seed", "1"});
  const auto b = run_cli({"gen-trace", "--vms", "10000", "--seed", "1"});
  ASSERT_EQ(a.status, 0);
  EXPECT_EQ(a.out, b.out);
  const auto path = write("g.csv", a.out);
  const auto stats = run_cli({"trace-stats", "--trace", path, "--fleet", "reference:20"});
  ASSERT_EQ(stats.status, 0) << stats.err;
  EXPECT_NE(stats.out.find("distinct_sizes 14\n"), std::string::npos) << stats.out;
}

TEST_F(CliTest, GenTraceZeroVms) {
  const auto path = (dir_ / "empty.csv").string();
  ASSERT_EQ(run_cli({"gen-trace", "--vms", "0", "--out", path}).status, 0);
  EXPECT_EQ(read(path), "vm_id,kind,time,cores,memory_bytes\n");
}

TEST_F(CliTest, GenTraceBadDistribution) {
  EXPECT_EQ(run_cli({"gen-trace", "--vms", "5", "--lifetime", "exp:-3"}).status, cli::kUsage);
}

TEST_F(CliTest, Translate) {
  const auto one = write("one.txt", "n = 3\nhb0 = 0x40000000\nlimit = 0x140000000\n");
  auto r = run_cli({"translate", "--registers", one, "--gpa", "0x1000"});
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, "hpa 0x40001000\n");

  const auto two = write("two.txt",
                         "n = 3\nhb0 = 0x100000000\ngb1 = 0x80000000\nhb1 = 0x300000000\n"
                         "limit = 0x380000000\n");
  r = run_cli({"translate", "--registers", two, "--gpa", "0x80002000"});
  EXPECT_EQ(r.out, "hpa 0x300002000\n");

  r = run_cli({"translate", "--registers", one, "--gpa", "0x100000000"});
  EXPECT_EQ(r.status, cli::kTranslationFault);
  EXPECT_EQ(r.out, "violation gpa 0x100000000\n");

  EXPECT_EQ(run_cli({"translate", "--registers", one, "--gpa", "-1"}).status, cli::kUsage);
}

TEST_F(CliTest, CostModel) {
  const auto c = write("mcf.txt", "n_tlb = 1e6\nc_1d = 100\nc_2d = 600\n");
  auto r = run_cli({"costmodel", "--counters", c, "--mode", "dsn"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["total_cycles"], 1e8);

  r = run_cli({"costmodel", "--counters", c, "--mode", "shadow"});
  EXPECT_EQ(nlohmann::json::parse(r.out)["total_cycles"], 1e8);

  r = run_cli({"costmodel", "--counters", c, "--mode", "ept"});
  EXPECT_EQ(nlohmann::json::parse(r.out)["total_cycles"], 6e8);

  r = run_cli({"costmodel", "--counters", c, "--table"});
  EXPECT_EQ(r.out, "technology,mcf\nC_DSn,1e+08\nC_EPT,6e+08\nC_Sha,1e+08\n");

  const auto bad = write("bad.txt", "n_tlb = 1\nbogus = 2\n");
  r = run_cli({"costmodel", "--counters", bad});
  EXPECT_EQ(r.status, cli::kParse);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
}

}  // namespace
}  // namespace segvirt
