#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "support.hpp"

using namespace rlw::testing;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RLW_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, RunSucceeds) {
  const auto dir = scratch_dir("cli_run");
  EXPECT_EQ(run_cli("run --preset uniform-small --policy rlw --horizon 600 --seed 2 --out " + dir.string()), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "report.json"));
}

TEST(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run_cli("run --preset nowhere --policy rlw"), 2);
  EXPECT_EQ(run_cli("run --preset uniform-small --policy oracle"), 2);
  EXPECT_EQ(run_cli("run --config /nonexistent/config.json"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  const auto dir = scratch_dir("cli_bad");
  rlw::write_file(dir / "c.json", R"({"city": {"preset": "uniform-small"}, "policy": {"name": "rlw"}, "bogus": 1})");
  EXPECT_EQ(run_cli("run --config " + (dir / "c.json").string()), 2);
}

TEST(Cli, RuntimeErrorsExitThree) {
  EXPECT_EQ(run_cli("heatmap --run /nonexistent/run -t 0"), 3);
  const auto dir = scratch_dir("cli_badlog");
  rlw::write_file(dir / "events.jsonl", "{\"type\": \"order\"}\n");
  rlw::write_file(dir / "c.json", R"({"city": {"preset": "uniform-small", "log": ")" + (dir / "events.jsonl").string() +
                                      R"("}, "policy": {"name": "myopic"}, "horizon": 60})");
  EXPECT_EQ(run_cli("run --config " + (dir / "c.json").string() + " --out " + (dir / "out").string()), 3);
}

TEST(Cli, RerunsAreByteIdentical) {
  const auto a = scratch_dir("cli_a"), b = scratch_dir("cli_b");
  const std::string args = "run --preset imbalanced --policy rlw --horizon 3600 --seed 5 --out ";
  ASSERT_EQ(run_cli(args + a.string()), 0);
  ASSERT_EQ(run_cli(args + b.string()), 0);
  for (const char* f : {"report.json", "timeseries.csv", "values.csv", "value_table.csv", "thresholds.csv"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Cli, GenLogScalesPrices) {
  const auto a = scratch_dir("cli_log1"), b = scratch_dir("cli_log2");
  ASSERT_EQ(run_cli("gen-log --preset uniform-small --horizon 600 --seed 3 --out " + a.string()), 0);
  ASSERT_EQ(run_cli("gen-log --preset uniform-small --horizon 600 --seed 3 --price-scale 2 --out " + b.string()), 0);
  std::istringstream la(slurp(a / "events.jsonl")), lb(slurp(b / "events.jsonl"));
  std::string x, y;
  int orders = 0;
  while (std::getline(la, x)) {
    ASSERT_TRUE(std::getline(lb, y));
    const auto ja = rlw::Json::parse(x), jb = rlw::Json::parse(y);
    if (ja.at("type") != "order") continue;
    ++orders;
    EXPECT_EQ(jb.at("price").get<double>(), 2.0 * ja.at("price").get<double>());
    EXPECT_EQ(jb.at("o_row"), ja.at("o_row"));
    EXPECT_EQ(jb.at("dur_s"), ja.at("dur_s"));
  }
  EXPECT_FALSE(std::getline(lb, y));
  EXPECT_GT(orders, 0);
}

TEST(Cli, HeatmapFromRun) {
  const auto dir = scratch_dir("cli_heat");
  ASSERT_EQ(run_cli("run --preset uniform-small --policy rlw --horizon 3600 --seed 1 --out " + dir.string()), 0);
  EXPECT_EQ(run_cli("heatmap --run " + dir.string() + " -t 3600 --out " + (dir / "h.csv").string()), 0);
  EXPECT_EQ(slurp(dir / "h.csv"), rlw::cmd_heatmap(dir, 3600.0));
  EXPECT_EQ(run_cli("heatmap --run " + dir.string() + " -t 99999"), 3);
}
