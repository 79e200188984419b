#include <gtest/gtest.h>

#include <fstream>

#include "pilot/scenario.hpp"
#include "support/anpr.hpp"
#include "support/process.hpp"
#include "support/risk_table.hpp"

namespace pilot {
namespace {

using testing::quoted;
using testing::run_cli;

std::string data(const std::string& name) { return quoted(testing::data_path(name)); }

std::string write_policy(const testing::TempDir& dir, const std::string& name, const std::string& text) {
  const auto path = dir.path() / name;
  std::ofstream(path) << text << "\n";
  return quoted(path.string());
}

TEST(Cli, ParsePrintsAbstractForm) {
  const auto r = run_cli("parse " + data("alice.pilot"));
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, "(number_plate, <car_location is Lyon, Parket, <{commercial_offers}, 21/03/2019>>, {})\n");
  const auto j = run_cli("--format json parse --scenario " + data("anpr.scenario.json") + " " + data("parket.pilot"));
  ASSERT_EQ(j.status, 0);
  EXPECT_EQ(json::parse(j.out)["policy"], policy_to_json(testing::parket_policy()));
}

TEST(Cli, CheckBothDirections) {
  EXPECT_EQ(run_cli("check " + data("alice.pilot") + " " + data("parket.pilot")).out, "subsumes: yes\n");
  const auto r = run_cli("--format json check " + data("parket.pilot") + " " + data("alice.pilot"));
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(json::parse(r.out)["subsumes"], false);
}

TEST(Cli, Join) {
  const auto r = run_cli("join " + data("alice.pilot") + " " + data("parket.pilot"));
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out,
            "Parket may collect data of type number_plate if car_location is Lyon and true and use it for commercial_offers "
            "purposes until 21/03/2019.\n");
}

TEST(Cli, IncomparableJoinIsDomainError) {
  testing::TempDir dir;
  const auto a = write_policy(dir, "a.pilot",
                              "Parket may collect data of type number_plate and use it for no purposes until 01/01/2020.");
  const auto b = write_policy(dir, "b.pilot",
                              "ParketWW may collect data of type number_plate and use it for no purposes until 01/01/2020.");
  const auto r = run_cli("join " + a + " " + b, true);
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.out.find("incomparable"), std::string::npos);
  const auto lit = run_cli("join --literal-min " + a + " " + b);
  EXPECT_EQ(lit.status, 0);
  EXPECT_EQ(lit.out.rfind("ParketWW may collect", 0), 0u);
}

TEST(Cli, VerifyRedWitness) {
  const auto r = run_cli("--format json verify " + data("anpr.scenario.json") +
                         " --question carinsure_receives --variant p_trans"
                         " --assume ww_leaks_to_carinsure --assume carinsure_profiles --assume ww_leaks_to_carinsure");
  ASSERT_EQ(r.status, 0);
  const json v = json::parse(r.out);
  EXPECT_EQ(v["answer"], "yes");
  EXPECT_EQ(v["respected"], "red");
  EXPECT_EQ(v["witness"].back()["kind"], "illegal_transfer");
  EXPECT_FALSE(v.contains("record"));
}

TEST(Cli, VerifyTextAndStore) {
  testing::TempDir dir;
  const auto r = run_cli("verify " + data("anpr.scenario.json") + " --question parket_receives --variant p_trans --store " +
                         quoted(dir.path().string()));
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("answer: yes (green)"), std::string::npos) << r.out;
  const auto at = r.out.find("record: ");
  ASSERT_NE(at, std::string::npos);
  const std::string id = r.out.substr(at + 8, 16);
  EXPECT_TRUE(std::filesystem::exists(Store(dir.path()).record_path(id)));
}

TEST(Cli, TableText) {
  const auto r = run_cli("table " + data("anpr.scenario.json"));
  ASSERT_EQ(r.status, 0);
  std::vector<std::string> lines;
  std::size_t start = 0;
  for (std::size_t nl; (nl = r.out.find('\n', start)) != std::string::npos; start = nl + 1)
    lines.push_back(r.out.substr(start, nl - start));
  ASSERT_EQ(lines.size(), 9u);
  for (std::size_t q = 0; q < 6; ++q) {
    const auto& line = lines[3 + q];
    std::vector<std::string> cells;
    for (std::size_t p = line.find(" | "); p != std::string::npos; p = line.find(" | ", p + 1)) {
      auto end = line.find(" | ", p + 1);
      std::string c = line.substr(p + 3, end == std::string::npos ? std::string::npos : end - p - 3);
      c.erase(c.find_last_not_of(' ') + 1);
      cells.push_back(c);
    }
    ASSERT_EQ(cells.size(), 4u) << line;
    for (std::size_t c = 0; c < 4; ++c) {
      const auto want = testing::risk_table()[q].cells[c];
      EXPECT_EQ(cells[c], std::string(want.yes ? "Yes" : "No") + (want.red ? " (red)" : "")) << line;
    }
  }
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("").status, 2);
  EXPECT_EQ(run_cli("bogus").status, 2);
  EXPECT_EQ(run_cli("--format xml parse " + data("alice.pilot")).status, 2);
  EXPECT_EQ(run_cli("verify " + data("anpr.scenario.json")).status, 2);
  EXPECT_EQ(run_cli("verify " + data("anpr.scenario.json") + " --question nope").status, 1);
  EXPECT_EQ(run_cli("parse /nonexistent.pilot").status, 1);
  EXPECT_EQ(run_cli("--help").status, 0);
}

TEST(Cli, SyntaxErrorsReportPosition) {
  testing::TempDir dir;
  const auto bad = write_policy(dir, "bad.pilot", "Parket may collect data");
  const auto r = run_cli("parse " + bad, true);
  EXPECT_EQ(r.status, 1);
  EXPECT_EQ(r.out, "error: 2:1: expected 'of', found end of input\n");
  const auto j = run_cli("--format json parse " + bad, true);
  EXPECT_EQ(j.status, 1);
  const json e = json::parse(j.out)["error"];
  EXPECT_EQ(e["kind"], "syntax");
  EXPECT_EQ(e["span"]["line"], 2);
}

}  // namespace
}  // namespace pilot
