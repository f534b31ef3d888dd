#include <gtest/gtest.h>

#include <filesystem>

#include "qprobe/report.hpp"
#include "support/temp_dir.hpp"

using namespace qprobe;
using testing_support::TempDir;

#ifndef QPROBE_FIXTURES
#define QPROBE_FIXTURES "tests/fixtures"
#endif

namespace {

const std::filesystem::path kFixtures(QPROBE_FIXTURES);

ClassificationReport example_two_report() {
  auto rules = load_rules(kFixtures / "example2" / "rules.txt");
  IndexedDatabase db(load_database_snapshot(kFixtures / "example2" / "database.jsonl"));
  return build_report("example2", rules, probe_database(rules, db), {});
}

}  // namespace

TEST(RenderTable, MatchesGoldenFiles) {
  auto report = example_two_report();
  EXPECT_EQ(render_table({report}), testing_support::read_all(kFixtures / "golden" / "example2_raw_table.txt"));
  EXPECT_EQ(render_table({report}, TableVector::adjusted),
            testing_support::read_all(kFixtures / "golden" / "example2_adjusted_table.txt"));
}

TEST(RenderTable, OneRowPerDatabase) {
  auto report = example_two_report();
  std::vector<ClassificationReport> batch;
  for (int i = 0; i < 7; ++i) {
    auto r = report;
    r.database_id = "db" + std::to_string(i);
    batch.push_back(r);
  }
  auto table = render_table(batch);
  EXPECT_EQ(static_cast<std::size_t>(std::count(table.begin(), table.end(), '\n')), batch.size() + 1);
  EXPECT_EQ(render_table({}), "");
}

TEST(RenderTable, MarksUnresolvedAndRejectsMixedCategorySets) {
  auto report = example_two_report();
  report.unresolved_rules = {3};
  EXPECT_NE(render_table({report}).find("example2 (!)"), std::string::npos);
  auto other = report;
  other.raw = CoverageVector(CategorySet({"X", "Y"}), {1, 2});
  EXPECT_THROW(render_table({report, other}), DataError);
}

TEST(ReportJson, RoundTrips) {
  auto report = example_two_report();
  EXPECT_EQ(report_from_json(report_to_json(report)), report);
  report.exact_size = 500;
  report.chi_squared.reset();
  report.specificity_adjusted.reset();
  report.recall_flagged = {1};
  report.unresolved_rules = {2, 3};
  EXPECT_EQ(report_from_json(report_to_json(report)), report);
}

TEST(ReportJson, FilesHoldOneOrMany) {
  TempDir dir;
  auto report = example_two_report();
  save_report(report, dir / "one.json");
  auto one = load_reports(dir / "one.json");
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], report);
  auto arr = nlohmann::json::array({report_to_json(report), report_to_json(report)});
  auto many = load_reports(dir.write("many.json", arr.dump()));
  EXPECT_EQ(many.size(), 2u);
  EXPECT_THROW(load_reports(dir.write("bad.json", "{\"database_id\": 1}")), DataError);
  EXPECT_THROW(load_reports(dir.write("junk.json", "not json")), DataError);
  EXPECT_THROW(load_reports(dir / "missing.json"), DataError);
}
