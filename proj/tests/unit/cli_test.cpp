#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "qprobe/qprobe.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"

using testing_support::read_all;
using testing_support::TempDir;

#ifndef QPROBE_FIXTURES
#define QPROBE_FIXTURES "tests/fixtures"
#endif
#ifndef QPROBE_CLI
#define QPROBE_CLI "qprobe"
#endif

namespace {

const std::filesystem::path kFixtures(QPROBE_FIXTURES);

struct Run {
  int exit_code = -1;
  std::string output;  // stdout and stderr together
};

Run run(const std::string& args) {
  const std::string command = std::string("\"") + QPROBE_CLI + "\" " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string quoted(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

std::string fixture(const std::string& name) { return quoted(kFixtures / name); }

nlohmann::json read_json(const std::filesystem::path& p) { return nlohmann::json::parse(read_all(p)); }

/// A small labeled corpus as a raw-text record file.
std::filesystem::path small_corpus(const TempDir& dir) {
  auto model = synthetic::TopicModel::make(3, 20, 20);
  auto records = synthetic::topical_records(model, {0.5, 0.3, 0.2}, 300, 9, "doc");
  const auto path = dir / "corpus.jsonl";
  synthetic::write_record_file(records, path);
  return path;
}

}  // namespace

TEST(Cli, PrepareIsDeterministic) {
  TempDir dir;
  const auto corpus = small_corpus(dir);
  const auto args = " --min-df 2 --drop-top 5 --seed 7";
  auto a = run("prepare " + quoted(corpus) + " -o " + quoted(dir / "a") + args);
  auto b = run("prepare " + quoted(corpus) + " -o " + quoted(dir / "b") + args);
  ASSERT_EQ(a.exit_code, 0) << a.output;
  ASSERT_EQ(b.exit_code, 0) << b.output;
  EXPECT_EQ(read_all(dir / "a" / "train.jsonl"), read_all(dir / "b" / "train.jsonl"));
  EXPECT_EQ(read_all(dir / "a" / "test.jsonl"), read_all(dir / "b" / "test.jsonl"));
  auto c = run("prepare " + quoted(corpus) + " -o " + quoted(dir / "c") + " --min-df 2 --drop-top 5 --seed 8");
  ASSERT_EQ(c.exit_code, 0) << c.output;
  EXPECT_NE(read_all(dir / "a" / "train.jsonl"), read_all(dir / "c" / "train.jsonl"));
}

TEST(Cli, MissingCorpusNamesThePath) {
  TempDir dir;
  const auto missing = dir / "no-such-corpus";
  auto r = run("prepare " + quoted(missing) + " -o " + quoted(dir / "out"));
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_NE(r.output.find(missing.string()), std::string::npos) << r.output;
}

TEST(Cli, ConfigErrorsExitWithTwo) {
  EXPECT_EQ(run("").exit_code, 2);
  EXPECT_EQ(run("probe --bogus").exit_code, 2);
  auto r = run("probe --rules " + fixture("example2/rules.txt") + " " + fixture("example2/database.jsonl") +
               " --tau-s 2 --table none");
  EXPECT_EQ(r.exit_code, 2) << r.output;
  EXPECT_NE(r.output.find("tau_s"), std::string::npos);
}

TEST(Cli, TrainIndexProbeReport) {
  TempDir dir;
  const auto corpus = small_corpus(dir);
  ASSERT_EQ(run("prepare " + quoted(corpus) + " -o " + quoted(dir.path()) + " --min-df 2 --drop-top 5").exit_code, 0);
  auto t = run("train " + quoted(dir / "train.jsonl") + " --test " + quoted(dir / "test.jsonl") + " -o " +
               quoted(dir / "rules.txt") + " --stats " + quoted(dir / "stats.json") + " --sweep 1 5 20 60");
  ASSERT_EQ(t.exit_code, 0) << t.output;
  auto stats = read_json(dir / "stats.json");
  ASSERT_EQ(stats["sweep"].size(), 4u);
  for (std::size_t i = 1; i < 4; ++i) {
    EXPECT_LE(stats["sweep"][i]["rule_count"].get<std::size_t>(), stats["sweep"][i - 1]["rule_count"].get<std::size_t>());
  }
  EXPECT_TRUE(stats.contains("heldout"));

  auto idx = run("index " + quoted(dir / "test.jsonl") + " -o " + quoted(dir / "db.jsonl"));
  ASSERT_EQ(idx.exit_code, 0) << idx.output;
  auto p = run("probe --rules " + quoted(dir / "rules.txt") + " " + quoted(dir / "db.jsonl") + " -o " +
               quoted(dir / "report.json") + " --audit " + quoted(dir / "audit.jsonl") + " --id heldout");
  ASSERT_EQ(p.exit_code, 0) << p.output;
  auto report = read_json(dir / "report.json");
  EXPECT_EQ(report["database_id"], "heldout");
  std::size_t audit_lines = 0;
  std::ifstream audit(dir / "audit.jsonl");
  for (std::string line; std::getline(audit, line);) ++audit_lines;
  EXPECT_EQ(audit_lines, report["queries_issued"].get<std::size_t>());
  auto rendered = run("report " + quoted(dir / "report.json") + " --format json");
  ASSERT_EQ(rendered.exit_code, 0);
  EXPECT_EQ(nlohmann::json::parse(rendered.output)[0], report);
}

TEST(Cli, ExampleTwoFixtureReport) {
  TempDir dir;
  auto r = run("probe --rules " + fixture("example2/rules.txt") + " " + fixture("example2/database.jsonl") +
               " --id example2 -o " + quoted(dir / "full.json"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(r.output, read_all(kFixtures / "golden" / "example2_raw_table.txt"));
  EXPECT_NE(r.output.find("380 (0.99)"), std::string::npos);
  auto full = read_json(dir / "full.json");
  EXPECT_EQ(full["raw"], nlohmann::json({380.0, 0.0, 2.0}));

  auto restricted = run("probe --rules " + fixture("example2/rules.txt") + " " + fixture("example2/database.jsonl") +
                        " -o " + quoted(dir / "restricted.json") + " --no-negation --max-query-terms 5 --table none");
  ASSERT_EQ(restricted.exit_code, 0) << restricted.output;
  EXPECT_EQ(read_json(dir / "restricted.json")["raw"], full["raw"]);
}

TEST(Cli, CoraFixtureAssignsOneCategory) {
  TempDir dir;
  auto r = run("probe --rules " + fixture("cora/rules.txt") + " " + fixture("cora/database.jsonl") + " -o " +
               quoted(dir / "cora.json") + " --tau-s 0.6 --table none");
  ASSERT_EQ(r.exit_code, 0) << r.output;
  auto report = read_json(dir / "cora.json");
  EXPECT_EQ(report["decisions"]["specificity_oriented"]["raw"], nlohmann::json({"Computers"}));
  EXPECT_TRUE(report["chi_squared"]["significance"]["0.999"].get<bool>());
}

TEST(Cli, BatchReportHasOneRowPerDatabase) {
  TempDir dir;
  const auto db = fixture("example2/database.jsonl");
  auto r = run("probe --rules " + fixture("example2/rules.txt") + " " + db + " " + db + " " + db + " -o " +
               quoted(dir / "batch.json") + " --table none");
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(read_json(dir / "batch.json").size(), 3u);
  auto table = run("report " + quoted(dir / "batch.json"));
  ASSERT_EQ(table.exit_code, 0);
  EXPECT_EQ(std::count(table.output.begin(), table.output.end(), '\n'), 4);
}

TEST(Cli, UnresolvedProbeExitsWithFour) {
  TempDir dir;
  auto trial = synthetic::dense_trial(3, 400, 20, 30);
  qprobe::save_database_snapshot(trial.records, dir / "dense.jsonl");
  dir.write("dense_rules.txt", qprobe::serialize_rules(trial.rules));
  auto r = run("probe --rules " + quoted(dir / "dense_rules.txt") + " " + quoted(dir / "dense.jsonl") +
               " --no-negation --table none -o " + quoted(dir / "dense_report.json"));
  EXPECT_EQ(r.exit_code, 4) << r.output;
  EXPECT_NE(r.output.find("unresolved"), std::string::npos);
  EXPECT_FALSE(read_json(dir / "dense_report.json")["flags"]["unresolved_rules"].empty());
}

TEST(Cli, ConfigFileSuppliesDefaults) {
  TempDir dir;
  const auto config = dir.write("probe.ini", "[probe]\ntau-s=0.999\n");
  auto r = run("--config " + quoted(config) + " probe --rules " + fixture("example2/rules.txt") + " " +
               fixture("example2/database.jsonl") + " -o " + quoted(dir / "a.json") + " --table none");
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_DOUBLE_EQ(read_json(dir / "a.json")["thresholds"]["tau_s"].get<double>(), 0.999);
  auto flag = run("--config " + quoted(config) + " probe --rules " + fixture("example2/rules.txt") + " " +
                  fixture("example2/database.jsonl") + " -o " + quoted(dir / "b.json") + " --table none --tau-s 0.5");
  ASSERT_EQ(flag.exit_code, 0) << flag.output;
  EXPECT_DOUBLE_EQ(read_json(dir / "b.json")["thresholds"]["tau_s"].get<double>(), 0.5);
}
