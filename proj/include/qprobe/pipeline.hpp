#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qprobe/corpus.hpp"
#include "qprobe/estimator.hpp"
#include "qprobe/prober.hpp"
#include "qprobe/report.hpp"
#include "qprobe/rules.hpp"
#include "qprobe/searchdb.hpp"

namespace qprobe {

/// Everything a command may need. Each command reads only its own fields.
struct RunConfig {
  // prepare
  std::filesystem::path corpus;
  std::filesystem::path out_dir = ".";
  bool newsgroup_grouping = false;
  PreprocessOptions preprocess;
  std::size_t min_document_frequency = 3;
  std::size_t top_frequent_to_drop = 100;
  std::optional<std::size_t> feature_count;
  double train_fraction = 0.5;
  std::uint64_t seed = 42;

  // train
  std::filesystem::path train_snapshot;
  std::filesystem::path test_snapshot;  // optional, for held-out statistics
  std::filesystem::path rules;
  std::filesystem::path stats;
  TrainOptions train;
  std::vector<std::size_t> coverage_sweep;

  // index
  std::filesystem::path source;
  std::filesystem::path database;

  // probe
  std::vector<std::filesystem::path> databases;
  std::filesystem::path report;
  std::filesystem::path audit;
  std::string database_id;
  Thresholds thresholds;
  InterfaceCapabilities capabilities;
  std::size_t budget = 64;
  std::size_t parallelism = 1;
  bool exact_size = false;

  void validate() const {
    if (min_document_frequency < 1) throw ConfigError("min-df must be at least 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train-fraction must be in (0, 1)");
    if (train.max_rule_length < 1) throw ConfigError("max-rule-length must be at least 1");
    if (train.min_rule_coverage && *train.min_rule_coverage < 1) throw ConfigError("min-coverage must be at least 1");
    if (capabilities.max_query_terms && *capabilities.max_query_terms < 1) {
      throw ConfigError("max-query-terms must be at least 1");
    }
    if (budget < 1) throw ConfigError("budget must be at least 1");
    if (parallelism < 1) throw ConfigError("parallelism must be at least 1");
    thresholds.validate();
  }
};

// ---------------------------------------------------------------------------

struct PrepareResult {
  Corpus train;
  Corpus test;
  std::size_t ingested_vocabulary = 0;
  std::size_t pruned_vocabulary = 0;
  std::filesystem::path train_path;
  std::filesystem::path test_path;
};

/// ingest -> prune -> feature selection -> split; writes train.jsonl and
/// test.jsonl snapshots into `out_dir`.
inline PrepareResult cmd_prepare(const RunConfig& config) {
  config.validate();
  IngestOptions ingest_options;
  ingest_options.preprocess = config.preprocess;
  if (config.newsgroup_grouping) ingest_options.grouping = newsgroups_grouping();

  PrepareResult out;
  auto corpus = ingest(config.corpus, ingest_options);
  out.ingested_vocabulary = corpus.vocabulary().size();
  corpus = corpus.with_vocabulary(prune_vocabulary(corpus, config.min_document_frequency, config.top_frequent_to_drop));
  out.pruned_vocabulary = corpus.vocabulary().size();
  if (config.feature_count) corpus = corpus.with_vocabulary(terms_of(select_features(corpus, *config.feature_count)));

  auto [train, test] = split(corpus, config.train_fraction, config.seed);
  std::filesystem::create_directories(config.out_dir);
  out.train_path = config.out_dir / "train.jsonl";
  out.test_path = config.out_dir / "test.jsonl";
  save_corpus_snapshot(train, out.train_path);
  save_corpus_snapshot(test, out.test_path);
  out.train = std::move(train);
  out.test = std::move(test);
  return out;
}

// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json stats_to_json(const RuleSet& rule_set, const TrainingStats& stats) {
  const auto& cats = rule_set.categories;
  nlohmann::json rules = nlohmann::json::array();
  for (std::size_t i = 0; i < rule_set.rules.size(); ++i) {
    const auto& c = stats.per_rule[i];
    const auto n = c.correct + c.incorrect;
    rules.push_back({{"index", i},
                     {"category", cats.name(rule_set.rules[i].category)},
                     {"correct", c.correct},
                     {"incorrect", c.incorrect},
                     {"accuracy", n ? nlohmann::json(static_cast<double>(c.correct) / static_cast<double>(n))
                                    : nlohmann::json(nullptr)}});
  }
  nlohmann::json categories = nlohmann::json::array();
  for (std::size_t c = 0; c < cats.size(); ++c) {
    auto recall = stats.recall(c);
    categories.push_back({{"category", cats.name(c)},
                          {"documents", stats.training_docs[c]},
                          {"recalled", stats.recalled_docs[c]},
                          {"unclassified", stats.unclassified[c]},
                          {"recall", recall ? nlohmann::json(*recall) : nlohmann::json(nullptr)},
                          {"confusion", stats.confusion[c]}});
  }
  return {{"rules", rules}, {"categories", categories}};
}

inline std::size_t distinct_terms(const RuleSet& rule_set) {
  std::set<std::string> terms;
  for (const auto& r : rule_set.rules) {
    terms.insert(r.positive_terms.begin(), r.positive_terms.end());
    terms.insert(r.negative_terms.begin(), r.negative_terms.end());
  }
  return terms.size();
}

}  // namespace detail

struct SweepPoint {
  std::size_t min_rule_coverage = 0;
  std::size_t rule_count = 0;      // retrained at this threshold
  std::size_t term_count = 0;
  std::size_t filtered_count = 0;  // base rules whose training coverage reaches the threshold
};

struct TrainCommandResult {
  TrainResult trained;
  std::optional<TrainingStats> heldout;
  std::vector<SweepPoint> sweep;
  nlohmann::json stats_document;
};

/// Trains on the train snapshot, writes the rule file and a JSON statistics
/// document (training stats, optional held-out stats, coverage sweep).
inline TrainCommandResult cmd_train(const RunConfig& config) {
  config.validate();
  const auto corpus = load_corpus_snapshot(config.train_snapshot);
  TrainCommandResult out;
  out.trained = train(corpus, config.train);

  const auto& rule_set = out.trained.rule_set;
  if (!config.rules.empty()) {
    std::ofstream f(config.rules, std::ios::binary);
    if (!f) throw DataError("cannot write '" + config.rules.string() + "'");
    f << serialize_rules(rule_set);
  }

  for (auto threshold : config.coverage_sweep) {
    auto options = config.train;
    options.min_rule_coverage = threshold;
    auto retrained = train(corpus, options);
    SweepPoint p{threshold, retrained.rule_set.size(), detail::distinct_terms(retrained.rule_set), 0};
    for (const auto& r : rule_set.rules) p.filtered_count += r.coverage() >= threshold;
    out.sweep.push_back(p);
  }

  auto& doc = out.stats_document;
  doc["min_rule_coverage"] = out.trained.min_rule_coverage;
  doc["rule_count"] = rule_set.size();
  doc["term_count"] = detail::distinct_terms(rule_set);
  doc["ordered"] = rule_set.ordered;
  doc["training"] = detail::stats_to_json(rule_set, out.trained.stats);
  doc["warnings"] = out.trained.warnings;
  if (!config.test_snapshot.empty()) {
    const auto test = load_corpus_snapshot(config.test_snapshot);
    out.heldout = evaluate(rule_set, test);
    doc["heldout"] = detail::stats_to_json(rule_set, *out.heldout);
  }
  doc["sweep"] = nlohmann::json::array();
  for (const auto& p : out.sweep) {
    doc["sweep"].push_back({{"min_rule_coverage", p.min_rule_coverage},
                            {"rule_count", p.rule_count},
                            {"term_count", p.term_count},
                            {"filtered_rule_count", p.filtered_count}});
  }
  if (!config.stats.empty()) {
    std::ofstream f(config.stats, std::ios::binary);
    if (!f) throw DataError("cannot write '" + config.stats.string() + "'");
    f << doc.dump(2) << '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace detail {

inline bool is_corpus_snapshot(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return false;
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line)) return false;
  auto j = nlohmann::json::parse(line, nullptr, false);
  return j.is_object() && j.contains("categories") && j.contains("vocabulary");
}

}  // namespace detail

/// Builds a database snapshot from a directory tree, a raw record file or a
/// corpus snapshot. Returns the records written.
inline std::vector<DatabaseRecord> cmd_index(const RunConfig& config) {
  config.validate();
  if (config.database.empty()) throw ConfigError("index needs an output database path");
  const auto records = detail::is_corpus_snapshot(config.source)
                           ? records_from_corpus(load_corpus_snapshot(config.source))
                           : records_from_source(config.source, config.preprocess);
  save_database_snapshot(records, config.database);
  return records;
}

// ---------------------------------------------------------------------------

struct ProbeCommandResult {
  std::vector<ClassificationReport> reports;
  std::vector<ProbeResult> probes;
  bool any_unresolved() const {
    for (const auto& p : probes) {
      if (p.any_unresolved()) return true;
    }
    return false;
  }
};

/// Probes each database snapshot with the rule file through an interface
/// restricted to the configured capabilities, then writes the audit log and
/// the report (one object for one database, an array otherwise).
inline ProbeCommandResult cmd_probe(const RunConfig& config) {
  config.validate();
  if (config.databases.empty()) throw ConfigError("probe needs at least one database");
  const auto rule_set = load_rules(config.rules);

  ProbeOptions options;
  options.budget = config.budget;
  options.parallelism = config.parallelism;

  std::ofstream audit;
  if (!config.audit.empty()) {
    audit.open(config.audit, std::ios::binary);
    if (!audit) throw DataError("cannot write '" + config.audit.string() + "'");
  }

  ProbeCommandResult out;
  for (const auto& path : config.databases) {
    IndexedDatabase db(load_database_snapshot(path));
    auto restricted = wrap_with_capabilities(db, config.capabilities);
    auto result = probe_database(rule_set, restricted, options);
    if (audit.is_open()) write_audit_log(result, rule_set.categories, audit);

    std::string id = config.databases.size() == 1 && !config.database_id.empty() ? config.database_id
                                                                                 : path.stem().string();
    std::optional<double> size;
    if (config.exact_size) size = static_cast<double>(db.document_count());
    out.reports.push_back(build_report(id, rule_set, result, config.thresholds, size));
    out.probes.push_back(std::move(result));
  }

  if (!config.report.empty()) {
    std::ofstream f(config.report, std::ios::binary);
    if (!f) throw DataError("cannot write '" + config.report.string() + "'");
    if (out.reports.size() == 1) {
      f << report_to_json(out.reports.front()).dump(2) << '\n';
    } else {
      auto arr = nlohmann::json::array();
      for (const auto& r : out.reports) arr.push_back(report_to_json(r));
      f << arr.dump(2) << '\n';
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

enum class ReportFormat { table, json };

inline std::string cmd_report(const std::vector<std::filesystem::path>& paths, ReportFormat format,
                              TableVector which = TableVector::raw) {
  std::vector<ClassificationReport> reports;
  for (const auto& p : paths) {
    for (auto& r : load_reports(p)) reports.push_back(std::move(r));
  }
  if (format == ReportFormat::table) return render_table(reports, which);
  auto arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(report_to_json(r));
  return arr.dump(2) + "\n";
}

}  // namespace qprobe
