// qprobe: train query-probing rules on a labeled corpus and use them to
// classify searchable text databases through count-only queries.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qprobe/qprobe.hpp"

namespace {

enum ExitCode : int { kOk = 0, kUnexpected = 1, kConfig = 2, kData = 3, kProbe = 4 };

void add_preprocess_flags(CLI::App* cmd, qprobe::PreprocessOptions& p) {
  cmd->add_flag("!--keep-headers", p.strip_headers, "keep message headers");
  cmd->add_flag("!--keep-emails", p.remove_emails, "keep e-mail addresses");
  cmd->add_flag("!--keep-punctuation", p.remove_punctuation, "keep punctuation");
  cmd->add_flag("!--keep-case", p.lowercase, "do not lowercase");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Classify text databases by probing them with rule-derived queries"};
  app.set_config("--config", "", "TOML/INI file with option defaults; command-line flags take precedence");
  app.require_subcommand(1);

  qprobe::RunConfig cfg;
  std::size_t feature_count = 0;
  std::size_t min_coverage = 0;
  std::size_t max_query_terms = 0;
  bool no_negation = false;
  std::vector<std::filesystem::path> report_inputs;
  std::string report_format = "table";
  std::string report_vector = "raw";
  std::string probe_vector = "raw";

  auto* prepare = app.add_subcommand("prepare", "ingest a labeled corpus, reduce its vocabulary and split it");
  prepare->add_option("corpus", cfg.corpus, "directory tree or JSONL record file")->required();
  prepare->add_option("-o,--out-dir", cfg.out_dir, "where train.jsonl and test.jsonl go")->capture_default_str();
  prepare->add_flag("--newsgroups", cfg.newsgroup_grouping, "group newsgroup names into five top-level categories");
  prepare->add_option("--min-df", cfg.min_document_frequency, "drop terms in fewer documents")->capture_default_str();
  prepare->add_option("--drop-top", cfg.top_frequent_to_drop, "drop this many most frequent terms")->capture_default_str();
  prepare->add_option("--features", feature_count, "keep this many terms by information gain (0: keep all)");
  prepare->add_option("--train-fraction", cfg.train_fraction)->capture_default_str();
  prepare->add_option("--seed", cfg.seed)->capture_default_str();
  add_preprocess_flags(prepare, cfg.preprocess);

  auto* train = app.add_subcommand("train", "learn an ordered rule set from a training snapshot");
  train->add_option("train", cfg.train_snapshot, "training corpus snapshot")->required()->check(CLI::ExistingFile);
  train->add_option("-o,--rules", cfg.rules, "output rule file")->required();
  train->add_option("--stats", cfg.stats, "output statistics JSON");
  train->add_option("--test", cfg.test_snapshot, "held-out snapshot for held-out accuracy")->check(CLI::ExistingFile);
  train->add_option("--min-coverage", min_coverage, "minimum documents a rule must cover (0: 0.5% of training set)");
  train->add_option("--max-rule-length", cfg.train.max_rule_length)->capture_default_str();
  train->add_flag("--allow-negation", cfg.train.allow_negation, "let rules contain NOT literals");
  train->add_flag("!--unordered", cfg.train.ordered, "majority vote instead of first match");
  train->add_option("--sweep", cfg.coverage_sweep, "also retrain at these minimum coverages and record rule counts");

  auto* index = app.add_subcommand("index", "build a database snapshot from documents");
  index->add_option("source", cfg.source, "directory tree, JSONL record file or corpus snapshot")->required();
  index->add_option("-o,--out", cfg.database, "output database snapshot")->required();
  add_preprocess_flags(index, cfg.preprocess);

  auto* probe = app.add_subcommand("probe", "classify databases by probing them with a rule file");
  probe->add_option("--rules", cfg.rules, "rule file")->required()->check(CLI::ExistingFile);
  probe->add_option("databases", cfg.databases, "database snapshots")->required();
  probe->add_option("-o,--report", cfg.report, "output report JSON");
  probe->add_option("--audit", cfg.audit, "output JSONL log of every query issued");
  probe->add_option("--id", cfg.database_id, "database id when probing a single snapshot");
  probe->add_option("--tau-s", cfg.thresholds.tau_s, "specificity threshold")->capture_default_str();
  probe->add_option("--tau-c", cfg.thresholds.tau_c, "coverage threshold")->capture_default_str();
  probe->add_flag("--no-negation", no_negation, "simulate an interface without NOT");
  probe->add_option("--max-query-terms", max_query_terms, "simulate an interface query length limit (0: none)");
  probe->add_option("--budget", cfg.budget, "queries one probe may issue")->capture_default_str();
  probe->add_option("-j,--parallelism", cfg.parallelism, "concurrent queries within a probe")->capture_default_str();
  probe->add_flag("--exact-size", cfg.exact_size, "divide by the true database size for specificity");
  probe->add_option("--table", probe_vector, "print a table of the raw or adjusted vectors")
      ->check(CLI::IsMember({"raw", "adjusted", "none"}))
      ->capture_default_str();

  auto* report = app.add_subcommand("report", "render report files");
  report->add_option("reports", report_inputs, "report JSON files")->required()->check(CLI::ExistingFile);
  report->add_option("--format", report_format)->check(CLI::IsMember({"table", "json"}))->capture_default_str();
  report->add_option("--vector", report_vector)->check(CLI::IsMember({"raw", "adjusted"}))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  if (feature_count) cfg.feature_count = feature_count;
  if (min_coverage) cfg.train.min_rule_coverage = min_coverage;
  if (max_query_terms) cfg.capabilities.max_query_terms = max_query_terms;
  cfg.capabilities.supports_negation = !no_negation;

  try {
    if (*prepare) {
      auto r = qprobe::cmd_prepare(cfg);
      std::printf("vocabulary: %zu ingested, %zu after pruning, %zu kept\n", r.ingested_vocabulary,
                  r.pruned_vocabulary, r.train.vocabulary().size());
      std::printf("train: %zu documents -> %s\ntest: %zu documents -> %s\n", r.train.size(),
                  r.train_path.string().c_str(), r.test.size(), r.test_path.string().c_str());
    } else if (*train) {
      auto r = qprobe::cmd_train(cfg);
      std::printf("%zu rules (min coverage %zu) -> %s\n", r.trained.rule_set.size(), r.trained.min_rule_coverage,
                  cfg.rules.string().c_str());
      for (const auto& w : r.trained.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      for (const auto& p : r.sweep) {
        std::printf("sweep: min coverage %zu -> %zu rules, %zu terms\n", p.min_rule_coverage, p.rule_count,
                    p.term_count);
      }
    } else if (*index) {
      auto records = qprobe::cmd_index(cfg);
      std::printf("%zu documents -> %s\n", records.size(), cfg.database.string().c_str());
    } else if (*probe) {
      auto r = qprobe::cmd_probe(cfg);
      if (probe_vector != "none") {
        std::cout << qprobe::render_table(r.reports, probe_vector == "raw" ? qprobe::TableVector::raw
                                                                            : qprobe::TableVector::adjusted);
      }
      if (r.any_unresolved()) {
        for (const auto& rep : r.reports) {
          for (auto i : rep.unresolved_rules) {
            std::fprintf(stderr, "%s: probe for rule %zu unresolved; reported a lower bound\n",
                         rep.database_id.c_str(), i);
          }
        }
        return kProbe;
      }
    } else if (*report) {
      std::cout << qprobe::cmd_report(
          report_inputs, report_format == "table" ? qprobe::ReportFormat::table : qprobe::ReportFormat::json,
          report_vector == "raw" ? qprobe::TableVector::raw : qprobe::TableVector::adjusted);
    }
  } catch (const qprobe::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const qprobe::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const qprobe::ProbeError& e) {
    std::fprintf(stderr, "probe error: %s\n", e.what());
    return kProbe;
  } catch (const qprobe::BudgetExceeded& e) {
    std::fprintf(stderr, "probe error: %s\n", e.what());
    return kProbe;
  } catch (const qprobe::CapabilityError& e) {
    std::fprintf(stderr, "probe error: %s\n", e.what());
    return kProbe;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUnexpected;
  }
  return kOk;
}
