#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qprobe/categories.hpp"
#include "qprobe/errors.hpp"
#include "qprobe/random.hpp"
#include "qprobe/text.hpp"

namespace qprobe {

struct Document {
  std::string id;
  std::vector<std::string> tokens;  // multiset, in text order
  std::optional<CategoryIndex> label;

  friend bool operator==(const Document&, const Document&) = default;
};

/// Sorted distinct terms of a document, for membership tests.
class TermSet {
 public:
  TermSet() = default;
  explicit TermSet(const std::vector<std::string>& tokens) : terms_(tokens) {
    std::sort(terms_.begin(), terms_.end());
    terms_.erase(std::unique(terms_.begin(), terms_.end()), terms_.end());
  }

  bool contains(std::string_view term) const {
    return std::binary_search(terms_.begin(), terms_.end(), term, std::less<>{});
  }
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  std::size_t size() const noexcept { return terms_.size(); }

 private:
  std::vector<std::string> terms_;
};

namespace detail {

inline void validate_token(const std::string& token, const std::string& doc_id) {
  if (token.empty()) throw DataError("document '" + doc_id + "' contains an empty token");
  for (char c : token) {
    if (is_punct(c) || is_space(c)) {
      throw DataError("document '" + doc_id + "' token '" + token + "' contains punctuation or whitespace");
    }
  }
}

}  // namespace detail

/// Labeled documents over a fixed category set plus the active vocabulary
/// (the terms the rule learner may use). Immutable once built.
class Corpus {
 public:
  Corpus() = default;

  // Active vocabulary is every term that occurs in some document.
  Corpus(CategorySet categories, std::vector<Document> documents)
      : categories_(std::move(categories)), documents_(std::move(documents)) {
    validate();
    std::unordered_set<std::string> all;
    for (const auto& doc : documents_) all.insert(doc.tokens.begin(), doc.tokens.end());
    vocabulary_.assign(all.begin(), all.end());
    std::sort(vocabulary_.begin(), vocabulary_.end());
  }

  // Explicit vocabulary, e.g. inherited from a parent corpus after a split.
  Corpus(CategorySet categories, std::vector<Document> documents, std::vector<std::string> vocabulary)
      : categories_(std::move(categories)), documents_(std::move(documents)), vocabulary_(std::move(vocabulary)) {
    validate();
    std::sort(vocabulary_.begin(), vocabulary_.end());
    vocabulary_.erase(std::unique(vocabulary_.begin(), vocabulary_.end()), vocabulary_.end());
  }

  const CategorySet& categories() const noexcept { return categories_; }
  const std::vector<Document>& documents() const noexcept { return documents_; }
  const std::vector<std::string>& vocabulary() const noexcept { return vocabulary_; }
  std::size_t size() const noexcept { return documents_.size(); }
  bool empty() const noexcept { return documents_.empty(); }

  bool in_vocabulary(std::string_view term) const {
    return std::binary_search(vocabulary_.begin(), vocabulary_.end(), term, std::less<>{});
  }

  // Restricts the active vocabulary. The new set must be a subset of the current one.
  Corpus with_vocabulary(std::vector<std::string> vocabulary) const {
    for (const auto& term : vocabulary) {
      if (!in_vocabulary(term)) throw DataError("term '" + term + "' is not in the active vocabulary");
    }
    Corpus out = *this;
    std::sort(vocabulary.begin(), vocabulary.end());
    vocabulary.erase(std::unique(vocabulary.begin(), vocabulary.end()), vocabulary.end());
    out.vocabulary_ = std::move(vocabulary);
    return out;
  }

  // Number of documents containing each active vocabulary term.
  std::unordered_map<std::string, std::size_t> document_frequency() const {
    std::unordered_map<std::string, std::size_t> df;
    for (const auto& term : vocabulary_) df.emplace(term, 0);
    for (const auto& doc : documents_) {
      const TermSet terms(doc.tokens);
      for (const auto& term : terms.terms()) {
        auto it = df.find(term);
        if (it != df.end()) ++it->second;
      }
    }
    return df;
  }

  std::vector<std::size_t> label_histogram() const {
    std::vector<std::size_t> counts(categories_.size(), 0);
    for (const auto& doc : documents_) {
      if (doc.label) ++counts[*doc.label];
    }
    return counts;
  }

 private:
  void validate() const {
    std::unordered_set<std::string_view> ids;
    for (const auto& doc : documents_) {
      if (!ids.insert(doc.id).second) throw DataError("duplicate document id '" + doc.id + "'");
      if (doc.label && *doc.label >= categories_.size()) {
        throw DataError("document '" + doc.id + "' has label index out of range");
      }
      for (const auto& token : doc.tokens) detail::validate_token(token, doc.id);
    }
  }

  CategorySet categories_;
  std::vector<Document> documents_;
  std::vector<std::string> vocabulary_;
};

// ---------------------------------------------------------------------------
// Ingest

/// Maps raw source labels (e.g. newsgroup names) onto coarser categories.
/// Patterns are exact names or prefixes ending in '*'; first match wins.
struct CategoryGrouping {
  std::vector<std::pair<std::string, std::string>> rules;

  std::optional<std::string> map(std::string_view label) const {
    for (const auto& [pattern, group] : rules) {
      if (!pattern.empty() && pattern.back() == '*') {
        std::string_view prefix(pattern.data(), pattern.size() - 1);
        if (label.substr(0, prefix.size()) == prefix) return group;
      } else if (label == pattern) {
        return group;
      }
    }
    return std::nullopt;
  }

  bool empty() const noexcept { return rules.empty(); }
};

/// The five coarse groups used for the 20 Newsgroups collection.
inline CategoryGrouping newsgroups_grouping() {
  return {{{"comp.*", "Computers"},
           {"sci.*", "Science"},
           {"rec.*", "Hobbies"},
           {"alt.atheism", "Society"},
           {"talk.*", "Society"},
           {"soc.*", "Society"},
           {"misc.*", "Misc"}}};
}

struct IngestOptions {
  PreprocessOptions preprocess;
  CategoryGrouping grouping;
  // When set, labels must belong to it; otherwise the set is inferred (sorted).
  std::optional<CategorySet> categories;
};

namespace detail {

struct RawDocument {
  std::string id;
  std::string text;
  std::string label;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::vector<RawDocument> read_directory_tree(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::vector<fs::path> category_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && entry.path().filename().string().front() != '.') {
      category_dirs.push_back(entry.path());
    }
  }
  std::sort(category_dirs.begin(), category_dirs.end());

  std::vector<RawDocument> raw;
  for (const auto& dir : category_dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().filename().string().front() != '.') files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    const auto label = dir.filename().string();
    for (const auto& file : files) {
      raw.push_back({label + "/" + file.filename().string(), read_file(file), label});
    }
  }
  return raw;
}

inline std::vector<RawDocument> read_record_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::vector<RawDocument> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_line(line)) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!record.is_object() || !record.contains("id") || !record["id"].is_string() || !record.contains("text") ||
        !record["text"].is_string()) {
      throw DataError(where + ": record needs string fields 'id' and 'text'");
    }
    if (!record.contains("label") || !record["label"].is_string() || record["label"].get<std::string>().empty()) {
      throw DataError(where + ": record '" + record["id"].get<std::string>() + "' has no usable 'label' field");
    }
    raw.push_back({record["id"].get<std::string>(), record["text"].get<std::string>(),
                   record["label"].get<std::string>()});
  }
  return raw;
}

}  // namespace detail

/// Builds a corpus from either a directory tree (<root>/<category>/<doc>) or a
/// line-delimited JSON record file with fields id, text and label.
inline Corpus ingest(const std::filesystem::path& source, const IngestOptions& options = {}) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::exists(source, ec)) throw DataError("corpus source '" + source.string() + "' does not exist");

  auto raw = fs::is_directory(source) ? detail::read_directory_tree(source) : detail::read_record_file(source);
  if (raw.empty()) throw DataError("corpus source '" + source.string() + "' contains no documents");

  for (auto& doc : raw) {
    if (options.grouping.empty()) continue;
    auto group = options.grouping.map(doc.label);
    if (!group) throw DataError("document '" + doc.id + "' has label '" + doc.label + "' matched by no group");
    doc.label = *group;
  }

  CategorySet categories;
  if (options.categories) {
    categories = *options.categories;
  } else {
    std::vector<std::string> labels;
    for (const auto& doc : raw) labels.push_back(doc.label);
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    categories = CategorySet(std::move(labels));
  }

  std::vector<Document> docs;
  docs.reserve(raw.size());
  for (auto& r : raw) {
    auto label = categories.find(r.label);
    if (!label) throw DataError("document '" + r.id + "' has unknown label '" + r.label + "'");
    docs.push_back({std::move(r.id), preprocess(r.text, options.preprocess), *label});
  }
  return Corpus(std::move(categories), std::move(docs));
}

// ---------------------------------------------------------------------------
// Snapshots: a JSON-lines file whose first line carries the category set and
// vocabulary, followed by one {"id","label","tokens"} record per document.

inline void write_corpus_snapshot(const Corpus& corpus, std::ostream& out) {
  nlohmann::json header = {{"categories", corpus.categories().names()}, {"vocabulary", corpus.vocabulary()}};
  out << header.dump() << '\n';
  for (const auto& doc : corpus.documents()) {
    nlohmann::json record = {{"id", doc.id}, {"tokens", doc.tokens}};
    record["label"] = doc.label ? nlohmann::json(corpus.categories().name(*doc.label)) : nlohmann::json(nullptr);
    out << record.dump() << '\n';
  }
}

inline Corpus read_corpus_snapshot(std::istream& in, const std::string& name = "<snapshot>") {
  std::string line;
  std::size_t line_no = 0;
  std::optional<CategorySet> categories;
  std::vector<std::string> vocabulary;
  std::vector<Document> docs;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (detail::is_blank_line(line)) continue;
      auto record = nlohmann::json::parse(line);
      if (!categories) {
        categories = CategorySet(record.at("categories").get<std::vector<std::string>>());
        vocabulary = record.at("vocabulary").get<std::vector<std::string>>();
        continue;
      }
      Document doc{record.at("id").get<std::string>(), record.at("tokens").get<std::vector<std::string>>(), {}};
      if (record.contains("label") && !record["label"].is_null()) {
        doc.label = categories->index_of(record["label"].get<std::string>());
      }
      docs.push_back(std::move(doc));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(name + ":" + std::to_string(line_no) + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(name + ":" + std::to_string(line_no) + ": " + e.what());
  }
  if (!categories) throw DataError(name + ": empty corpus snapshot");
  return Corpus(std::move(*categories), std::move(docs), std::move(vocabulary));
}

inline void save_corpus_snapshot(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_corpus_snapshot(corpus, out);
}

inline Corpus load_corpus_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  return read_corpus_snapshot(in, path.string());
}

// ---------------------------------------------------------------------------
// Vocabulary reduction

/// Drops terms with document frequency below `min_document_frequency`, then the
/// `top_frequent_to_drop` most frequent remaining terms (ties lexicographic).
/// Returns the surviving vocabulary, sorted.
inline std::vector<std::string> prune_vocabulary(const Corpus& corpus, std::size_t min_document_frequency,
                                                 std::size_t top_frequent_to_drop) {
  if (min_document_frequency < 1) throw ConfigError("min_document_frequency must be at least 1");
  const auto df = corpus.document_frequency();

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& term : corpus.vocabulary()) {
    auto n = df.at(term);
    if (n >= min_document_frequency) kept.emplace_back(term, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  const auto drop = std::min(top_frequent_to_drop, kept.size());

  std::vector<std::string> vocabulary;
  for (std::size_t i = drop; i < kept.size(); ++i) vocabulary.push_back(kept[i].first);
  if (vocabulary.empty()) throw DataError("vocabulary pruning removed every term");
  std::sort(vocabulary.begin(), vocabulary.end());
  return vocabulary;
}

struct ScoredTerm {
  std::string term;
  double score = 0.0;
};

/// Appearance-weighted relative entropy of the class distribution given that
/// a term appears: P(t) * KL(P(c | t) || P(c)).
///
/// P(c | t) is smoothed with k pseudo-counts spread by the class prior,
/// (n_ct + k P(c)) / (df_t + k). With balanced classes that is add-one
/// smoothing; in general it keeps class-independent terms at exactly zero.
inline std::vector<ScoredTerm> feature_scores(const Corpus& corpus) {
  const auto k = corpus.categories().size();
  const auto n_docs = static_cast<double>(corpus.size());
  std::vector<ScoredTerm> out;
  if (corpus.empty()) {
    for (const auto& term : corpus.vocabulary()) out.push_back({term, 0.0});
    return out;
  }

  std::vector<double> prior(k, 0.0);
  std::size_t labeled = 0;
  for (const auto& doc : corpus.documents()) {
    if (doc.label) {
      prior[*doc.label] += 1.0;
      ++labeled;
    }
  }
  if (labeled == 0) throw DataError("feature selection needs labeled documents");
  for (auto& p : prior) p /= static_cast<double>(labeled);

  std::unordered_map<std::string, std::vector<double>> per_class;
  for (const auto& term : corpus.vocabulary()) per_class.emplace(term, std::vector<double>(k, 0.0));
  for (const auto& doc : corpus.documents()) {
    if (!doc.label) continue;
    const TermSet terms(doc.tokens);
    for (const auto& term : terms.terms()) {
      auto it = per_class.find(term);
      if (it != per_class.end()) it->second[*doc.label] += 1.0;
    }
  }

  const auto kd = static_cast<double>(k);
  for (const auto& term : corpus.vocabulary()) {
    const auto& counts = per_class.at(term);
    double df = 0.0;
    for (double c : counts) df += c;
    double kl = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (prior[c] == 0.0) continue;
      const double conditional = (counts[c] + kd * prior[c]) / (df + kd);
      kl += conditional * std::log(conditional / prior[c]);
    }
    out.push_back({term, (df / n_docs) * std::max(kl, 0.0)});
  }
  return out;
}

/// Keeps the `target_vocabulary_size` highest-scoring terms, best first.
inline std::vector<ScoredTerm> select_features(const Corpus& corpus, std::size_t target_vocabulary_size) {
  if (target_vocabulary_size > corpus.vocabulary().size()) {
    throw ConfigError("feature target " + std::to_string(target_vocabulary_size) + " exceeds vocabulary size " +
                      std::to_string(corpus.vocabulary().size()));
  }
  auto scored = feature_scores(corpus);
  std::sort(scored.begin(), scored.end(), [](const ScoredTerm& a, const ScoredTerm& b) {
    return a.score != b.score ? a.score > b.score : a.term < b.term;
  });
  scored.resize(target_vocabulary_size);
  return scored;
}

inline std::vector<std::string> terms_of(const std::vector<ScoredTerm>& scored) {
  std::vector<std::string> out;
  out.reserve(scored.size());
  for (const auto& s : scored) out.push_back(s.term);
  return out;
}

/// Seeded random partition into train and test corpora. Both halves keep the
/// parent's category set and vocabulary; documents keep their relative order.
inline std::pair<Corpus, Corpus> split(const Corpus& corpus, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must be in (0, 1)");
  const auto n = corpus.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train == n) {
    throw DataError("split of " + std::to_string(n) + " documents leaves one side empty");
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<bool> in_train(n, false);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = true;

  std::vector<Document> train, test;
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? train : test).push_back(corpus.documents()[i]);
  return {Corpus(corpus.categories(), std::move(train), corpus.vocabulary()),
          Corpus(corpus.categories(), std::move(test), corpus.vocabulary())};
}

}  // namespace qprobe
