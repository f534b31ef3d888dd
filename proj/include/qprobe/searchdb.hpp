#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qprobe/corpus.hpp"
#include "qprobe/errors.hpp"
#include "qprobe/text.hpp"

namespace qprobe {

/// Conjunction of required terms and negated terms. Term order is kept as
/// given (duplicates dropped) so rendered queries follow rule order.
class BooleanQuery {
 public:
  BooleanQuery() = default;
  BooleanQuery(std::vector<std::string> positive, std::vector<std::string> negative = {})
      : positive_(dedupe(std::move(positive))), negative_(dedupe(std::move(negative))) {
    if (positive_.empty()) throw std::invalid_argument("a query needs at least one positive term");
    for (const auto& t : negative_) {
      if (std::find(positive_.begin(), positive_.end(), t) != positive_.end()) {
        throw std::invalid_argument("term '" + t + "' is both required and negated");
      }
    }
    for (const auto& t : positive_) check_term(t);
    for (const auto& t : negative_) check_term(t);
  }

  const std::vector<std::string>& positive_terms() const noexcept { return positive_; }
  const std::vector<std::string>& negative_terms() const noexcept { return negative_; }
  std::size_t term_count() const noexcept { return positive_.size() + negative_.size(); }
  bool has_negation() const noexcept { return !negative_.empty(); }

  // "t1 AND t2 AND NOT t3"
  std::string to_string() const {
    std::string out;
    for (const auto& t : positive_) {
      if (!out.empty()) out += " AND ";
      out += t;
    }
    for (const auto& t : negative_) {
      out += " AND NOT ";
      out += t;
    }
    return out;
  }

  static BooleanQuery parse(std::string_view text) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && detail::is_space(text[i])) ++i;
      auto start = i;
      while (i < text.size() && !detail::is_space(text[i])) ++i;
      if (i > start) words.emplace_back(text.substr(start, i - start));
    }
    std::vector<std::string> pos, neg;
    bool expect_term = true;
    bool negate = false;
    for (const auto& w : words) {
      if (expect_term) {
        if (w == "NOT") {
          if (negate || pos.empty()) throw std::invalid_argument("misplaced NOT in query '" + std::string(text) + "'");
          negate = true;
          continue;
        }
        if (w == "AND") throw std::invalid_argument("misplaced AND in query '" + std::string(text) + "'");
        (negate ? neg : pos).push_back(w);
        negate = false;
        expect_term = false;
      } else {
        if (w != "AND") throw std::invalid_argument("expected AND in query '" + std::string(text) + "'");
        expect_term = true;
      }
    }
    if (expect_term) throw std::invalid_argument("incomplete query '" + std::string(text) + "'");
    return BooleanQuery(std::move(pos), std::move(neg));
  }

  friend bool operator==(const BooleanQuery&, const BooleanQuery&) = default;

 private:
  static std::vector<std::string> dedupe(std::vector<std::string> terms) {
    std::vector<std::string> out;
    for (auto& t : terms) {
      if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(std::move(t));
    }
    return out;
  }

  static void check_term(const std::string& t) {
    if (t.empty() || t == "AND" || t == "NOT") throw std::invalid_argument("invalid query term '" + t + "'");
    for (char c : t) {
      if (detail::is_space(c)) throw std::invalid_argument("query term contains whitespace");
    }
  }

  std::vector<std::string> positive_;
  std::vector<std::string> negative_;
};

struct InterfaceCapabilities {
  bool supports_negation = true;
  std::optional<std::size_t> max_query_terms;  // bounds positive + negative terms

  bool fits(std::size_t term_count) const { return !max_query_terms || term_count <= *max_query_terms; }

  bool allows(const BooleanQuery& q) const { return (supports_negation || !q.has_negation()) && fits(q.term_count()); }

  void check(const BooleanQuery& q) const {
    if (!supports_negation && q.has_negation()) {
      throw CapabilityError(CapabilityError::Reason::negation_unsupported, q.to_string(),
                            "interface does not support NOT: '" + q.to_string() + "'");
    }
    if (!fits(q.term_count())) {
      throw CapabilityError(CapabilityError::Reason::too_many_terms, q.to_string(),
                            "query has " + std::to_string(q.term_count()) + " terms, interface allows " +
                                std::to_string(*max_query_terms) + ": '" + q.to_string() + "'");
    }
  }

  friend bool operator==(const InterfaceCapabilities&, const InterfaceCapabilities&) = default;
};

/// The only view a prober gets of a database: its capabilities and the number
/// of documents matching a query. Implementations must be side-effect free and
/// safe for concurrent callers.
class SearchInterface {
 public:
  virtual ~SearchInterface() = default;
  virtual InterfaceCapabilities capabilities() const = 0;
  virtual std::uint64_t count_matches(const BooleanQuery& query) const = 0;
};

struct DatabaseRecord {
  std::string id;
  std::vector<std::string> tokens;
  std::optional<std::string> label;  // ground truth for tests; never indexed
};

/// In-memory inverted index answering boolean count queries.
class IndexedDatabase final : public SearchInterface {
 public:
  using DocId = std::uint32_t;

  IndexedDatabase() = default;

  explicit IndexedDatabase(const std::vector<DatabaseRecord>& records) {
    for (const auto& r : records) add(r.tokens);
  }

  explicit IndexedDatabase(const std::vector<Document>& documents) {
    for (const auto& d : documents) add(d.tokens);
  }

  InterfaceCapabilities capabilities() const override { return {}; }

  std::uint64_t count_matches(const BooleanQuery& query) const override {
    if (query.positive_terms().empty()) throw std::invalid_argument("a query needs at least one positive term");

    std::vector<std::span<const DocId>> required;
    for (const auto& t : query.positive_terms()) {
      auto list = postings(t);
      if (list.empty()) return 0;
      required.push_back(list);
    }
    std::sort(required.begin(), required.end(), [](auto a, auto b) { return a.size() < b.size(); });

    std::vector<std::span<const DocId>> excluded;
    for (const auto& t : query.negative_terms()) {
      auto list = postings(t);
      if (!list.empty()) excluded.push_back(list);
    }

    std::uint64_t count = 0;
    for (DocId doc : required.front()) {
      bool ok = true;
      for (std::size_t i = 1; ok && i < required.size(); ++i) ok = std::binary_search(required[i].begin(), required[i].end(), doc);
      for (std::size_t i = 0; ok && i < excluded.size(); ++i) ok = !std::binary_search(excluded[i].begin(), excluded[i].end(), doc);
      count += ok;
    }
    return count;
  }

  std::span<const DocId> postings(std::string_view term) const {
    auto it = index_.find(std::string(term));
    if (it == index_.end()) return {};
    return it->second;
  }

  // Ground truth for oracles and tests. Not part of the search contract.
  std::size_t document_count() const noexcept { return size_; }
  std::size_t term_count() const noexcept { return index_.size(); }

 private:
  void add(const std::vector<std::string>& tokens) {
    const auto id = static_cast<DocId>(size_++);
    for (const auto& t : tokens) {
      auto& list = index_[t];
      if (list.empty() || list.back() != id) list.push_back(id);
    }
  }

  std::unordered_map<std::string, std::vector<DocId>> index_;
  std::size_t size_ = 0;
};

/// Presents `inner` with narrower capabilities, rejecting queries that exceed them.
class CapabilityRestrictedInterface final : public SearchInterface {
 public:
  CapabilityRestrictedInterface(const SearchInterface& inner, InterfaceCapabilities capabilities)
      : inner_(&inner), capabilities_(capabilities) {}

  InterfaceCapabilities capabilities() const override { return capabilities_; }

  std::uint64_t count_matches(const BooleanQuery& query) const override {
    capabilities_.check(query);
    return inner_->count_matches(query);
  }

 private:
  const SearchInterface* inner_;
  InterfaceCapabilities capabilities_;
};

inline CapabilityRestrictedInterface wrap_with_capabilities(const SearchInterface& inner,
                                                            InterfaceCapabilities capabilities) {
  return CapabilityRestrictedInterface(inner, capabilities);
}

// ---------------------------------------------------------------------------
// Database snapshots: one JSON object per line, {"id", "tokens"[, "label"]}.

inline void write_database_snapshot(const std::vector<DatabaseRecord>& records, std::ostream& out) {
  for (const auto& r : records) {
    nlohmann::json j = {{"id", r.id}, {"tokens", r.tokens}};
    if (r.label) j["label"] = *r.label;
    out << j.dump() << '\n';
  }
}

inline std::vector<DatabaseRecord> read_database_snapshot(std::istream& in, const std::string& name = "<snapshot>") {
  std::vector<DatabaseRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank_line(line)) continue;
    try {
      auto j = nlohmann::json::parse(line);
      DatabaseRecord r{j.at("id").get<std::string>(), j.at("tokens").get<std::vector<std::string>>(), std::nullopt};
      if (j.contains("label") && j["label"].is_string()) r.label = j["label"].get<std::string>();
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

inline std::vector<DatabaseRecord> load_database_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  return read_database_snapshot(in, path.string());
}

inline void save_database_snapshot(const std::vector<DatabaseRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_database_snapshot(records, out);
}

/// Turns a directory tree or record file of raw text into database records.
/// Labels are optional here and only kept as ground truth.
inline std::vector<DatabaseRecord> records_from_source(const std::filesystem::path& source,
                                                       const PreprocessOptions& options = {}) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::exists(source, ec)) throw DataError("database source '" + source.string() + "' does not exist");

  std::vector<DatabaseRecord> records;
  if (fs::is_directory(source)) {
    for (auto& raw : detail::read_directory_tree(source)) {
      records.push_back({raw.id, preprocess(raw.text, options), raw.label});
    }
    return records;
  }

  std::ifstream in(source);
  if (!in) throw DataError("cannot read '" + source.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank_line(line)) continue;
    const auto where = source.string() + ":" + std::to_string(line_no);
    try {
      auto j = nlohmann::json::parse(line);
      DatabaseRecord r{j.at("id").get<std::string>(), preprocess(j.at("text").get<std::string>(), options), std::nullopt};
      if (j.contains("label") && j["label"].is_string()) r.label = j["label"].get<std::string>();
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return records;
}

inline std::vector<DatabaseRecord> records_from_corpus(const Corpus& corpus) {
  std::vector<DatabaseRecord> records;
  for (const auto& doc : corpus.documents()) {
    std::optional<std::string> label;
    if (doc.label) label = corpus.categories().name(*doc.label);
    records.push_back({doc.id, doc.tokens, label});
  }
  return records;
}

}  // namespace qprobe
