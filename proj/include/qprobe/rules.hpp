#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qprobe/categories.hpp"
#include "qprobe/corpus.hpp"
#include "qprobe/errors.hpp"

namespace qprobe {

/// A conjunctive classification rule: `category IF p1 p2 ... NOT n1 ...`.
struct Rule {
  CategoryIndex category = 0;
  std::vector<std::string> positive_terms;
  std::vector<std::string> negative_terms;
  std::size_t covered_correct = 0;
  std::size_t covered_incorrect = 0;

  std::size_t coverage() const noexcept { return covered_correct + covered_incorrect; }

  std::optional<double> accuracy() const {
    if (coverage() == 0) return std::nullopt;
    return static_cast<double>(covered_correct) / static_cast<double>(coverage());
  }

  bool matches(const TermSet& terms) const {
    for (const auto& t : positive_terms) {
      if (!terms.contains(t)) return false;
    }
    for (const auto& t : negative_terms) {
      if (terms.contains(t)) return false;
    }
    return true;
  }

  void validate() const {
    if (positive_terms.empty()) throw DataError("rule has no positive terms");
    for (const auto& t : negative_terms) {
      if (std::find(positive_terms.begin(), positive_terms.end(), t) != positive_terms.end()) {
        throw DataError("term '" + t + "' is both required and negated in one rule");
      }
    }
  }

  friend bool operator==(const Rule&, const Rule&) = default;
};

/// Rules plus per-category recall measured during training. In ordered mode a
/// document takes the category of the first rule it satisfies.
struct RuleSet {
  CategorySet categories;
  std::vector<Rule> rules;
  bool ordered = true;
  std::vector<std::optional<double>> category_recall;  // nullopt: no training documents

  std::size_t size() const noexcept { return rules.size(); }
  bool empty() const noexcept { return rules.empty(); }

  friend bool operator==(const RuleSet&, const RuleSet&) = default;
};

struct TrainingStats {
  struct RuleCounts {
    std::size_t correct = 0;
    std::size_t incorrect = 0;
    friend bool operator==(const RuleCounts&, const RuleCounts&) = default;
  };

  std::vector<RuleCounts> per_rule;
  std::vector<std::size_t> training_docs;  // per true category
  std::vector<std::size_t> recalled_docs;  // classified into their true category
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<std::size_t> unclassified;   // per true category, no rule fired

  std::optional<double> recall(CategoryIndex c) const {
    if (training_docs.at(c) == 0) return std::nullopt;
    return static_cast<double>(recalled_docs[c]) / static_cast<double>(training_docs[c]);
  }

  std::vector<std::optional<double>> recalls() const {
    std::vector<std::optional<double>> out;
    for (std::size_t c = 0; c < training_docs.size(); ++c) out.push_back(recall(c));
    return out;
  }
};

// ---------------------------------------------------------------------------
// Classification

namespace detail {

// Index of the rule deciding the document, or nullopt when none fires.
inline std::optional<std::size_t> deciding_rule(const RuleSet& rule_set, const TermSet& terms) {
  if (rule_set.ordered) {
    for (std::size_t i = 0; i < rule_set.rules.size(); ++i) {
      if (rule_set.rules[i].matches(terms)) return i;
    }
    return std::nullopt;
  }
  // Unordered: majority vote over firing rules; ties go to the category whose
  // first firing rule comes earliest. The returned rule is that earliest rule.
  std::vector<std::size_t> votes(rule_set.categories.size(), 0);
  std::vector<std::size_t> first(rule_set.categories.size(), std::numeric_limits<std::size_t>::max());
  bool any = false;
  for (std::size_t i = 0; i < rule_set.rules.size(); ++i) {
    const auto& rule = rule_set.rules[i];
    if (!rule.matches(terms)) continue;
    any = true;
    ++votes[rule.category];
    first[rule.category] = std::min(first[rule.category], i);
  }
  if (!any) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t c = 1; c < votes.size(); ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && first[c] < first[best])) best = c;
  }
  return first[best];
}

}  // namespace detail

inline std::optional<CategoryIndex> classify_document(const RuleSet& rule_set, const TermSet& terms) {
  if (auto i = detail::deciding_rule(rule_set, terms)) return rule_set.rules[*i].category;
  return std::nullopt;
}

inline std::optional<CategoryIndex> classify_document(const RuleSet& rule_set, const Document& document) {
  return classify_document(rule_set, TermSet(document.tokens));
}

/// Per-rule count of documents whose first satisfied rule is that rule.
/// This is what an ordered probe of each rule should report.
inline std::vector<std::size_t> first_match_counts(const RuleSet& rule_set, const std::vector<Document>& documents) {
  std::vector<std::size_t> counts(rule_set.rules.size(), 0);
  for (const auto& doc : documents) {
    TermSet terms(doc.tokens);
    for (std::size_t i = 0; i < rule_set.rules.size(); ++i) {
      if (rule_set.rules[i].matches(terms)) {
        ++counts[i];
        break;
      }
    }
  }
  return counts;
}

/// Exact category histogram of the rule set's decisions over `documents`.
inline CoverageVector apply_to_corpus(const RuleSet& rule_set, const std::vector<Document>& documents) {
  std::vector<double> counts(rule_set.categories.size(), 0.0);
  for (const auto& doc : documents) {
    if (auto c = classify_document(rule_set, doc)) counts[*c] += 1.0;
  }
  return CoverageVector(rule_set.categories, std::move(counts));
}

inline CoverageVector apply_to_corpus(const RuleSet& rule_set, const Corpus& corpus) {
  return apply_to_corpus(rule_set, corpus.documents());
}

/// Per-rule precision counts, recall and confusion of `rule_set` on a labeled
/// corpus. Unlabeled documents are ignored.
inline TrainingStats evaluate(const RuleSet& rule_set, const Corpus& corpus) {
  const auto k = rule_set.categories.size();
  TrainingStats stats;
  stats.per_rule.assign(rule_set.rules.size(), {});
  stats.training_docs.assign(k, 0);
  stats.recalled_docs.assign(k, 0);
  stats.confusion.assign(k, std::vector<std::size_t>(k, 0));
  stats.unclassified.assign(k, 0);

  for (const auto& doc : corpus.documents()) {
    if (!doc.label) continue;
    const auto truth = *doc.label;
    ++stats.training_docs[truth];
    TermSet terms(doc.tokens);

    if (rule_set.ordered) {
      auto i = detail::deciding_rule(rule_set, terms);
      if (!i) {
        ++stats.unclassified[truth];
        continue;
      }
      const auto predicted = rule_set.rules[*i].category;
      (predicted == truth ? stats.per_rule[*i].correct : stats.per_rule[*i].incorrect) += 1;
      ++stats.confusion[truth][predicted];
      if (predicted == truth) ++stats.recalled_docs[truth];
    } else {
      for (std::size_t i = 0; i < rule_set.rules.size(); ++i) {
        const auto& rule = rule_set.rules[i];
        if (rule.matches(terms)) (rule.category == truth ? stats.per_rule[i].correct : stats.per_rule[i].incorrect) += 1;
      }
      auto predicted = classify_document(rule_set, terms);
      if (!predicted) {
        ++stats.unclassified[truth];
        continue;
      }
      ++stats.confusion[truth][*predicted];
      if (*predicted == truth) ++stats.recalled_docs[truth];
    }
  }
  return stats;
}

/// Copies rule precision counts and category recall from `stats` into the rule set.
inline RuleSet with_stats(RuleSet rule_set, const TrainingStats& stats) {
  for (std::size_t i = 0; i < rule_set.rules.size(); ++i) {
    rule_set.rules[i].covered_correct = stats.per_rule.at(i).correct;
    rule_set.rules[i].covered_incorrect = stats.per_rule.at(i).incorrect;
  }
  rule_set.category_recall = stats.recalls();
  return rule_set;
}

// ---------------------------------------------------------------------------
// Training: sequential covering with information-gain literal selection.

struct TrainOptions {
  // Minimum number of training documents an accepted rule must cover. Unset:
  // max(1, round(0.5% of the training set)).
  std::optional<std::size_t> min_rule_coverage;
  std::size_t max_rule_length = 4;
  bool allow_negation = false;
  bool ordered = true;
};

struct TrainResult {
  RuleSet rule_set;
  TrainingStats stats;
  std::size_t min_rule_coverage = 1;
  std::vector<std::string> warnings;
};

inline std::size_t default_min_rule_coverage(std::size_t training_size) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.005 * static_cast<double>(training_size))));
}

namespace detail {

struct Literal {
  std::uint32_t term = 0;
  bool negated = false;
};

inline double foil_gain(double p0, double n0, double p1, double n1) {
  if (p1 <= 0.0) return -std::numeric_limits<double>::infinity();
  return p1 * (std::log2(p1 / (p1 + n1)) - std::log2(p0 / (p0 + n0)));
}

class RuleGrower {
 public:
  RuleGrower(const Corpus& corpus, const TrainOptions& options, std::size_t min_coverage)
      : options_(options), min_coverage_(min_coverage) {
    const auto& vocab = corpus.vocabulary();
    std::unordered_map<std::string_view, std::uint32_t> ids;
    for (std::uint32_t i = 0; i < vocab.size(); ++i) ids.emplace(vocab[i], i);
    terms_ = vocab;
    for (const auto& doc : corpus.documents()) {
      std::vector<std::uint32_t> doc_terms;
      for (const auto& token : doc.tokens) {
        auto it = ids.find(token);
        if (it != ids.end()) doc_terms.push_back(it->second);
      }
      std::sort(doc_terms.begin(), doc_terms.end());
      doc_terms.erase(std::unique(doc_terms.begin(), doc_terms.end()), doc_terms.end());
      doc_terms_.push_back(std::move(doc_terms));
      labels_.push_back(*doc.label);
    }
    active_.assign(labels_.size(), true);
  }

  // Learns every acceptable rule for `category` against the remaining pool,
  // removing covered documents as rules are accepted.
  std::vector<Rule> learn_category(CategoryIndex category) {
    std::vector<Rule> rules;
    while (true) {
      std::vector<std::size_t> covered;
      for (std::size_t d = 0; d < labels_.size(); ++d) {
        if (active_[d]) covered.push_back(d);
      }
      auto [literals, docs] = grow(category, std::move(covered));
      if (literals.empty()) break;
      std::size_t p = 0;
      for (auto d : docs) p += labels_[d] == category;
      const auto n = docs.size() - p;
      if (docs.size() < min_coverage_ || p <= n) break;

      Rule rule;
      rule.category = category;
      for (const auto& lit : literals) (lit.negated ? rule.negative_terms : rule.positive_terms).push_back(terms_[lit.term]);
      rule.covered_correct = p;
      rule.covered_incorrect = n;
      rules.push_back(std::move(rule));
      for (auto d : docs) active_[d] = false;
    }
    return rules;
  }

  bool has_active(CategoryIndex category) const {
    for (std::size_t d = 0; d < labels_.size(); ++d) {
      if (active_[d] && labels_[d] == category) return true;
    }
    return false;
  }

 private:
  bool contains(std::size_t doc, std::uint32_t term) const {
    return std::binary_search(doc_terms_[doc].begin(), doc_terms_[doc].end(), term);
  }

  std::pair<std::vector<Literal>, std::vector<std::size_t>> grow(CategoryIndex category, std::vector<std::size_t> covered) {
    std::vector<Literal> literals;
    std::vector<bool> used(terms_.size(), false);
    std::vector<std::size_t> pos_count(terms_.size()), neg_count(terms_.size());

    while (literals.size() < options_.max_rule_length) {
      double p0 = 0.0;
      for (auto d : covered) p0 += labels_[d] == category;
      const double n0 = static_cast<double>(covered.size()) - p0;
      if (p0 == 0.0) break;
      if (n0 == 0.0 && !literals.empty()) break;

      std::fill(pos_count.begin(), pos_count.end(), 0);
      std::fill(neg_count.begin(), neg_count.end(), 0);
      for (auto d : covered) {
        auto& counts = labels_[d] == category ? pos_count : neg_count;
        for (auto t : doc_terms_[d]) ++counts[t];
      }

      std::optional<Literal> best;
      double best_gain = 1e-12;
      const bool can_negate = options_.allow_negation && !literals.empty();
      for (std::uint32_t t = 0; t < terms_.size(); ++t) {
        if (used[t]) continue;
        const double pp = static_cast<double>(pos_count[t]), pn = static_cast<double>(neg_count[t]);
        if (pp + pn >= static_cast<double>(min_coverage_)) {
          // With no negatives left every literal has zero gain; prefer the widest one.
          const double g = n0 == 0.0 ? (pp > 0.0 ? pp : -1.0) : foil_gain(p0, n0, pp, pn);
          // Candidates are scanned in lexicographic term order, so strict '>' breaks ties by term.
          if (g > best_gain) {
            best_gain = g;
            best = Literal{t, false};
          }
        }
        if (can_negate) {
          const double np = p0 - pp, nn = n0 - pn;
          if (np + nn >= static_cast<double>(min_coverage_)) {
            const double g = foil_gain(p0, n0, np, nn);
            if (g > best_gain) {
              best_gain = g;
              best = Literal{t, true};
            }
          }
        }
      }
      if (!best) break;

      used[best->term] = true;
      literals.push_back(*best);
      std::erase_if(covered, [&](std::size_t d) { return contains(d, best->term) == best->negated; });
    }
    return {std::move(literals), std::move(covered)};
  }

  TrainOptions options_;
  std::size_t min_coverage_;
  std::vector<std::string> terms_;
  std::vector<std::vector<std::uint32_t>> doc_terms_;
  std::vector<CategoryIndex> labels_;
  std::vector<bool> active_;
};

}  // namespace detail

/// Learns an ordered rule set from a fully labeled training corpus.
///
/// Categories are handled from the rarest to the most frequent. For each one,
/// rules are grown greedily, one literal at a time, picking the vocabulary term
/// with the highest FOIL information gain over the documents not yet covered by
/// any accepted rule. Growth stops when the rule is pure, reaches
/// `max_rule_length`, or no literal keeps coverage at the threshold. A grown
/// rule is kept only if it covers at least `min_rule_coverage` documents and
/// is right more often than wrong; its documents then leave the pool.
inline TrainResult train(const Corpus& corpus, const TrainOptions& options = {}) {
  if (corpus.empty()) throw DataError("cannot train on an empty corpus");
  for (const auto& doc : corpus.documents()) {
    if (!doc.label) throw DataError("training document '" + doc.id + "' has no label");
  }
  if (options.max_rule_length == 0) throw ConfigError("max rule length must be at least 1");
  if (options.min_rule_coverage && *options.min_rule_coverage == 0) {
    throw ConfigError("min rule coverage must be at least 1");
  }

  TrainResult result;
  result.min_rule_coverage = options.min_rule_coverage.value_or(default_min_rule_coverage(corpus.size()));

  const auto histogram = corpus.label_histogram();
  std::vector<CategoryIndex> order(histogram.size());
  for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return histogram[a] < histogram[b]; });

  for (std::size_t c = 0; c < histogram.size(); ++c) {
    if (histogram[c] == 0) {
      result.warnings.push_back("category '" + corpus.categories().name(c) +
                                "' has no training documents; its recall is undefined");
    }
  }

  detail::RuleGrower grower(corpus, options, result.min_rule_coverage);
  RuleSet rule_set;
  rule_set.categories = corpus.categories();
  rule_set.ordered = options.ordered;
  for (auto c : order) {
    for (auto& rule : grower.learn_category(c)) rule_set.rules.push_back(std::move(rule));
  }

  result.stats = evaluate(rule_set, corpus);
  result.rule_set = with_stats(std::move(rule_set), result.stats);
  return result;
}

// ---------------------------------------------------------------------------
// Rule files
//
//   Computers IF graphics windows # correct=288 incorrect=12
//   Hobbies IF baseball NOT god # correct=40 incorrect=2
//   #mode ordered
//   #recall Computers 0.6666666666666666
//   #recall Hobbies undefined
//
// The #recall footer lists every category in vector order. Other lines that
// start with '#' are comments.

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    auto start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

inline std::size_t parse_count(std::string_view field, std::string_view key, const std::string& where) {
  if (field.substr(0, key.size()) != key) throw DataError(where + ": expected '" + std::string(key) + "<n>'");
  auto digits = field.substr(key.size());
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || digits.empty()) {
    throw DataError(where + ": bad count '" + std::string(field) + "'");
  }
  return value;
}

inline void check_rule_term(const std::string& term, const std::string& where) {
  if (term == "IF" || term == "NOT" || term.find('#') != std::string::npos) {
    throw DataError(where + ": '" + term + "' cannot be used as a rule term");
  }
}

}  // namespace detail

inline std::string serialize_rules(const RuleSet& rule_set) {
  std::ostringstream out;
  for (const auto& rule : rule_set.rules) {
    out << rule_set.categories.name(rule.category) << " IF";
    for (const auto& t : rule.positive_terms) out << ' ' << t;
    if (!rule.negative_terms.empty()) {
      out << " NOT";
      for (const auto& t : rule.negative_terms) out << ' ' << t;
    }
    out << " # correct=" << rule.covered_correct << " incorrect=" << rule.covered_incorrect << '\n';
  }
  out << "#mode " << (rule_set.ordered ? "ordered" : "unordered") << '\n';
  for (std::size_t c = 0; c < rule_set.categories.size(); ++c) {
    const auto& recall = c < rule_set.category_recall.size() ? rule_set.category_recall[c] : std::nullopt;
    out << "#recall " << rule_set.categories.name(c) << ' '
        << (recall ? detail::format_double(*recall) : std::string("undefined")) << '\n';
  }
  return out.str();
}

/// Parses a rule file. Categories come from the #recall footer, else from
/// `categories`, else from the rules in order of first appearance.
inline RuleSet parse_rules(std::string_view text, const std::optional<CategorySet>& categories = std::nullopt) {
  struct PendingRule {
    std::string label;
    Rule rule;
    std::string where;
  };
  std::vector<PendingRule> pending;
  std::vector<std::pair<std::string, std::optional<double>>> recalls;
  bool ordered = true;

  std::size_t line_no = 0;
  for (auto line : detail::split_lines(text)) {
    ++line_no;
    const auto where = "line " + std::to_string(line_no);
    if (detail::is_blank_line(line)) continue;
    auto fields = detail::split_ws(line);

    if (fields[0].front() == '#') {
      if (fields[0] == "#mode") {
        if (fields.size() != 2 || (fields[1] != "ordered" && fields[1] != "unordered")) {
          throw DataError(where + ": expected '#mode ordered' or '#mode unordered'");
        }
        ordered = fields[1] == "ordered";
      } else if (fields[0] == "#recall") {
        if (fields.size() != 3) throw DataError(where + ": expected '#recall <category> <value|undefined>'");
        std::optional<double> value;
        if (fields[2] != "undefined") {
          double v = 0.0;
          auto [ptr, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), v);
          if (ec != std::errc{} || ptr != fields[2].data() + fields[2].size() || !(v >= 0.0 && v <= 1.0)) {
            throw DataError(where + ": recall must be a number in [0, 1] or 'undefined'");
          }
          value = v;
        }
        recalls.emplace_back(fields[1], value);
      }
      continue;
    }

    PendingRule p;
    p.where = where;
    p.label = fields[0];
    if (fields.size() < 2 || fields[1] != "IF") throw DataError(where + ": expected '<category> IF <term> ...'");
    std::size_t i = 2;
    bool negating = false;
    for (; i < fields.size(); ++i) {
      const auto& f = fields[i];
      if (f.front() == '#') break;
      if (f == "NOT") {
        if (negating) throw DataError(where + ": repeated NOT");
        negating = true;
        continue;
      }
      detail::check_rule_term(f, where);
      (negating ? p.rule.negative_terms : p.rule.positive_terms).push_back(f);
    }
    if (p.rule.positive_terms.empty()) throw DataError(where + ": rule has an empty antecedent");
    if (negating && p.rule.negative_terms.empty()) throw DataError(where + ": NOT without terms");
    if (i < fields.size()) {
      // Stats suffix: '#' followed by correct=<n> incorrect=<n>.
      std::vector<std::string> stats;
      if (fields[i] != "#") stats.push_back(fields[i].substr(1));
      for (++i; i < fields.size(); ++i) stats.push_back(fields[i]);
      if (stats.size() != 2) throw DataError(where + ": expected '# correct=<n> incorrect=<n>'");
      p.rule.covered_correct = detail::parse_count(stats[0], "correct=", where);
      p.rule.covered_incorrect = detail::parse_count(stats[1], "incorrect=", where);
    }
    try {
      p.rule.validate();
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    pending.push_back(std::move(p));
  }

  RuleSet rule_set;
  rule_set.ordered = ordered;
  if (!recalls.empty()) {
    std::vector<std::string> names;
    for (const auto& [name, value] : recalls) names.push_back(name);
    rule_set.categories = CategorySet(std::move(names));
    if (categories && !(*categories == rule_set.categories)) {
      throw DataError("rule file categories do not match the expected category set");
    }
    for (const auto& [name, value] : recalls) rule_set.category_recall.push_back(value);
  } else if (categories) {
    rule_set.categories = *categories;
    rule_set.category_recall.assign(categories->size(), std::nullopt);
  } else {
    std::vector<std::string> names;
    for (const auto& p : pending) {
      if (std::find(names.begin(), names.end(), p.label) == names.end()) names.push_back(p.label);
    }
    rule_set.categories = CategorySet(std::move(names));
    rule_set.category_recall.assign(rule_set.categories.size(), std::nullopt);
  }

  for (auto& p : pending) {
    auto c = rule_set.categories.find(p.label);
    if (!c) throw DataError(p.where + ": unknown category label '" + p.label + "'");
    p.rule.category = *c;
    rule_set.rules.push_back(std::move(p.rule));
  }
  return rule_set;
}

inline RuleSet load_rules(const std::filesystem::path& path, const std::optional<CategorySet>& categories = std::nullopt) {
  try {
    return parse_rules(detail::read_file(path), categories);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace qprobe
