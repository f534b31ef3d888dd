#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qprobe/errors.hpp"
#include "qprobe/rules.hpp"
#include "qprobe/searchdb.hpp"

namespace qprobe {

/// A conjunction that a probe must exclude: documents satisfying every
/// positive term and lacking every negative term.
struct Conjunction {
  std::vector<std::string> positive;
  std::vector<std::string> negative;

  bool single_term() const noexcept { return positive.size() == 1 && negative.empty(); }
  bool empty() const noexcept { return positive.empty() && negative.empty(); }

  // Every document satisfying `other` also satisfies *this.
  bool implied_by(const Conjunction& other) const {
    auto subset = [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
      return std::all_of(a.begin(), a.end(), [&](const auto& t) { return std::find(b.begin(), b.end(), t) != b.end(); });
    };
    return subset(positive, other.positive) && subset(negative, other.negative);
  }

  friend bool operator==(const Conjunction&, const Conjunction&) = default;
};

/// The query for one rule: its antecedent minus everything in `excluded`.
/// In ordered mode `excluded` holds the earlier rules, so the probe counts the
/// documents whose first satisfied rule is this one.
struct ProbeQuery {
  std::size_t rule_index = 0;
  CategoryIndex category = 0;
  std::vector<std::string> positive;
  std::vector<Conjunction> excluded;
  bool shadowed = false;  // an earlier rule fires on every document this rule matches

  // The probe as a single query, when every exclusion is a single term.
  std::optional<BooleanQuery> as_boolean_query() const {
    if (shadowed) return std::nullopt;
    std::vector<std::string> negative;
    for (const auto& c : excluded) {
      if (!c.single_term()) return std::nullopt;
      negative.push_back(c.positive.front());
    }
    return BooleanQuery(positive, std::move(negative));
  }

  std::string to_string() const {
    std::string out;
    for (const auto& t : positive) out += (out.empty() ? "" : " AND ") + t;
    for (const auto& c : excluded) {
      out += " AND NOT ";
      if (c.single_term()) {
        out += c.positive.front();
        continue;
      }
      std::string inner;
      for (const auto& t : c.positive) inner += (inner.empty() ? "" : " AND ") + t;
      for (const auto& t : c.negative) inner += (inner.empty() ? "NOT " : " AND NOT ") + t;
      out += "(" + inner + ")";
    }
    return out;
  }
};

struct SignedQuery {
  BooleanQuery query;
  int sign = 1;
};

using PlanEntry = std::vector<SignedQuery>;

namespace detail {

inline bool contains_term(const std::vector<std::string>& terms, const std::string& t) {
  return std::find(terms.begin(), terms.end(), t) != terms.end();
}

inline void append_unique(std::vector<std::string>& into, const std::vector<std::string>& terms) {
  for (const auto& t : terms) {
    if (!contains_term(into, t)) into.push_back(t);
  }
}

inline bool intersects(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  return std::any_of(a.begin(), a.end(), [&](const auto& t) { return contains_term(b, t); });
}

// Drops exclusions made redundant by another one (if B implies A, NOT A
// already removes everything NOT B would). Equal conjunctions keep the first.
inline std::vector<Conjunction> absorb(std::vector<Conjunction> excluded) {
  std::vector<bool> redundant(excluded.size(), false);
  for (std::size_t j = 0; j < excluded.size(); ++j) {
    for (std::size_t k = 0; k < excluded.size() && !redundant[j]; ++k) {
      // excluded[j] is redundant when it implies a different exclusion.
      if (k == j || !excluded[k].implied_by(excluded[j])) continue;
      // Mutual implication means equal sets: keep the earlier one.
      redundant[j] = !excluded[j].implied_by(excluded[k]) || k < j;
    }
  }
  std::vector<Conjunction> out;
  for (std::size_t j = 0; j < excluded.size(); ++j) {
    if (!redundant[j]) out.push_back(std::move(excluded[j]));
  }
  return out;
}

}  // namespace detail

/// One probe per rule, in rule order. In ordered mode each probe excludes the
/// full conjunction of every earlier rule that could still fire on its
/// documents; terms the probe already requires are dropped from those
/// conjunctions, and exclusions implied by others are removed.
inline std::vector<ProbeQuery> compile_probes(const RuleSet& rule_set) {
  std::vector<ProbeQuery> probes;
  for (std::size_t i = 0; i < rule_set.rules.size(); ++i) {
    const auto& rule = rule_set.rules[i];
    rule.validate();
    ProbeQuery probe;
    probe.rule_index = i;
    probe.category = rule.category;
    probe.positive = rule.positive_terms;
    for (const auto& t : rule.negative_terms) probe.excluded.push_back({{t}, {}});

    if (rule_set.ordered) {
      for (std::size_t j = 0; j < i; ++j) {
        const auto& earlier = rule_set.rules[j];
        // The earlier rule needs a term absent from this one's matches: it never fires here.
        if (detail::intersects(earlier.negative_terms, rule.positive_terms)) continue;
        Conjunction c;
        for (const auto& t : earlier.positive_terms) {
          if (!detail::contains_term(rule.positive_terms, t)) c.positive.push_back(t);
        }
        c.negative = earlier.negative_terms;
        if (c.empty()) probe.shadowed = true;
        probe.excluded.push_back(std::move(c));
      }
    }
    if (probe.shadowed) {
      probe.excluded.clear();
    } else {
      probe.excluded = detail::absorb(std::move(probe.excluded));
    }
    probes.push_back(std::move(probe));
  }
  return probes;
}

namespace detail {

// Subsets of {0..m-1} by size, then lexicographically.
template <typename F>
bool for_each_subset_by_size(std::size_t m, F&& visit) {
  std::vector<std::size_t> subset;
  for (std::size_t r = 0; r <= m; ++r) {
    subset.resize(r);
    for (std::size_t i = 0; i < r; ++i) subset[i] = i;
    while (true) {
      if (!visit(static_cast<const std::vector<std::size_t>&>(subset))) return false;
      std::size_t i = r;
      while (i > 0 && subset[i - 1] == m - r + i - 1) --i;
      if (i == 0) break;
      ++subset[i - 1];
      for (std::size_t j = i; j < r; ++j) subset[j] = subset[j - 1] + 1;
    }
  }
  return true;
}

}  // namespace detail

/// Static inclusion-exclusion plan for a probe:
///
///   count(P AND NOT N_1 ... AND NOT N_m) = sum over S of (-1)^|S| count(P AND N_S)
///
/// Single-term exclusions stay inline as NOT terms when the interface supports
/// negation; every other exclusion is expanded. Without negation support,
/// negative terms left inside a sub-query are expanded again the same way.
/// Throws BudgetExceeded past `budget` entries and CapabilityError if a
/// sub-query is longer than the interface allows.
inline PlanEntry decompose(const ProbeQuery& probe, const InterfaceCapabilities& capabilities,
                           std::size_t budget = 64) {
  PlanEntry plan;
  if (probe.shadowed) return plan;

  std::vector<std::string> inline_negative;
  std::vector<const Conjunction*> expanded;
  for (const auto& c : probe.excluded) {
    if (capabilities.supports_negation && c.single_term()) {
      inline_negative.push_back(c.positive.front());
    } else {
      expanded.push_back(&c);
    }
  }

  auto emit = [&](std::vector<std::string> pos, std::vector<std::string> neg, int sign) {
    if (detail::intersects(pos, neg)) return;  // contradictory: contributes 0
    if (capabilities.supports_negation || neg.empty()) {
      if (plan.size() == budget) throw BudgetExceeded(budget);
      BooleanQuery q(std::move(pos), std::move(neg));
      capabilities.check(q);
      plan.push_back({std::move(q), sign});
      return;
    }
    detail::for_each_subset_by_size(neg.size(), [&](const std::vector<std::size_t>& t) {
      auto sub = pos;
      for (auto i : t) detail::append_unique(sub, {neg[i]});
      if (plan.size() == budget) throw BudgetExceeded(budget);
      BooleanQuery q(std::move(sub));
      capabilities.check(q);
      plan.push_back({std::move(q), (t.size() % 2 ? -sign : sign)});
      return true;
    });
  };

  detail::for_each_subset_by_size(expanded.size(), [&](const std::vector<std::size_t>& s) {
    auto pos = probe.positive;
    auto neg = inline_negative;
    for (auto j : s) {
      detail::append_unique(pos, expanded[j]->positive);
      detail::append_unique(neg, expanded[j]->negative);
    }
    emit(std::move(pos), std::move(neg), s.size() % 2 ? -1 : 1);
    return true;
  });
  return plan;
}

/// Signed sum of a plan's counts against `search`.
inline std::int64_t execute_plan(const PlanEntry& plan, const SearchInterface& search) {
  std::int64_t sum = 0;
  for (const auto& e : plan) sum += e.sign * static_cast<std::int64_t>(search.count_matches(e.query));
  return sum;
}

struct TruncationResult {
  ProbeQuery probe;
  std::vector<std::pair<BooleanQuery, std::uint64_t>> tests;  // standalone queries issued
};

/// Shortens a probe that exceeds the interface's term limit by dropping
/// exclusions that cannot exclude anything: each exclusion's terms are sent as
/// a standalone query and dropped if it matches no documents. Stops as soon as
/// the probe fits.
inline TruncationResult truncate(const ProbeQuery& probe, const InterfaceCapabilities& capabilities,
                                 const SearchInterface& search) {
  TruncationResult result{probe, {}};
  auto fits = [&](const ProbeQuery& p) {
    auto q = p.as_boolean_query();
    return q && capabilities.allows(*q);
  };
  if (probe.shadowed || fits(probe)) return result;

  std::vector<Conjunction> kept;
  auto& excluded = result.probe.excluded;
  for (std::size_t j = 0; j < excluded.size(); ++j) {
    bool drop = false;
    if (!excluded[j].positive.empty() && capabilities.fits(excluded[j].positive.size())) {
      BooleanQuery standalone(excluded[j].positive);
      auto n = search.count_matches(standalone);
      result.tests.emplace_back(std::move(standalone), n);
      drop = n == 0;
    }
    if (!drop) kept.push_back(excluded[j]);
    ProbeQuery candidate = result.probe;
    candidate.excluded = kept;
    candidate.excluded.insert(candidate.excluded.end(), excluded.begin() + static_cast<std::ptrdiff_t>(j) + 1, excluded.end());
    if (fits(candidate)) {
      result.probe = std::move(candidate);
      return result;
    }
  }
  excluded = std::move(kept);
  return result;
}

// ---------------------------------------------------------------------------
// Execution

struct ProbeOptions {
  std::size_t budget = 64;      // queries a single probe may issue
  std::size_t parallelism = 1;  // concurrent sub-queries within a probe
  std::size_t zero_proof_attempts = 8;
};

/// One issued query. `sign` is the query's weight in the probe's signed sum;
/// 0 marks a test query (truncation or zero check) that only steers the plan.
struct AuditRecord {
  std::size_t rule_index = 0;
  CategoryIndex category = 0;
  std::string query;
  int sign = 1;
  std::uint64_t count = 0;

  friend bool operator==(const AuditRecord&, const AuditRecord&) = default;
};

struct ProbeOutcome {
  std::size_t rule_index = 0;
  CategoryIndex category = 0;
  std::uint64_t count = 0;        // combined count, clamped at 0; lower bound if unresolved
  std::int64_t signed_sum = 0;    // before clamping
  bool clamped = false;
  bool unresolved = false;
  std::string unresolved_reason;
  std::size_t queries_issued = 0;
};

struct ProbeResult {
  std::vector<ProbeOutcome> probes;
  std::vector<AuditRecord> audit;  // ordered by (rule_index, plan position)
  std::size_t total_queries = 0;

  std::vector<std::uint64_t> counts() const {
    std::vector<std::uint64_t> out;
    for (const auto& p : probes) out.push_back(p.count);
    return out;
  }

  bool any_unresolved() const {
    return std::any_of(probes.begin(), probes.end(), [](const auto& p) { return p.unresolved; });
  }
};

/// A search-interface failure, tagged with the probe and query that caused it.
class ProbeError : public std::runtime_error {
 public:
  ProbeError(std::size_t rule_index, std::string query, const std::string& what)
      : std::runtime_error("probe for rule " + std::to_string(rule_index) + " failed on '" + query + "': " + what),
        rule_index_(rule_index),
        query_(std::move(query)) {}

  std::size_t rule_index() const noexcept { return rule_index_; }
  const std::string& query() const noexcept { return query_; }

 private:
  std::size_t rule_index_;
  std::string query_;
};

namespace detail {

template <typename F>
void parallel_for(std::size_t n, std::size_t parallelism, F&& body) {
  if (parallelism <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < std::min(parallelism, n); ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

// Executes one probe against a search interface, adapting it to the
// interface's capabilities. Exclusions are expanded lazily: subsets are
// visited level by level and a subset is only queried when every one of its
// immediate subsets had a nonzero count, since counts can only shrink as
// conjunctions grow. Every skipped subset therefore contributes exactly 0.
class ProbeRunner {
 public:
  ProbeRunner(const SearchInterface& search, const ProbeOptions& options, const ProbeQuery& probe)
      : search_(search), caps_(search.capabilities()), options_(options), probe_(probe) {}

  ProbeOutcome run(std::vector<AuditRecord>& audit) {
    ProbeOutcome out;
    out.rule_index = probe_.rule_index;
    out.category = probe_.category;
    if (!probe_.shadowed) {
      auto value = evaluate();
      out.signed_sum = value.value;
      out.unresolved = !value.resolved;
      out.unresolved_reason = value.reason;
      const auto v = value.resolved ? value.value : value.lower_bound;
      out.clamped = value.resolved && v < 0;
      out.count = v < 0 ? 0 : static_cast<std::uint64_t>(v);
    }
    out.queries_issued = audit_.size();
    audit.insert(audit.end(), audit_.begin(), audit_.end());
    return out;
  }

 private:
  struct Value {
    std::int64_t value = 0;
    bool resolved = true;
    std::int64_t lower_bound = 0;
    std::string reason;
  };

  Value evaluate() {
    ProbeQuery probe = probe_;
    if (auto direct = probe.as_boolean_query()) {
      if (caps_.allows(*direct)) return single(*direct);
      if (caps_.supports_negation) {
        // Too long: shed exclusions that match nothing.
        if (!reserve(probe.excluded.size())) return unresolved_budget();
        TruncationResult truncated;
        try {
          truncated = truncate(probe, caps_, search_);
        } catch (const std::exception& e) {
          throw ProbeError(probe_.rule_index, probe.to_string(), e.what());
        }
        for (const auto& [q, n] : truncated.tests) record(q, 0, n);
        probe = std::move(truncated.probe);
        if (auto q = probe.as_boolean_query(); q && caps_.allows(*q)) return single(*q);
      }
    }
    // Inline single-term NOTs only when length is unconstrained.
    std::vector<std::string> inline_negative;
    std::vector<Conjunction> expanded;
    for (const auto& c : probe.excluded) {
      if (caps_.supports_negation && !caps_.max_query_terms && c.single_term()) {
        inline_negative.push_back(c.positive.front());
      } else {
        expanded.push_back(c);
      }
    }
    return expand(probe.positive, inline_negative, expanded, 1);
  }

  Value single(const BooleanQuery& q) {
    auto counts = issue_batch({{q, 1}});
    if (!counts) return unresolved_budget();
    Value v;
    v.value = static_cast<std::int64_t>(counts->front());
    return v;
  }

  // Inclusion-exclusion over `expanded` on top of (base AND NOT inline_negative).
  Value expand(const std::vector<std::string>& base, const std::vector<std::string>& inline_negative,
               const std::vector<Conjunction>& expanded, int sign) {
    struct Node {
      std::vector<std::size_t> subset;
      std::vector<std::string> pos, neg;
      std::optional<std::int64_t> count;
    };

    std::vector<std::int64_t> level_sums;
    std::set<std::vector<std::size_t>> nonzero_previous;
    std::vector<std::vector<std::size_t>> candidates{{}};

    Value total;
    for (std::size_t r = 0; !candidates.empty(); ++r) {
      const int level_sign = (r % 2 ? -sign : sign);
      std::vector<Node> nodes;
      for (auto& s : candidates) {
        Node node;
        node.pos = base;
        node.neg = inline_negative;
        for (auto j : s) {
          append_unique(node.pos, expanded[j].positive);
          append_unique(node.neg, expanded[j].negative);
        }
        node.subset = std::move(s);
        nodes.push_back(std::move(node));
      }

      // Plain queries go out as one batch; the rest are resolved one by one.
      std::vector<std::pair<BooleanQuery, int>> batch;
      std::vector<std::size_t> batch_nodes;
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        auto& n = nodes[i];
        if (intersects(n.pos, n.neg) || known_zero(n.pos, n.neg)) {
          n.count = 0;
        } else if ((caps_.supports_negation || n.neg.empty()) && caps_.fits(n.pos.size() + n.neg.size())) {
          batch.emplace_back(BooleanQuery(n.pos, n.neg), level_sign);
          batch_nodes.push_back(i);
        }
      }
      if (!batch.empty()) {
        auto counts = issue_batch(batch);
        if (!counts) return unresolved_from(level_sums, "query budget exhausted");
        for (std::size_t b = 0; b < batch_nodes.size(); ++b) nodes[batch_nodes[b]].count = static_cast<std::int64_t>((*counts)[b]);
      }
      for (auto& n : nodes) {
        if (n.count) continue;
        // NOT terms the interface cannot take (or cannot fit) are expanded again.
        if (!n.neg.empty() && (!caps_.supports_negation || caps_.fits(n.pos.size()))) {
          std::vector<Conjunction> singles;
          for (const auto& t : n.neg) singles.push_back({{t}, {}});
          auto nested = expand(n.pos, {}, singles, level_sign);
          if (!nested.resolved) return unresolved_from(level_sums, nested.reason);
          n.count = nested.value * level_sign;
        } else if (prove_zero(n.pos)) {
          n.count = 0;
        } else {
          return unresolved_from(level_sums, exhausted_ ? "query budget exhausted"
                                                        : "sub-query longer than the interface allows");
        }
      }

      std::int64_t level_sum = 0;
      std::set<std::vector<std::size_t>> nonzero;
      for (auto& n : nodes) {
        level_sum += *n.count;
        if (*n.count != 0) nonzero.insert(n.subset);
      }
      level_sums.push_back(level_sum);
      total.value += (r % 2 ? -level_sum : level_sum);
      if (r == 1) {
        // Exclusions that share no document with the base can be ignored; if
        // the rest are single terms that fit, one NOT query finishes the job.
        if (auto shortcut = reduced_query(base, inline_negative, expanded, nonzero)) {
          auto counts = issue_batch({{*shortcut, sign}});
          if (!counts) return unresolved_from(level_sums, "query budget exhausted");
          Value v;
          v.value = sign * static_cast<std::int64_t>(counts->front());
          return v;
        }
      }
      candidates = next_level(nonzero, expanded.size(), r + 1);
    }
    total.value *= sign;
    return total;
  }

  // base AND NOT inline_negative AND NOT each single-term exclusion in
  // `nonzero` (subsets of size one), when that is a legal query and more than
  // one exclusion is left to resolve.
  std::optional<BooleanQuery> reduced_query(const std::vector<std::string>& base,
                                            const std::vector<std::string>& inline_negative,
                                            const std::vector<Conjunction>& expanded,
                                            const std::set<std::vector<std::size_t>>& nonzero) const {
    if (!caps_.supports_negation || nonzero.size() < 2) return std::nullopt;
    std::vector<std::string> neg = inline_negative;
    for (const auto& s : nonzero) {
      if (!expanded[s.front()].single_term()) return std::nullopt;
      append_unique(neg, expanded[s.front()].positive);
    }
    if (!caps_.fits(base.size() + neg.size())) return std::nullopt;
    return BooleanQuery(base, neg);
  }

  // Apriori-style candidate generation: size-k subsets all of whose
  // (k-1)-subsets are in `nonzero`.
  static std::vector<std::vector<std::size_t>> next_level(const std::set<std::vector<std::size_t>>& nonzero,
                                                          std::size_t m, std::size_t k) {
    std::vector<std::vector<std::size_t>> out;
    if (k == 1) {
      if (nonzero.empty()) return out;
      for (std::size_t j = 0; j < m; ++j) out.push_back({j});
      return out;
    }
    std::vector<std::vector<std::size_t>> prev(nonzero.begin(), nonzero.end());
    for (std::size_t a = 0; a < prev.size(); ++a) {
      for (std::size_t b = a + 1; b < prev.size(); ++b) {
        if (!std::equal(prev[a].begin(), prev[a].end() - 1, prev[b].begin())) break;
        auto cand = prev[a];
        cand.push_back(prev[b].back());
        bool all = true;
        for (std::size_t drop = 0; drop + 2 < cand.size() && all; ++drop) {
          auto sub = cand;
          sub.erase(sub.begin() + static_cast<std::ptrdiff_t>(drop));
          all = nonzero.count(sub) > 0;
        }
        if (all) out.push_back(std::move(cand));
      }
    }
    return out;
  }

  // Bonferroni: a partial inclusion-exclusion sum that stops after an odd
  // level is a lower bound on the true count.
  Value unresolved_from(const std::vector<std::int64_t>& level_sums, std::string reason) {
    Value v;
    v.resolved = false;
    v.reason = std::move(reason);
    std::size_t last = level_sums.size();
    if (last % 2 == 1) --last;  // keep levels 0..last-1 with last-1 odd
    std::int64_t bound = 0;
    for (std::size_t r = 0; r < last; ++r) bound += (r % 2 ? -level_sums[r] : level_sums[r]);
    v.lower_bound = std::max<std::int64_t>(0, bound);
    return v;
  }

  static Value unresolved_budget() {
    Value v;
    v.resolved = false;
    v.reason = "query budget exhausted";
    return v;
  }

  bool known_zero(const std::vector<std::string>& pos, const std::vector<std::string>& neg) const {
    for (const auto& [zp, zn] : zeros_) {
      if (std::all_of(zp.begin(), zp.end(), [&](const auto& t) { return contains_term(pos, t); }) &&
          std::all_of(zn.begin(), zn.end(), [&](const auto& t) { return contains_term(neg, t); })) {
        return true;
      }
    }
    return false;
  }

  // Looks for a sub-conjunction that fits the interface and matches nothing.
  bool prove_zero(const std::vector<std::string>& pos) {
    if (!caps_.max_query_terms || pos.size() <= *caps_.max_query_terms) return false;
    const auto width = *caps_.max_query_terms;
    std::size_t attempts = 0;
    bool found = false;
    std::vector<std::size_t> pick(width);
    for (std::size_t i = 0; i < width; ++i) pick[i] = i;
    while (attempts < options_.zero_proof_attempts && !found) {
      std::vector<std::string> sub;
      for (auto i : pick) sub.push_back(pos[i]);
      if (!known_zero(sub, {})) {
        auto counts = issue_batch({{BooleanQuery(sub), 0}});
        if (!counts) return false;
        ++attempts;
        found = counts->front() == 0;
      } else {
        found = true;
      }
      std::size_t i = width;
      while (i > 0 && pick[i - 1] == pos.size() - width + i - 1) --i;
      if (i == 0) break;
      ++pick[i - 1];
      for (std::size_t j = i; j < width; ++j) pick[j] = pick[j - 1] + 1;
    }
    return found;
  }

  bool reserve(std::size_t n) {
    if (audit_.size() + n > options_.budget) {
      exhausted_ = true;
      return false;
    }
    return true;
  }

  std::optional<std::vector<std::uint64_t>> issue_batch(const std::vector<std::pair<BooleanQuery, int>>& batch) {
    if (!reserve(batch.size())) return std::nullopt;
    std::vector<std::uint64_t> counts(batch.size());
    parallel_for(batch.size(), options_.parallelism, [&](std::size_t i) {
      try {
        counts[i] = search_.count_matches(batch[i].first);
      } catch (const std::exception& e) {
        throw ProbeError(probe_.rule_index, batch[i].first.to_string(), e.what());
      }
    });
    for (std::size_t i = 0; i < batch.size(); ++i) record(batch[i].first, batch[i].second, counts[i]);
    return counts;
  }

  void record(const BooleanQuery& q, int sign, std::uint64_t count) {
    if (count == 0) zeros_.emplace_back(q.positive_terms(), q.negative_terms());
    audit_.push_back({probe_.rule_index, probe_.category, q.to_string(), sign, count});
  }

  const SearchInterface& search_;
  InterfaceCapabilities caps_;
  ProbeOptions options_;
  const ProbeQuery& probe_;
  std::vector<AuditRecord> audit_;
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> zeros_;
  bool exhausted_ = false;
};

}  // namespace detail

/// Probes a database with every rule of `rule_set` and collects per-rule
/// match counts. Probes run in rule order; each is adapted to the interface's
/// capabilities by truncation and inclusion-exclusion. A probe that cannot be
/// resolved within the budget or the term limit is flagged and reports a lower
/// bound.
inline ProbeResult probe_database(const RuleSet& rule_set, const SearchInterface& search,
                                  const ProbeOptions& options = {}) {
  if (options.budget == 0) throw ConfigError("probe budget must be at least 1");
  ProbeResult result;
  for (const auto& probe : compile_probes(rule_set)) {
    detail::ProbeRunner runner(search, options, probe);
    result.probes.push_back(runner.run(result.audit));
  }
  result.total_queries = result.audit.size();
  return result;
}

// Audit log: one JSON object per issued query.
inline void write_audit_log(const ProbeResult& result, const CategorySet& categories, std::ostream& out) {
  for (const auto& r : result.audit) {
    nlohmann::json j = {{"rule_index", r.rule_index},
                        {"category", categories.name(r.category)},
                        {"query", r.query},
                        {"sign", r.sign},
                        {"count", r.count}};
    out << j.dump() << '\n';
  }
}

}  // namespace qprobe
