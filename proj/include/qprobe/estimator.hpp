#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qprobe/categories.hpp"
#include "qprobe/errors.hpp"
#include "qprobe/prober.hpp"
#include "qprobe/rules.hpp"

namespace qprobe {

struct Thresholds {
  double tau_s = 0.6;    // specificity threshold, in [0, 1]
  double tau_c = 100.0;  // coverage threshold, >= 0

  void validate() const {
    if (!(tau_s >= 0.0 && tau_s <= 1.0)) throw ConfigError("tau_s must be in [0, 1]");
    if (!(tau_c >= 0.0)) throw ConfigError("tau_c must be non-negative");
  }

  friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

/// n_i = sum of the combined probe counts of the rules for category i.
inline CoverageVector raw_coverage(std::span<const std::uint64_t> per_rule_counts, const RuleSet& rule_set) {
  if (per_rule_counts.size() != rule_set.rules.size()) {
    throw DataError("probe result has " + std::to_string(per_rule_counts.size()) + " counts for " +
                    std::to_string(rule_set.rules.size()) + " rules");
  }
  std::vector<double> values(rule_set.categories.size(), 0.0);
  for (std::size_t i = 0; i < per_rule_counts.size(); ++i) {
    values[rule_set.rules[i].category] += static_cast<double>(per_rule_counts[i]);
  }
  return CoverageVector(rule_set.categories, std::move(values), CoverageVector::Kind::raw);
}

inline CoverageVector raw_coverage(const ProbeResult& result, const RuleSet& rule_set) {
  const auto counts = result.counts();
  return raw_coverage(counts, rule_set);
}

struct AdjustedCoverage {
  CoverageVector coverage;
  // Categories whose recall is undefined or zero; they keep the precision-only value.
  std::vector<CategoryIndex> recall_flagged;
  // Rules with no training coverage; their counts are used unscaled.
  std::vector<std::size_t> rules_without_accuracy;
};

/// Scales each rule's count by its training accuracy, then divides each
/// category total by that category's recall.
inline AdjustedCoverage adjust(std::span<const std::uint64_t> per_rule_counts, const RuleSet& rule_set) {
  if (per_rule_counts.size() != rule_set.rules.size()) {
    throw DataError("adjustment needs one count per rule");
  }
  const auto k = rule_set.categories.size();
  AdjustedCoverage out;
  std::vector<double> values(k, 0.0);
  for (std::size_t i = 0; i < per_rule_counts.size(); ++i) {
    const auto& rule = rule_set.rules[i];
    auto accuracy = rule.accuracy();
    if (!accuracy) out.rules_without_accuracy.push_back(i);
    values[rule.category] += static_cast<double>(per_rule_counts[i]) * accuracy.value_or(1.0);
  }
  for (std::size_t c = 0; c < k; ++c) {
    const auto recall = c < rule_set.category_recall.size() ? rule_set.category_recall[c] : std::nullopt;
    if (recall && *recall > 0.0) {
      values[c] /= *recall;
    } else {
      out.recall_flagged.push_back(c);
    }
  }
  out.coverage = CoverageVector(rule_set.categories, std::move(values), CoverageVector::Kind::adjusted);
  return out;
}

/// Fraction of the database in each category. By default |D| is estimated as
/// the sum of the coverage vector; pass `database_size` to divide by a known
/// size instead. Undefined (nullopt) when the divisor is zero.
inline std::optional<std::vector<double>> specificity(const CoverageVector& coverage,
                                                      std::optional<double> database_size = std::nullopt) {
  const double size = database_size.value_or(coverage.total());
  if (!(size > 0.0)) return std::nullopt;
  std::vector<double> out;
  out.reserve(coverage.size());
  for (double n : coverage.values) out.push_back(n / size);
  return out;
}

struct Decisions {
  std::vector<bool> coverage_oriented;
  std::vector<bool> specificity_oriented;

  friend bool operator==(const Decisions&, const Decisions&) = default;
};

/// Assigns category i when coverage >= tau_c, and separately when
/// specificity >= tau_s. A database may land in any number of categories.
inline Decisions classify(const CoverageVector& coverage, const Thresholds& thresholds,
                          std::optional<double> database_size = std::nullopt) {
  thresholds.validate();
  Decisions d;
  const auto spec = specificity(coverage, database_size);
  for (std::size_t i = 0; i < coverage.size(); ++i) {
    d.coverage_oriented.push_back(coverage.values[i] >= thresholds.tau_c);
    d.specificity_oriented.push_back(spec && (*spec)[i] >= thresholds.tau_s);
  }
  return d;
}

inline constexpr std::array<double, 3> kSignificanceLevels{0.95, 0.99, 0.999};

namespace detail {

// Upper-tail critical values of the chi-squared distribution, df = 1..30, at
// the three significance levels above.
inline constexpr double kChiSquaredCritical[30][3] = {
    {3.841459, 6.634897, 10.827566},   {5.991465, 9.21034, 13.815511},    {7.814728, 11.344867, 16.266236},
    {9.487729, 13.276704, 18.466827},  {11.070498, 15.086272, 20.515006}, {12.591587, 16.811894, 22.457744},
    {14.06714, 18.475307, 24.321886},  {15.507313, 20.090235, 26.124482}, {16.918978, 21.665994, 27.877165},
    {18.307038, 23.209251, 29.588298}, {19.675138, 24.72497, 31.264134},  {21.02607, 26.216967, 32.90949},
    {22.362032, 27.68825, 34.528179},  {23.684791, 29.141238, 36.123274}, {24.99579, 30.577914, 37.697298},
    {26.296228, 31.999927, 39.252355}, {27.587112, 33.408664, 40.790217}, {28.869299, 34.805306, 42.312396},
    {30.143527, 36.190869, 43.820196}, {31.410433, 37.566235, 45.314747}, {32.670573, 38.932173, 46.797038},
    {33.924438, 40.28936, 48.267942},  {35.172462, 41.638398, 49.728232}, {36.415029, 42.97982, 51.178598},
    {37.652484, 44.314105, 52.619656}, {38.885139, 45.641683, 54.051962}, {40.113272, 46.962942, 55.47602},
    {41.337138, 48.278236, 56.892285}, {42.556968, 49.587884, 58.301173}, {43.772972, 50.892181, 59.703064},
};

inline constexpr double kStandardNormalQuantile[3] = {1.6448536269514722, 2.3263478740408408, 3.090232306167813};

}  // namespace detail

/// Critical value x with P(X > x) = 1 - level for X ~ chi-squared(df).
/// Tabulated for df <= 30; Wilson-Hilferty approximation beyond.
inline double chi_squared_critical(std::size_t df, std::size_t level_index) {
  if (df == 0) throw std::invalid_argument("chi-squared needs df >= 1");
  if (level_index >= kSignificanceLevels.size()) throw std::out_of_range("significance level index");
  if (df <= 30) return detail::kChiSquaredCritical[df - 1][level_index];
  const double d = static_cast<double>(df);
  const double z = detail::kStandardNormalQuantile[level_index];
  const double t = 1.0 - 2.0 / (9.0 * d) + z * std::sqrt(2.0 / (9.0 * d));
  return d * t * t * t;
}

struct ChiSquared {
  double statistic = 0.0;
  std::size_t df = 0;
  std::array<bool, 3> significant{};  // at kSignificanceLevels

  friend bool operator==(const ChiSquared&, const ChiSquared&) = default;
};

/// Goodness of fit of the coverage vector against a uniform spread over the
/// categories: sum (n_i - e)^2 / e with e = total / k, on k - 1 degrees of freedom.
inline std::optional<ChiSquared> chi_squared_uniform(const CoverageVector& coverage) {
  const auto k = coverage.size();
  const double total = coverage.total();
  if (k < 2 || !(total > 0.0)) return std::nullopt;
  const double expected = total / static_cast<double>(k);
  ChiSquared out;
  for (double n : coverage.values) out.statistic += (n - expected) * (n - expected) / expected;
  out.df = k - 1;
  for (std::size_t i = 0; i < kSignificanceLevels.size(); ++i) {
    out.significant[i] = out.statistic > chi_squared_critical(out.df, i);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct ClassificationReport {
  std::string database_id;
  CoverageVector raw;
  CoverageVector adjusted;
  double estimated_size = 0.0;            // sum of raw coverage
  std::optional<double> exact_size;       // when the true |D| was supplied
  std::optional<std::vector<double>> specificity_raw;
  std::optional<std::vector<double>> specificity_adjusted;
  Thresholds thresholds;
  Decisions decisions_raw;
  Decisions decisions_adjusted;
  std::optional<ChiSquared> chi_squared;  // on the raw vector
  std::vector<CategoryIndex> recall_flagged;
  std::vector<std::size_t> rules_without_accuracy;
  std::vector<std::size_t> unresolved_rules;
  std::vector<std::size_t> clamped_rules;
  std::size_t queries_issued = 0;

  friend bool operator==(const ClassificationReport&, const ClassificationReport&) = default;
};

/// Builds the full report for one probed database. Specificity uses the
/// estimated size unless `exact_size` is given.
inline ClassificationReport build_report(std::string database_id, const RuleSet& rule_set,
                                         const ProbeResult& result, const Thresholds& thresholds,
                                         std::optional<double> exact_size = std::nullopt) {
  thresholds.validate();
  ClassificationReport r;
  r.database_id = std::move(database_id);
  const auto counts = result.counts();
  r.raw = raw_coverage(counts, rule_set);
  auto adjusted = adjust(counts, rule_set);
  r.adjusted = adjusted.coverage;
  r.recall_flagged = adjusted.recall_flagged;
  r.rules_without_accuracy = adjusted.rules_without_accuracy;
  r.estimated_size = r.raw.total();
  r.exact_size = exact_size;
  r.specificity_raw = specificity(r.raw, exact_size);
  r.specificity_adjusted = specificity(r.adjusted, exact_size);
  r.thresholds = thresholds;
  r.decisions_raw = classify(r.raw, thresholds, exact_size);
  r.decisions_adjusted = classify(r.adjusted, thresholds, exact_size);
  r.chi_squared = chi_squared_uniform(r.raw);
  for (const auto& p : result.probes) {
    if (p.unresolved) r.unresolved_rules.push_back(p.rule_index);
    if (p.clamped) r.clamped_rules.push_back(p.rule_index);
  }
  r.queries_issued = result.total_queries;
  return r;
}

}  // namespace qprobe
