#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qprobe/estimator.hpp"

namespace qprobe {

namespace detail {

inline nlohmann::json names_where(const CategorySet& cats, const std::vector<bool>& flags) {
  auto out = nlohmann::json::array();
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i]) out.push_back(cats.name(i));
  }
  return out;
}

inline std::vector<bool> flags_from_names(const CategorySet& cats, const nlohmann::json& names) {
  std::vector<bool> flags(cats.size(), false);
  for (const auto& n : names) flags[cats.index_of(n.get<std::string>())] = true;
  return flags;
}

inline nlohmann::json optional_vector(const std::optional<std::vector<double>>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::optional<std::vector<double>> optional_vector(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<std::vector<double>>();
}

inline std::string level_key(double level) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%g", level);
  return buf;
}

}  // namespace detail

inline nlohmann::json report_to_json(const ClassificationReport& r) {
  const auto& cats = r.raw.categories;
  nlohmann::json j;
  j["database_id"] = r.database_id;
  j["categories"] = cats.names();
  j["raw"] = r.raw.values;
  j["adjusted"] = r.adjusted.values;
  j["estimated_size"] = r.estimated_size;
  j["exact_size"] = r.exact_size ? nlohmann::json(*r.exact_size) : nlohmann::json(nullptr);
  j["size_mode"] = r.exact_size ? "exact" : "estimated";
  j["specificity"] = {{"raw", detail::optional_vector(r.specificity_raw)},
                      {"adjusted", detail::optional_vector(r.specificity_adjusted)}};
  j["thresholds"] = {{"tau_s", r.thresholds.tau_s}, {"tau_c", r.thresholds.tau_c}};
  j["decisions"] = {
      {"specificity_oriented",
       {{"raw", detail::names_where(cats, r.decisions_raw.specificity_oriented)},
        {"adjusted", detail::names_where(cats, r.decisions_adjusted.specificity_oriented)}}},
      {"coverage_oriented",
       {{"raw", detail::names_where(cats, r.decisions_raw.coverage_oriented)},
        {"adjusted", detail::names_where(cats, r.decisions_adjusted.coverage_oriented)}}}};
  if (r.chi_squared) {
    nlohmann::json sig;
    for (std::size_t i = 0; i < kSignificanceLevels.size(); ++i) {
      sig[detail::level_key(kSignificanceLevels[i])] = r.chi_squared->significant[i];
    }
    j["chi_squared"] = {{"statistic", r.chi_squared->statistic}, {"df", r.chi_squared->df}, {"significance", sig}};
  } else {
    j["chi_squared"] = nullptr;
  }
  std::vector<std::string> flagged;
  for (auto c : r.recall_flagged) flagged.push_back(cats.name(c));
  j["flags"] = {{"recall_undefined_or_zero", flagged},
                {"rules_without_accuracy", r.rules_without_accuracy},
                {"unresolved_rules", r.unresolved_rules},
                {"clamped_rules", r.clamped_rules}};
  j["queries_issued"] = r.queries_issued;
  return j;
}

inline ClassificationReport report_from_json(const nlohmann::json& j) {
  try {
    ClassificationReport r;
    CategorySet cats(j.at("categories").get<std::vector<std::string>>());
    r.database_id = j.at("database_id").get<std::string>();
    r.raw = CoverageVector(cats, j.at("raw").get<std::vector<double>>(), CoverageVector::Kind::raw);
    r.adjusted = CoverageVector(cats, j.at("adjusted").get<std::vector<double>>(), CoverageVector::Kind::adjusted);
    r.estimated_size = j.at("estimated_size").get<double>();
    if (!j.at("exact_size").is_null()) r.exact_size = j["exact_size"].get<double>();
    r.specificity_raw = detail::optional_vector(j.at("specificity").at("raw"));
    r.specificity_adjusted = detail::optional_vector(j.at("specificity").at("adjusted"));
    r.thresholds = {j.at("thresholds").at("tau_s").get<double>(), j.at("thresholds").at("tau_c").get<double>()};
    const auto& d = j.at("decisions");
    r.decisions_raw = {detail::flags_from_names(cats, d.at("coverage_oriented").at("raw")),
                       detail::flags_from_names(cats, d.at("specificity_oriented").at("raw"))};
    r.decisions_adjusted = {detail::flags_from_names(cats, d.at("coverage_oriented").at("adjusted")),
                            detail::flags_from_names(cats, d.at("specificity_oriented").at("adjusted"))};
    if (!j.at("chi_squared").is_null()) {
      const auto& c = j["chi_squared"];
      ChiSquared chi;
      chi.statistic = c.at("statistic").get<double>();
      chi.df = c.at("df").get<std::size_t>();
      for (std::size_t i = 0; i < kSignificanceLevels.size(); ++i) {
        chi.significant[i] = c.at("significance").at(detail::level_key(kSignificanceLevels[i])).get<bool>();
      }
      r.chi_squared = chi;
    }
    const auto& f = j.at("flags");
    for (const auto& name : f.at("recall_undefined_or_zero")) r.recall_flagged.push_back(cats.index_of(name.get<std::string>()));
    r.rules_without_accuracy = f.at("rules_without_accuracy").get<std::vector<std::size_t>>();
    r.unresolved_rules = f.at("unresolved_rules").get<std::vector<std::size_t>>();
    r.clamped_rules = f.at("clamped_rules").get<std::vector<std::size_t>>();
    r.queries_issued = j.at("queries_issued").get<std::size_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

inline void save_report(const ClassificationReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << report_to_json(r).dump(2) << '\n';
}

/// Reads a report file holding one report object or an array of them.
inline std::vector<ClassificationReport> load_reports(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  std::vector<ClassificationReport> out;
  if (j.is_array()) {
    for (const auto& item : j) out.push_back(report_from_json(item));
  } else {
    out.push_back(report_from_json(j));
  }
  return out;
}

enum class TableVector { raw, adjusted };

/// Plain-text summary, one row per database: coverage and specificity for
/// every category, the assigned categories under each scheme, and the
/// chi-squared statistic with its significance stars (*, **, *** for 95%,
/// 99%, 99.9%).
inline std::string render_table(const std::vector<ClassificationReport>& reports, TableVector which = TableVector::raw) {
  if (reports.empty()) return "";
  const auto& cats = reports.front().raw.categories;
  for (const auto& r : reports) {
    if (!(r.raw.categories == cats)) throw DataError("reports in one table must share a category set");
  }

  auto fixed = [](double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return std::string(buf);
  };
  auto join = [](const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
    return out.empty() ? std::string("-") : out;
  };

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"database"};
  for (const auto& name : cats.names()) header.push_back(name);
  const auto& t = reports.front().thresholds;
  header.push_back("spec>=" + fixed(t.tau_s, 2));
  header.push_back("cov>=" + fixed(t.tau_c, 0));
  header.push_back("chi2");
  rows.push_back(header);

  for (const auto& r : reports) {
    const bool raw = which == TableVector::raw;
    const auto& vec = raw ? r.raw : r.adjusted;
    const auto& spec = raw ? r.specificity_raw : r.specificity_adjusted;
    const auto& dec = raw ? r.decisions_raw : r.decisions_adjusted;
    std::vector<std::string> row{r.database_id};
    for (std::size_t i = 0; i < cats.size(); ++i) {
      std::string cell = raw ? fixed(vec.values[i], 0) : fixed(vec.values[i], 2);
      cell += " (" + (spec ? fixed((*spec)[i], 2) : std::string("n/a")) + ")";
      row.push_back(cell);
    }
    std::vector<std::string> s_assigned, c_assigned;
    for (std::size_t i = 0; i < cats.size(); ++i) {
      if (dec.specificity_oriented[i]) s_assigned.push_back(cats.name(i));
      if (dec.coverage_oriented[i]) c_assigned.push_back(cats.name(i));
    }
    row.push_back(join(s_assigned));
    row.push_back(join(c_assigned));
    if (r.chi_squared) {
      std::string stars;
      for (bool s : r.chi_squared->significant) stars += s ? "*" : "";
      row.push_back(fixed(r.chi_squared->statistic, 2) + (stars.empty() ? "" : " " + stars));
    } else {
      row.push_back("n/a");
    }
    if (!r.unresolved_rules.empty()) row.front() += " (!)";
    rows.push_back(row);
  }

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) line += "  ";
      line += row[c];
      if (c + 1 < row.size()) line.append(width[c] - row[c].size(), ' ');
    }
    out << line << '\n';
  }
  return out.str();
}

}  // namespace qprobe
