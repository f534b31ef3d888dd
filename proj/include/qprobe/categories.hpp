#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "qprobe/errors.hpp"

namespace qprobe {

using CategoryIndex = std::size_t;

/// Ordered, fixed list of category labels. Indices into it are stable for the
/// lifetime of every vector keyed by category.
class CategorySet {
 public:
  CategorySet() = default;

  explicit CategorySet(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() < 2) {
      throw DataError("a category set needs at least two categories, got " +
                      std::to_string(names_.size()));
    }
    std::unordered_set<std::string> seen;
    for (const auto& name : names_) {
      if (name.empty()) throw DataError("category labels must be non-empty");
      if (name.find_first_of(" \t\r\n") != std::string::npos) {
        throw DataError("category label contains whitespace: '" + name + "'");
      }
      if (!seen.insert(name).second) throw DataError("duplicate category label '" + name + "'");
    }
  }

  std::size_t size() const noexcept { return names_.size(); }
  bool empty() const noexcept { return names_.empty(); }
  const std::string& name(CategoryIndex i) const { return names_.at(i); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  std::optional<CategoryIndex> find(std::string_view label) const {
    auto it = std::find(names_.begin(), names_.end(), label);
    if (it == names_.end()) return std::nullopt;
    return static_cast<CategoryIndex>(it - names_.begin());
  }

  CategoryIndex index_of(std::string_view label) const {
    if (auto i = find(label)) return *i;
    throw DataError("unknown category label '" + std::string(label) + "'");
  }

  friend bool operator==(const CategorySet&, const CategorySet&) = default;

 private:
  std::vector<std::string> names_;
};

/// Per-category document counts. Raw vectors come straight from match counts
/// and hold integers; adjusted vectors are real-valued.
struct CoverageVector {
  enum class Kind { raw, adjusted };

  CategorySet categories;
  std::vector<double> values;
  Kind kind = Kind::raw;

  CoverageVector() = default;
  CoverageVector(CategorySet cats, std::vector<double> vals, Kind k = Kind::raw)
      : categories(std::move(cats)), values(std::move(vals)), kind(k) {
    if (values.size() != categories.size()) {
      throw DataError("coverage vector has " + std::to_string(values.size()) +
                      " entries for " + std::to_string(categories.size()) + " categories");
    }
    for (double v : values) {
      if (!(v >= 0.0)) throw DataError("coverage entries must be non-negative");
      if (kind == Kind::raw && v != std::floor(v)) {
        throw DataError("raw coverage entries must be integers");
      }
    }
  }

  static CoverageVector zeros(const CategorySet& cats, Kind k = Kind::raw) {
    return CoverageVector(cats, std::vector<double>(cats.size(), 0.0), k);
  }

  std::size_t size() const noexcept { return values.size(); }
  double operator[](CategoryIndex i) const { return values.at(i); }

  double total() const {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum;
  }

  friend bool operator==(const CoverageVector&, const CoverageVector&) = default;
};

inline const char* to_string(CoverageVector::Kind kind) {
  return kind == CoverageVector::Kind::raw ? "raw" : "adjusted";
}

}  // namespace qprobe
