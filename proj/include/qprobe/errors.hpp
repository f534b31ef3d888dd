#pragma once

#include <stdexcept>
#include <string>

namespace qprobe {

// Bad configuration or command-line input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (corpora, rule files, snapshots).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A query that the search interface refuses because of its declared capabilities.
class CapabilityError : public std::runtime_error {
 public:
  enum class Reason { negation_unsupported, too_many_terms };

  CapabilityError(Reason reason, std::string query, const std::string& what)
      : std::runtime_error(what), reason_(reason), query_(std::move(query)) {}

  Reason reason() const noexcept { return reason_; }
  const std::string& query() const noexcept { return query_; }

 private:
  Reason reason_;
  std::string query_;
};

// Inclusion-exclusion expansion would need more sub-queries than allowed.
class BudgetExceeded : public std::runtime_error {
 public:
  explicit BudgetExceeded(std::size_t budget)
      : std::runtime_error("decomposition needs more than " + std::to_string(budget) + " sub-queries"),
        budget_(budget) {}

  std::size_t budget() const noexcept { return budget_; }

 private:
  std::size_t budget_;
};

}  // namespace qprobe
