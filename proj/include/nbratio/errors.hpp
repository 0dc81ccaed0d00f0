#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nbratio {

// Argument outside the mathematical domain of a function (non-positive shape,
// probability outside (0,1), ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A statistic cannot be formed from the data, e.g. r-hat with a zero
// pre-treatment mean.
class EstimateUndefined : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Negative binomial shape cannot be estimated (all counts zero).
class ShapeInestimable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InconsistentReplicates : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Delta-method variance too large to be represented by a beta distribution.
class MomentMatchInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NegativeEfficacyUnsupported : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Latent correlation outside the range the shared-shock construction supports.
class InfeasibleCorrelation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t row = 0, std::size_t column = 0)
      : std::runtime_error(format(what, row, column)), row_(row), column_(column) {}

  // 1-based; 0 when the error is not tied to a cell.
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t row, std::size_t column) {
    if (row == 0) return what;
    std::string out = "row " + std::to_string(row);
    if (column != 0) out += ", column " + std::to_string(column);
    return out + ": " + what;
  }

  std::size_t row_;
  std::size_t column_;
};

}  // namespace nbratio
