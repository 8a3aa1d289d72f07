#pragma once

#include <stdexcept>
#include <string>

namespace kmt {

/// Input outside an operation's domain (parity violations, infeasible endpoints, p outside (0,1)).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical estimate could not be produced (quadrature non-convergence, overflow).
class EstimationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A simulation exceeded its safety budget before completing.
class RareEventError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw DomainError(message);
}

}  // namespace detail
}  // namespace kmt
