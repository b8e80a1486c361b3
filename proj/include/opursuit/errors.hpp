#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace opursuit {

/// Invalid options, shapes, or missing inputs.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A decomposition or iteration produced non-finite values or failed to converge.
class NumericalError : public std::runtime_error {
  public:
    explicit NumericalError(const std::string &what, std::ptrdiff_t iteration = -1)
        : std::runtime_error(what), iteration_(iteration) {}

    /// Iteration index at which the failure was detected, or -1.
    std::ptrdiff_t iteration() const noexcept { return iteration_; }

  private:
    std::ptrdiff_t iteration_;
};

/// A structural assumption of an analysis routine does not hold for the input.
class AssumptionError : public std::domain_error {
  public:
    AssumptionError(const std::string &what, double measured)
        : std::domain_error(what), measured_(measured) {}

    double measured() const noexcept { return measured_; }

  private:
    double measured_;
};

/// The dual-certificate construction does not apply (psi >= 1).
class InapplicableError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// File parsing / I/O failure.
class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace opursuit
