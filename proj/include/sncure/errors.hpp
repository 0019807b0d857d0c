#pragma once

#include <stdexcept>
#include <string>

namespace sncure {

/// Base class for all library errors. `name()` is the stable error
/// identifier surfaced by the CLI (e.g. "DegenerateDenominator").
class Error : public std::runtime_error {
  public:
    Error(std::string name, const std::string& what)
        : std::runtime_error(name + ": " + what), name_(std::move(name)), detail_(what) {}

    const std::string& name() const noexcept { return name_; }
    /// Message without the name prefix.
    const std::string& detail() const noexcept { return detail_; }

  private:
    std::string name_;
    std::string detail_;
};

/// Invalid arguments or data shapes supplied by a caller.
class UsageError : public Error {
  public:
    using Error::Error;
};

/// Failures of an estimating equation or a regression design. These are
/// the errors bootstrap replicates may retry on.
class NumericalError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    explicit IoError(const std::string& what) : Error("IoError", what) {}
};

class ValidationError : public Error {
  public:
    explicit ValidationError(const std::string& what) : Error("ValidationError", what) {}
};

inline NumericalError degenerate_design(const std::string& what) {
    return NumericalError("DegenerateDesign", what);
}

inline NumericalError degenerate_denominator(const std::string& what) {
    return NumericalError("DegenerateDenominator", what);
}

}  // namespace sncure
