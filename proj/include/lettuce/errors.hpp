#pragma once

#include <cstddef>
#include <exception>
#include <optional>
#include <string>
#include <string_view>

namespace lettuce {

/// Base class for every error raised by the toolkit.
///
/// Callers higher up the pipeline may prepend context (scenario index,
/// ensemble member, file name) with add_context() and rethrow the same
/// object, so the concrete type survives propagation.
class Error : public std::exception {
 public:
  explicit Error(std::string message) : message_(std::move(message)) {}

  const char* what() const noexcept override { return message_.c_str(); }

  void add_context(std::string_view context) {
    message_ = std::string(context) + ": " + message_;
  }

 private:
  std::string message_;
};

#define LETTUCE_DEFINE_ERROR(Name)            \
  class Name : public Error {                 \
   public:                                    \
    using Error::Error;                       \
  }

LETTUCE_DEFINE_ERROR(InvalidArgument);
LETTUCE_DEFINE_ERROR(DegenerateDenominator);
LETTUCE_DEFINE_ERROR(InvalidProfile);
LETTUCE_DEFINE_ERROR(ParseError);
LETTUCE_DEFINE_ERROR(NonMonotoneTime);
LETTUCE_DEFINE_ERROR(IrregularPeriod);
LETTUCE_DEFINE_ERROR(IncompatiblePeriods);
LETTUCE_DEFINE_ERROR(InsufficientData);
LETTUCE_DEFINE_ERROR(EmptyBatch);
LETTUCE_DEFINE_ERROR(DivergedLoss);
LETTUCE_DEFINE_ERROR(SchemaMismatch);
LETTUCE_DEFINE_ERROR(TooFewMembers);
LETTUCE_DEFINE_ERROR(LengthMismatch);
LETTUCE_DEFINE_ERROR(IoError);

#undef LETTUCE_DEFINE_ERROR

/// A state left the admissible region (NaN/Inf or a negative quantity that
/// must be nonnegative). Carries the step at which it happened.
class NonFiniteState : public Error {
 public:
  NonFiniteState(std::string message, std::optional<std::size_t> step)
      : Error(step ? "step " + std::to_string(*step) + ": " + message
                   : std::move(message)),
        step_(step) {}

  std::optional<std::size_t> step() const { return step_; }

 private:
  std::optional<std::size_t> step_;
};

}  // namespace lettuce
