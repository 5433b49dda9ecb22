#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sasctl {

// Machine-readable error categories. The CLI prints the category name and
// maps each one to a distinct exit code.
enum class ErrorCategory {
  InvalidActuation = 1,
  NotIdentifiable,
  Untunable,
  ScheduleCoverage,
  Synthesis,
  Dimension,
  Config,
  Io,
  Metrics,
  IncompatibleRuns,
};

std::string_view category_name(ErrorCategory c) noexcept;
int exit_code(ErrorCategory c) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace sasctl
