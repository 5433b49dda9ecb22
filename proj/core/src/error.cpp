#include "sasctl/error.hpp"

namespace sasctl {

std::string_view category_name(ErrorCategory c) noexcept {
  switch (c) {
    case ErrorCategory::InvalidActuation: return "invalid-actuation";
    case ErrorCategory::NotIdentifiable: return "not-identifiable";
    case ErrorCategory::Untunable: return "untunable";
    case ErrorCategory::ScheduleCoverage: return "schedule-coverage";
    case ErrorCategory::Synthesis: return "synthesis";
    case ErrorCategory::Dimension: return "dimension";
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Metrics: return "metrics";
    case ErrorCategory::IncompatibleRuns: return "incompatible-runs";
  }
  return "unknown";
}

int exit_code(ErrorCategory c) noexcept { return 10 + static_cast<int>(c); }

}  // namespace sasctl
