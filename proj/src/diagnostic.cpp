#include "wisflow/diagnostic.hpp"

#include <algorithm>

namespace wisflow {

std::string format_diagnostic(const Diagnostic& d) {
  std::string out = d.location.file;
  out += ':' + std::to_string(d.location.line) + ':' + std::to_string(d.location.column) + ": ";
  out += d.severity == Severity::Error ? "error" : "warning";
  out += '[' + d.code + "]: " + d.message;
  return out;
}

bool has_errors(std::span<const Diagnostic> diagnostics) {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

}  // namespace wisflow
