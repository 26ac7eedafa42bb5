#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wisflow {

enum class Severity { Error, Warning };

struct SourceLocation {
  std::string file;
  int line = 1;
  int column = 1;

  bool operator==(const SourceLocation&) const = default;
};

struct Diagnostic {
  Severity severity = Severity::Error;
  SourceLocation location;
  std::string code;
  std::string message;

  bool operator==(const Diagnostic&) const = default;
};

/// Renders `file:line:col: severity[code]: message`.
std::string format_diagnostic(const Diagnostic& diagnostic);

bool has_errors(std::span<const Diagnostic> diagnostics);

/// Result of a parse or link step: a value on success, diagnostics always.
/// Warnings may accompany a value; any error means no value.
template <class T>
struct Parsed {
  std::optional<T> value;
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return value.has_value(); }
  explicit operator bool() const { return ok(); }
  T& operator*() { return *value; }
  const T& operator*() const { return *value; }
  T* operator->() { return &*value; }
  const T* operator->() const { return &*value; }
};

}  // namespace wisflow
