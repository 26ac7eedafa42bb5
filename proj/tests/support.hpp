#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "wisflow/diagnostic.hpp"
#include "wisflow/project.hpp"
#include "wisflow/scaffold.hpp"
#include "wisflow/store.hpp"

namespace wisflow::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("wisflow-test-" + std::to_string(std::random_device{}()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string fixture_text(const std::string& name) {
  for (const auto& f : grade_thesis_fixture())
    if (f.name == name) return f.contents;
  throw std::runtime_error("no fixture file " + name);
}

/// GradeThesis model sources, with optional whole-file overrides.
inline std::vector<SourceFile> fixture_sources(const std::map<std::string, std::string>& overrides = {}) {
  std::vector<SourceFile> out;
  for (const auto& f : grade_thesis_fixture()) {
    auto it = overrides.find(f.name);
    out.push_back({f.name, it == overrides.end() ? f.contents : it->second});
  }
  return out;
}

/// Replaces exactly one occurrence of `from` in `text`.
inline std::string replace_once(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  if (pos == std::string::npos || text.find(from, pos + 1) != std::string::npos)
    throw std::runtime_error("mutation anchor not unique: " + from);
  return text.replace(pos, from.size(), to);
}

inline LinkedSystem grade_thesis_system() {
  auto linked = load_project(fixture_sources());
  if (!linked) {
    std::string msg;
    for (const auto& d : linked.diagnostics) msg += format_diagnostic(d) + "\n";
    throw std::runtime_error("fixture does not link:\n" + msg);
  }
  return std::move(*linked.value);
}

/// Store for the fixture with the two seeded referees, ref1 and ref2.
inline std::unique_ptr<Store> seeded_store(const LinkedSystem& system, StoreOptions options = {}) {
  if (!options.seed) options.seed = 7;
  options.fast_password_hashing = true;
  auto store = std::make_unique<Store>(system.class_model(), options);
  if (store->live_contexts().empty() && store->load_all("Staff").empty())
    load_seed(*store, Json::parse(fixture_text("seed.json")));
  return store;
}

inline std::vector<std::string> error_codes(const std::vector<Diagnostic>& diags) {
  std::vector<std::string> codes;
  for (const auto& d : diags)
    if (d.severity == Severity::Error) codes.push_back(d.code);
  return codes;
}

inline std::string dump(const std::vector<Diagnostic>& diags) {
  std::string out;
  for (const auto& d : diags) out += format_diagnostic(d) + "\n";
  return out;
}

}  // namespace wisflow::testing
