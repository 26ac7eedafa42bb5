#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "wisflow/ast.hpp"
#include "wisflow/diagnostic.hpp"

namespace wisflow {

template <class T>
struct Sourced {
  T model;
  std::string file;
};

/// Everything the linker needs: one class model, one application model and
/// any number of activities and pages, each tagged with its source file.
struct ModelSet {
  Sourced<ast::ClassModel> classes;
  std::vector<Sourced<ast::ActivityModel>> activities;
  std::vector<Sourced<ast::PageModel>> pages;
  Sourced<ast::AppModel> app;
};

/// Diagnostic codes emitted by `link`. Errors L001..L010, warnings W001..W004.
namespace link_codes {
inline constexpr const char* kUnknownType = "L001";          // type reference to undeclared class
inline constexpr const char* kBadMember = "L002";            // attribute/role use, scoping, script typing
inline constexpr const char* kBadView = "L003";              // view target or arguments
inline constexpr const char* kUnknownPartition = "L004";     // assignRole partition
inline constexpr const char* kBadMenuEntry = "L005";         // menu/rights target
inline constexpr const char* kPinMismatch = "L006";          // edge pin existence/types
inline constexpr const char* kUnfedInPin = "L007";           // in-pin without incoming edge
inline constexpr const char* kUserClassCredentials = "L008"; // «user» without login/password
inline constexpr const char* kUnpartitioned = "L009";        // interactive action outside partitions
inline constexpr const char* kAutomaticCycle = "L010";       // cycle among automatic actions
inline constexpr const char* kUnreachable = "W001";
inline constexpr const char* kUnusedVar = "W002";
inline constexpr const char* kAutomaticChoice = "W003";      // automatic action followed by a free choice
inline constexpr const char* kNoInitial = "W004";
inline constexpr const char* kDuplicateModel = "duplicate-model";
}  // namespace link_codes

/// Immutable, fully resolved system. All lookups by name are guaranteed to
/// succeed for names that appear in the models.
class LinkedSystem {
 public:
  LinkedSystem() = default;

  const ast::ClassModel& class_model() const { return classes_; }
  const ast::AppModel& app() const { return app_; }
  const std::map<std::string, ast::ActivityModel, std::less<>>& activities() const { return activities_; }
  const std::map<std::string, ast::PageModel, std::less<>>& pages() const { return pages_; }

  const ast::ClassDef* find_class(std::string_view name) const { return classes_.find(name); }
  const ast::ActivityModel* find_activity(std::string_view name) const;
  const ast::PageModel* find_page(std::string_view name) const;

  /// Actions reachable from `initial`, per activity.
  const std::set<std::string>& reachable(std::string_view activity) const;

  /// True when the class model declares at least one «user» class.
  bool has_user_classes() const;

 private:
  friend Parsed<LinkedSystem> link(ModelSet models);

  ast::ClassModel classes_;
  std::map<std::string, ast::ActivityModel, std::less<>> activities_;
  std::map<std::string, ast::PageModel, std::less<>> pages_;
  ast::AppModel app_;
  std::map<std::string, std::set<std::string>, std::less<>> reachable_;
};

Parsed<LinkedSystem> link(ModelSet models);

struct Reachability {
  std::set<std::string> actions;
  std::vector<Diagnostic> warnings;  // one W001 per unreachable action
};

/// Breadth-first walk from `initial` over every edge target.
Reachability reachable_actions(const ast::ActivityModel& activity, std::string_view file = "<input>");

}  // namespace wisflow
