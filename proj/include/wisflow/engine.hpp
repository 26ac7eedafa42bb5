#pragma once

#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wisflow/linker.hpp"
#include "wisflow/store.hpp"
#include "wisflow/values.hpp"

namespace wisflow {

enum class EngineErrorKind {
  NotFound,        // no such activity or instance
  Gone,            // instance already completed
  Forbidden,       // rights rules deny the request
  WrongUser,       // requester not bound to the token's partition
  Validation,      // form, selection or decision input rejected
  ActionFailed,    // a statement failed at runtime
  NotStartable,    // activity has no initial edge
  Conflict,        // instance busy or store conflict
  ScriptExhausted  // simulate ran out of decisions
};

class EngineError : public std::runtime_error {
 public:
  EngineError(EngineErrorKind kind, const std::string& message, std::map<std::string, std::string> fields = {})
      : std::runtime_error(message), kind_(kind), fields_(std::move(fields)) {}

  EngineErrorKind kind() const { return kind_; }
  /// Per-field messages for validation errors.
  const std::map<std::string, std::string>& fields() const { return fields_; }

 private:
  EngineErrorKind kind_;
  std::map<std::string, std::string> fields_;
};

struct Submission {
  std::map<std::string, std::string> form;  // `param.attr` -> text
  std::optional<std::string> decision;
  std::optional<std::string> selection;     // object id picked in a selectable table
};

struct NextStep {
  bool finished = false;
  std::string instance;
  std::string action;       // empty when finished
  std::uint64_t epoch = 0;
  std::vector<std::string> visited;          // actions entered during this call
  std::vector<Notification> notifications;   // emitted during this call

  /// `<instance>-<epoch>`; stale ids from earlier steps no longer match.
  std::string action_id() const { return instance + "-" + std::to_string(epoch); }
};

/// Page of an interactive action resolved against the instance bindings.
struct PageRender {
  std::string instance;
  std::string action;
  std::string page;
  std::uint64_t epoch = 0;
  Json elements = Json::array();
  std::vector<std::string> decisions;
  std::map<std::string, std::string> fields;  // form field -> builtin type name

  Json to_json() const;
};

struct Task {
  std::string instance;
  std::string activity;
  std::string action;
  std::uint64_t epoch = 0;

  bool operator==(const Task&) const = default;
};

/// Rights of the application model, evaluated against the `role` attribute of
/// the requesting user. Without rules, or without any «user» class, everything
/// is allowed.
class Access {
 public:
  Access(const LinkedSystem& system, const Store& store) : system_(&system), store_(&store) {}

  bool open() const;
  bool permits(std::string_view user, const ast::MenuEntry& entry) const;
  bool may_start(std::string_view user, std::string_view activity) const;
  bool may_use_class(std::string_view user, std::string_view class_name) const;
  std::vector<ast::MenuEntry> menu_for(std::string_view user) const;

 private:
  const LinkedSystem* system_;
  const Store* store_;
};

/// Interprets linked activities on top of a store. Every call is atomic: it
/// either commits all of its effects or none.
class Engine {
 public:
  Engine(const LinkedSystem& system, Store& store) : system_(&system), store_(&store) {}

  std::pair<ExecutionContext, NextStep> start_activity(std::string_view activity, const std::string& user);
  /// With `epoch`, a request for an earlier step of the instance is Gone.
  PageRender render_action(std::string_view instance, const std::string& user,
                           std::optional<std::uint64_t> epoch = std::nullopt);
  NextStep submit_action(std::string_view instance, const std::string& user, const Submission& submission,
                         std::optional<std::uint64_t> epoch = std::nullopt);
  /// Live instances waiting for `user`, in creation order.
  std::vector<Task> list_tasks(std::string_view user) const;

  const LinkedSystem& system() const { return *system_; }
  Store& store() const { return *store_; }

 private:
  const LinkedSystem* system_;
  Store* store_;
};

struct StepInput {
  std::optional<std::string> user;  // defaults to the user bound to the partition
  std::map<std::string, std::string> form;
  std::optional<std::string> selection;  // defaults to the first row of a selectable table
};

struct ChoiceScript {
  std::string starter;
  std::map<std::string, StepInput> steps;  // by action name
  std::deque<std::string> decisions;       // consumed whenever options are offered
};

struct SimulationResult {
  std::string instance;
  std::vector<std::string> trace;
  std::vector<Notification> notifications;
};

/// Runs an activity to completion without HTTP, driven by a choice script.
SimulationResult simulate(const LinkedSystem& system, Store& store, std::string_view activity, ChoiceScript script);

}  // namespace wisflow
