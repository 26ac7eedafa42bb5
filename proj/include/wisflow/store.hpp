#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "wisflow/ast.hpp"
#include "wisflow/values.hpp"

namespace wisflow {

enum class StoreErrorKind { NotFound, Schema, Conflict, AuthFailed, Io };

class StoreError : public std::runtime_error {
 public:
  StoreError(StoreErrorKind kind, const std::string& message, std::map<std::string, std::string> fields = {})
      : std::runtime_error(message), kind_(kind), fields_(std::move(fields)) {}

  StoreErrorKind kind() const { return kind_; }
  /// Per-attribute messages for schema violations.
  const std::map<std::string, std::string>& fields() const { return fields_; }

 private:
  StoreErrorKind kind_;
  std::map<std::string, std::string> fields_;
};

using FieldValues = std::map<std::string, ast::Primitive>;
using LinkValues = std::map<std::string, std::vector<std::string>>;

struct InboxMessage {
  std::string instance;
  std::string activity;
  std::string message;

  bool operator==(const InboxMessage&) const = default;
};

struct StoreOptions {
  /// Directory holding `objects/`, `contexts/`, `inbox/` and `order.log`.
  /// Without one the store lives in memory only.
  std::optional<std::filesystem::path> data_dir;
  /// Seed for id generation; random when absent.
  std::optional<std::uint64_t> seed;
  /// Cheapest libsodium parameters, for tests that create many users.
  bool fast_password_hashing = false;
};

class Store;

/// Buffered unit of work. Reads see the transaction's own writes; nothing
/// reaches the store until `commit`. Dropping an uncommitted transaction
/// discards it.
class Transaction {
 public:
  explicit Transaction(Store& store) : store_(&store) {}

  /// Allocates an id for an object of `class_name` that will be created later
  /// in this transaction; other objects may link to it right away.
  std::string reserve_id(std::string_view class_name);

  DomainObject create_object(std::string_view class_name, FieldValues fields, LinkValues links = {},
                             std::string id = {});
  /// Patch semantics: listed fields are replaced (null clears), listed roles
  /// get the given link list, everything else is kept.
  DomainObject update(std::string_view class_name, std::string_view id, FieldValues fields, LinkValues links = {});
  /// Deletes and strips links to the object from every other object.
  void remove(std::string_view class_name, std::string_view id);

  std::optional<DomainObject> find(std::string_view id) const;
  DomainObject load(std::string_view class_name, std::string_view id) const;
  std::vector<DomainObject> load_all(std::string_view class_name) const;

  void deliver(const std::string& user, InboxMessage message);
  void save_context(const ExecutionContext& ctx);
  void delete_context(std::string_view instance_id);
  /// Deletes the context and remembers the instance as completed.
  void finish_context(std::string_view instance_id);

  void commit();

 private:
  const ast::ClassDef& class_def(std::string_view class_name) const;
  void stage(DomainObject object, bool is_new);
  void check_links(const ast::ClassDef& def, LinkValues& links, std::map<std::string, std::string>& errors) const;
  void check_login(const DomainObject& object, std::map<std::string, std::string>& errors) const;
  std::optional<std::string> class_of(std::string_view id) const;

  Store* store_;
  std::map<std::string, std::optional<DomainObject>, std::less<>> objects_;  // nullopt = deleted
  std::vector<std::string> created_;
  std::map<std::string, std::string, std::less<>> reserved_;  // id -> class
  std::map<std::string, std::optional<ExecutionContext>, std::less<>> contexts_;
  std::vector<std::pair<std::string, InboxMessage>> inbox_;
  std::vector<std::string> finished_;
};

/// Document store for domain objects, execution contexts and user inboxes.
/// Writes are serialized; every document is written atomically.
class Store {
 public:
  Store(ast::ClassModel model, StoreOptions options = {});

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  const ast::ClassModel& model() const { return model_; }
  const StoreOptions& options() const { return options_; }

  Transaction begin() { return Transaction(*this); }

  DomainObject create_object(std::string_view class_name, FieldValues fields, LinkValues links = {});
  DomainObject update(std::string_view class_name, std::string_view id, FieldValues fields, LinkValues links = {});
  void remove(std::string_view class_name, std::string_view id);
  DomainObject load(std::string_view class_name, std::string_view id) const;
  std::optional<DomainObject> find(std::string_view id) const;
  /// All objects of a class in creation order.
  std::vector<DomainObject> load_all(std::string_view class_name) const;

  /// Id of the single «user» object with this login and password.
  std::string authenticate(std::string_view login, std::string_view password) const;
  /// Value of the `role` attribute of a user, empty when unset.
  std::string role_of(std::string_view user_id) const;

  std::string new_instance_id();
  void save_context(const ExecutionContext& ctx);
  ExecutionContext load_context(std::string_view instance_id) const;
  void delete_context(std::string_view instance_id);
  /// Live contexts in creation order.
  std::vector<ExecutionContext> live_contexts() const;
  /// True for instances that ran to completion (as opposed to never existing).
  bool was_finished(std::string_view instance_id) const;

  std::vector<InboxMessage> inbox(std::string_view user) const;

  /// Exclusive claim on one instance for the lifetime of the guard.
  class InstanceLock {
   public:
    InstanceLock(InstanceLock&& other) noexcept : store_(other.store_), id_(std::move(other.id_)) { other.store_ = nullptr; }
    InstanceLock& operator=(InstanceLock&&) = delete;
    ~InstanceLock();

   private:
    friend class Store;
    InstanceLock(Store* store, std::string id) : store_(store), id_(std::move(id)) {}
    Store* store_;
    std::string id_;
  };
  /// Throws `StoreError(Conflict)` when another request holds the instance.
  InstanceLock lock_instance(std::string_view instance_id);

 private:
  friend class Transaction;

  std::string fresh_id_locked();
  std::string hash_password(std::string_view password) const;
  void load_from_disk();
  void write_document(const std::filesystem::path& path, const Json& doc) const;
  void remove_document(const std::filesystem::path& path) const;
  void append_order(const std::string& line) const;
  std::filesystem::path object_path(const DomainObject& o) const;
  std::filesystem::path context_path(std::string_view id) const;
  std::filesystem::path inbox_path(std::string_view user) const;
  const DomainObject* find_locked(std::string_view id) const;

  ast::ClassModel model_;
  StoreOptions options_;

  mutable std::shared_mutex mutex_;
  std::mt19937_64 rng_;
  std::map<std::string, DomainObject, std::less<>> objects_;
  std::map<std::string, std::vector<std::string>, std::less<>> class_order_;
  std::map<std::string, ExecutionContext, std::less<>> contexts_;
  std::vector<std::string> context_order_;
  std::map<std::string, std::vector<InboxMessage>, std::less<>> inboxes_;
  std::set<std::string, std::less<>> reserved_ids_;
  std::set<std::string, std::less<>> finished_;

  std::mutex lock_mutex_;
  std::set<std::string, std::less<>> locked_instances_;
};

/// Creates the objects of a seed document in one transaction:
/// `{"objects":[{"class":C,"key":k?,"fields":{..},"links":{role:[k,..]}}]}`.
/// Links name other seed objects by `key`. Returns the number created.
std::size_t load_seed(Store& store, const Json& seed);

}  // namespace wisflow
