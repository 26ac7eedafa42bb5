#include "wisflow/store.hpp"

#include <sodium.h>

#include <algorithm>
#include <fstream>

namespace wisflow {

namespace fs = std::filesystem;

namespace {

const char kIdAlphabet[] = "0123456789abcdefghijklmnopqrstuvwxyz";
constexpr int kIdLength = 5;

std::string error_summary(std::string_view class_name, const std::map<std::string, std::string>& errors) {
  std::string msg = "invalid " + std::string(class_name) + ":";
  for (const auto& [field, text] : errors) msg += " " + field + ": " + text + ";";
  msg.pop_back();
  return msg;
}

StoreError not_found(std::string_view class_name, std::string_view id) {
  return StoreError(StoreErrorKind::NotFound, "no " + std::string(class_name) + " with id '" + std::string(id) + "'");
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw StoreError(StoreErrorKind::Io, "cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw StoreError(StoreErrorKind::Io, "corrupt document " + path.string() + ": " + e.what());
  }
}

const ast::Primitive* field_of(const DomainObject& o, std::string_view name) {
  auto it = o.fields.find(std::string(name));
  return it == o.fields.end() ? nullptr : &it->second;
}

}  // namespace

// ---------------------------------------------------------------- Transaction

const ast::ClassDef& Transaction::class_def(std::string_view class_name) const {
  const auto* def = store_->model_.find(class_name);
  if (!def) throw StoreError(StoreErrorKind::NotFound, "unknown class '" + std::string(class_name) + "'");
  return *def;
}

std::optional<std::string> Transaction::class_of(std::string_view id) const {
  if (auto it = objects_.find(id); it != objects_.end()) {
    if (it->second) return it->second->class_name;
    return std::nullopt;
  }
  if (auto it = reserved_.find(id); it != reserved_.end()) return it->second;
  std::shared_lock lock(store_->mutex_);
  if (const auto* o = store_->find_locked(id)) return o->class_name;
  return std::nullopt;
}

std::string Transaction::reserve_id(std::string_view class_name) {
  class_def(class_name);
  std::unique_lock lock(store_->mutex_);
  auto id = store_->fresh_id_locked();
  reserved_[id] = std::string(class_name);
  return id;
}

void Transaction::check_links(const ast::ClassDef& def, LinkValues& links,
                              std::map<std::string, std::string>& errors) const {
  for (auto& [role, ids] : links) {
    const auto* assoc = def.find_association(role);
    if (!assoc) {
      errors[role] = "unknown role";
      continue;
    }
    if (assoc->multiplicity == ast::Multiplicity::One && ids.size() > 1) {
      errors[role] = "at most one link allowed";
      continue;
    }
    std::set<std::string> seen;
    for (const auto& id : ids) {
      if (!seen.insert(id).second) {
        errors[role] = "duplicate link to '" + id + "'";
        break;
      }
      if (class_of(id) != assoc->target) {
        errors[role] = "no " + assoc->target + " object with id '" + id + "'";
        break;
      }
    }
  }
}

void Transaction::check_login(const DomainObject& object, std::map<std::string, std::string>& errors) const {
  const auto* login = field_of(object, "login");
  if (!login || !std::holds_alternative<std::string>(*login)) return;
  for (const auto& c : store_->model_.classes) {
    if (!c.is_user) continue;
    for (const auto& other : load_all(c.name)) {
      if (other.id == object.id) continue;
      if (const auto* l = field_of(other, "login"); l && *l == *login) {
        errors["login"] = "login already taken";
        return;
      }
    }
  }
}

void Transaction::stage(DomainObject object, bool is_new) {
  if (is_new) created_.push_back(object.id);
  reserved_.erase(object.id);
  auto id = object.id;
  objects_[id] = std::move(object);
}

DomainObject Transaction::create_object(std::string_view class_name, FieldValues fields, LinkValues links,
                                        std::string id) {
  const auto& def = class_def(class_name);
  std::map<std::string, std::string> errors;
  DomainObject object{def.name, {}, {}, {}};
  for (auto& [name, value] : fields) {
    const auto* attr = def.find_attribute(name);
    if (!attr) {
      errors[name] = "unknown attribute";
      continue;
    }
    if (auto msg = check_builtin(attr->type, value); !msg.empty()) {
      errors[name] = msg;
      continue;
    }
    if (!std::holds_alternative<std::monostate>(value)) object.fields[name] = value;
  }
  check_links(def, links, errors);
  for (auto& [role, ids] : links)
    if (!ids.empty()) object.links[role] = ids;
  if (def.is_user) check_login(object, errors);
  if (!errors.empty()) throw StoreError(StoreErrorKind::Schema, error_summary(class_name, errors), errors);

  if (def.is_user) {
    if (auto it = object.fields.find("password"); it != object.fields.end())
      it->second = store_->hash_password(std::get<std::string>(it->second));
  }
  if (id.empty()) {
    id = reserve_id(class_name);
  } else if (auto it = reserved_.find(id); it == reserved_.end() || it->second != def.name) {
    throw std::logic_error("id '" + id + "' was not reserved for " + def.name);
  }
  object.id = id;
  stage(object, true);
  return object;
}

DomainObject Transaction::update(std::string_view class_name, std::string_view id, FieldValues fields,
                                 LinkValues links) {
  const auto& def = class_def(class_name);
  DomainObject object = load(class_name, id);
  const DomainObject before = object;
  std::map<std::string, std::string> errors;
  for (auto& [name, value] : fields) {
    const auto* attr = def.find_attribute(name);
    if (!attr) {
      errors[name] = "unknown attribute";
      continue;
    }
    if (auto msg = check_builtin(attr->type, value); !msg.empty()) {
      errors[name] = msg;
      continue;
    }
    if (std::holds_alternative<std::monostate>(value)) {
      object.fields.erase(name);
    } else if (def.is_user && name == "password") {
      const auto* old = field_of(before, "password");
      object.fields[name] = old && *old == value ? value : ast::Primitive(store_->hash_password(std::get<std::string>(value)));
    } else {
      object.fields[name] = value;
    }
  }
  check_links(def, links, errors);
  for (auto& [role, ids] : links) {
    if (ids.empty()) {
      object.links.erase(role);
    } else {
      object.links[role] = ids;
    }
  }
  if (def.is_user) check_login(object, errors);
  if (!errors.empty()) throw StoreError(StoreErrorKind::Schema, error_summary(class_name, errors), errors);
  stage(object, false);
  return object;
}

void Transaction::remove(std::string_view class_name, std::string_view id) {
  load(class_name, id);
  objects_[std::string(id)] = std::nullopt;
  for (const auto& c : store_->model_.classes) {
    for (auto other : load_all(c.name)) {
      bool changed = false;
      for (auto it = other.links.begin(); it != other.links.end();) {
        auto& ids = it->second;
        const auto old = ids.size();
        ids.erase(std::remove(ids.begin(), ids.end(), id), ids.end());
        changed |= ids.size() != old;
        it = ids.empty() ? other.links.erase(it) : std::next(it);
      }
      if (changed) stage(std::move(other), false);
    }
  }
}

std::optional<DomainObject> Transaction::find(std::string_view id) const {
  if (auto it = objects_.find(id); it != objects_.end()) return it->second;
  return store_->find(id);
}

DomainObject Transaction::load(std::string_view class_name, std::string_view id) const {
  class_def(class_name);
  auto found = find(id);
  if (!found || found->class_name != class_name) throw not_found(class_name, id);
  return *found;
}

std::vector<DomainObject> Transaction::load_all(std::string_view class_name) const {
  class_def(class_name);
  std::vector<DomainObject> out;
  {
    std::shared_lock lock(store_->mutex_);
    if (auto it = store_->class_order_.find(class_name); it != store_->class_order_.end()) {
      for (const auto& id : it->second) {
        if (auto staged = objects_.find(id); staged != objects_.end()) {
          if (staged->second) out.push_back(*staged->second);
        } else {
          out.push_back(store_->objects_.at(id));
        }
      }
    }
  }
  for (const auto& id : created_) {
    const auto& staged = objects_.at(id);
    if (staged && staged->class_name == class_name) out.push_back(*staged);
  }
  return out;
}

void Transaction::deliver(const std::string& user, InboxMessage message) { inbox_.emplace_back(user, std::move(message)); }

void Transaction::save_context(const ExecutionContext& ctx) { contexts_[ctx.instance_id] = ctx; }

void Transaction::delete_context(std::string_view instance_id) { contexts_[std::string(instance_id)] = std::nullopt; }

void Transaction::finish_context(std::string_view instance_id) {
  delete_context(instance_id);
  finished_.emplace_back(instance_id);
}

void Transaction::commit() {
  std::unique_lock lock(store_->mutex_);
  Store& s = *store_;

  // Another transaction may have deleted a link target since it was checked.
  auto exists = [&](const std::string& id, const std::string& cls) {
    if (auto it = objects_.find(id); it != objects_.end()) return it->second && it->second->class_name == cls;
    const auto* o = s.find_locked(id);
    return o && o->class_name == cls;
  };
  for (const auto& [id, staged] : objects_) {
    if (!staged) continue;
    const auto* def = s.model_.find(staged->class_name);
    for (const auto& [role, ids] : staged->links) {
      const auto& target = def->find_association(role)->target;
      for (const auto& t : ids)
        if (!exists(t, target))
          throw StoreError(StoreErrorKind::Conflict, "linked object '" + t + "' was removed concurrently");
    }
  }

  const std::set<std::string> created(created_.begin(), created_.end());
  for (auto& [id, staged] : objects_) {
    if (!staged) {
      auto it = s.objects_.find(id);
      if (it == s.objects_.end()) continue;
      auto& order = s.class_order_[it->second.class_name];
      order.erase(std::remove(order.begin(), order.end(), id), order.end());
      s.remove_document(s.object_path(it->second));
      s.objects_.erase(it);
      continue;
    }
    s.write_document(s.object_path(*staged), to_json(*staged));
    if (created.count(id)) {
      s.class_order_[staged->class_name].push_back(id);
      s.append_order("object " + id);
    }
    s.reserved_ids_.erase(id);
    s.objects_[id] = *staged;
  }
  for (auto& [id, ctx] : contexts_) {
    if (!ctx) {
      if (s.contexts_.erase(id)) {
        s.context_order_.erase(std::remove(s.context_order_.begin(), s.context_order_.end(), id),
                               s.context_order_.end());
        s.remove_document(s.context_path(id));
      }
      continue;
    }
    s.write_document(s.context_path(id), to_json(*ctx));
    if (!s.contexts_.count(id)) {
      s.context_order_.push_back(id);
      s.append_order("context " + id);
    }
    s.reserved_ids_.erase(id);
    s.contexts_[id] = *ctx;
  }
  for (const auto& id : finished_) {
    if (s.finished_.insert(id).second) s.append_order("finished " + id);
  }
  std::set<std::string> touched;
  for (auto& [user, msg] : inbox_) {
    s.inboxes_[user].push_back(std::move(msg));
    touched.insert(user);
  }
  for (const auto& user : touched) {
    Json doc = Json::array();
    for (const auto& m : s.inboxes_[user])
      doc.push_back({{"instance", m.instance}, {"activity", m.activity}, {"message", m.message}});
    s.write_document(s.inbox_path(user), doc);
  }
  objects_.clear();
  created_.clear();
  contexts_.clear();
  inbox_.clear();
  finished_.clear();
}

// ---------------------------------------------------------------- Store

Store::Store(ast::ClassModel model, StoreOptions options) : model_(std::move(model)), options_(std::move(options)) {
  if (sodium_init() < 0) throw std::runtime_error("libsodium failed to initialize");
  rng_.seed(options_.seed ? *options_.seed : std::random_device{}());
  if (options_.data_dir) load_from_disk();
}

DomainObject Store::create_object(std::string_view class_name, FieldValues fields, LinkValues links) {
  auto t = begin();
  auto o = t.create_object(class_name, std::move(fields), std::move(links));
  t.commit();
  return o;
}

DomainObject Store::update(std::string_view class_name, std::string_view id, FieldValues fields, LinkValues links) {
  auto t = begin();
  auto o = t.update(class_name, id, std::move(fields), std::move(links));
  t.commit();
  return o;
}

void Store::remove(std::string_view class_name, std::string_view id) {
  auto t = begin();
  t.remove(class_name, id);
  t.commit();
}

DomainObject Store::load(std::string_view class_name, std::string_view id) const {
  return Transaction(const_cast<Store&>(*this)).load(class_name, id);
}

std::optional<DomainObject> Store::find(std::string_view id) const {
  std::shared_lock lock(mutex_);
  if (const auto* o = find_locked(id)) return *o;
  return std::nullopt;
}

std::vector<DomainObject> Store::load_all(std::string_view class_name) const {
  return Transaction(const_cast<Store&>(*this)).load_all(class_name);
}

const DomainObject* Store::find_locked(std::string_view id) const {
  auto it = objects_.find(id);
  return it == objects_.end() ? nullptr : &it->second;
}

std::string Store::authenticate(std::string_view login, std::string_view password) const {
  std::shared_lock lock(mutex_);
  for (const auto& [id, o] : objects_) {
    if (!model_.find(o.class_name)->is_user) continue;
    const auto* l = field_of(o, "login");
    const auto* p = field_of(o, "password");
    if (!l || !p || *l != ast::Primitive(std::string(login)) || !std::holds_alternative<std::string>(*p)) continue;
    const auto& hash = std::get<std::string>(*p);
    if (crypto_pwhash_str_verify(hash.c_str(), password.data(), password.size()) == 0) return id;
  }
  throw StoreError(StoreErrorKind::AuthFailed, "invalid login or password");
}

std::string Store::role_of(std::string_view user_id) const {
  std::shared_lock lock(mutex_);
  const auto* o = find_locked(user_id);
  if (!o) return {};
  const auto* r = field_of(*o, "role");
  return r && std::holds_alternative<std::string>(*r) ? std::get<std::string>(*r) : std::string();
}

std::string Store::new_instance_id() {
  std::unique_lock lock(mutex_);
  return fresh_id_locked();
}

void Store::save_context(const ExecutionContext& ctx) {
  auto t = begin();
  t.save_context(ctx);
  t.commit();
}

ExecutionContext Store::load_context(std::string_view instance_id) const {
  std::shared_lock lock(mutex_);
  auto it = contexts_.find(instance_id);
  if (it == contexts_.end())
    throw StoreError(StoreErrorKind::NotFound, "no activity instance '" + std::string(instance_id) + "'");
  return it->second;
}

void Store::delete_context(std::string_view instance_id) {
  load_context(instance_id);
  auto t = begin();
  t.delete_context(instance_id);
  t.commit();
}

std::vector<ExecutionContext> Store::live_contexts() const {
  std::shared_lock lock(mutex_);
  std::vector<ExecutionContext> out;
  for (const auto& id : context_order_) out.push_back(contexts_.at(id));
  return out;
}

bool Store::was_finished(std::string_view instance_id) const {
  std::shared_lock lock(mutex_);
  return finished_.count(instance_id) > 0;
}

std::vector<InboxMessage> Store::inbox(std::string_view user) const {
  std::shared_lock lock(mutex_);
  auto it = inboxes_.find(user);
  return it == inboxes_.end() ? std::vector<InboxMessage>{} : it->second;
}

Store::InstanceLock::~InstanceLock() {
  if (!store_) return;
  std::lock_guard lock(store_->lock_mutex_);
  store_->locked_instances_.erase(id_);
}

Store::InstanceLock Store::lock_instance(std::string_view instance_id) {
  std::lock_guard lock(lock_mutex_);
  if (!locked_instances_.insert(std::string(instance_id)).second)
    throw StoreError(StoreErrorKind::Conflict, "instance '" + std::string(instance_id) + "' is busy");
  return InstanceLock(this, std::string(instance_id));
}

std::string Store::fresh_id_locked() {
  std::uniform_int_distribution<int> digit(0, 35);
  for (;;) {
    std::string id(kIdLength, '0');
    for (auto& c : id) c = kIdAlphabet[digit(rng_)];
    if (objects_.count(id) || contexts_.count(id) || reserved_ids_.count(id) || finished_.count(id)) continue;
    reserved_ids_.insert(id);
    return id;
  }
}

std::string Store::hash_password(std::string_view password) const {
  char out[crypto_pwhash_STRBYTES];
  const auto ops = options_.fast_password_hashing ? crypto_pwhash_OPSLIMIT_MIN : crypto_pwhash_OPSLIMIT_INTERACTIVE;
  const auto mem = options_.fast_password_hashing ? crypto_pwhash_MEMLIMIT_MIN : crypto_pwhash_MEMLIMIT_INTERACTIVE;
  if (crypto_pwhash_str(out, password.data(), password.size(), ops, mem) != 0)
    throw std::runtime_error("password hashing ran out of memory");
  return out;
}

fs::path Store::object_path(const DomainObject& o) const {
  if (!options_.data_dir) return {};
  return *options_.data_dir / "objects" / o.class_name / (o.id + ".json");
}

fs::path Store::context_path(std::string_view id) const {
  if (!options_.data_dir) return {};
  return *options_.data_dir / "contexts" / (std::string(id) + ".json");
}

fs::path Store::inbox_path(std::string_view user) const {
  if (!options_.data_dir) return {};
  return *options_.data_dir / "inbox" / (std::string(user) + ".json");
}

void Store::write_document(const fs::path& path, const Json& doc) const {
  if (!options_.data_dir) return;
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << doc.dump(2) << '\n';
    if (!out) throw StoreError(StoreErrorKind::Io, "cannot write " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw StoreError(StoreErrorKind::Io, "cannot replace " + path.string() + ": " + ec.message());
}

void Store::remove_document(const fs::path& path) const {
  if (!options_.data_dir) return;
  std::error_code ec;
  fs::remove(path, ec);
}

void Store::append_order(const std::string& line) const {
  if (!options_.data_dir) return;
  std::ofstream out(*options_.data_dir / "order.log", std::ios::app);
  out << line << '\n';
  if (!out) throw StoreError(StoreErrorKind::Io, "cannot append to order.log");
}

void Store::load_from_disk() {
  const fs::path& root = *options_.data_dir;
  std::error_code ec;
  for (const char* sub : {"objects", "contexts", "inbox"}) {
    fs::create_directories(root / sub, ec);
    if (ec) throw StoreError(StoreErrorKind::Io, "cannot create " + (root / sub).string() + ": " + ec.message());
  }

  // Creation order survives restarts through an append-only log. Documents
  // missing from it (copied in by hand) sort after logged ones by id.
  std::map<std::string, std::size_t> position;
  {
    std::ifstream log(root / "order.log");
    std::string kind, id;
    for (std::size_t n = 0; log >> kind >> id; ++n) {
      if (kind == "finished") {
        finished_.insert(id);
      } else {
        position.emplace(id, n);
      }
    }
  }
  auto by_position = [&](const std::string& a, const std::string& b) {
    auto pa = position.find(a), pb = position.find(b);
    const auto na = pa == position.end() ? position.size() : pa->second;
    const auto nb = pb == position.end() ? position.size() : pb->second;
    return na != nb ? na < nb : a < b;
  };

  for (const auto& dir : fs::directory_iterator(root / "objects")) {
    if (!dir.is_directory()) continue;
    const auto class_name = dir.path().filename().string();
    const auto* def = model_.find(class_name);
    if (!def) throw StoreError(StoreErrorKind::Io, "stored objects of unknown class '" + class_name + "'");
    auto& order = class_order_[class_name];
    for (const auto& file : fs::directory_iterator(dir.path())) {
      if (file.path().extension() != ".json") continue;
      DomainObject o;
      try {
        o = object_from_json(read_json(file.path()));
      } catch (const StoreError&) {
        throw;
      } catch (const std::exception& e) {
        throw StoreError(StoreErrorKind::Io, "malformed object " + file.path().string() + ": " + e.what());
      }
      for (auto& [name, value] : o.fields)
        if (const auto* attr = def->find_attribute(name)) check_builtin(attr->type, value);
      order.push_back(o.id);
      objects_[o.id] = std::move(o);
    }
    std::sort(order.begin(), order.end(), by_position);
  }
  for (const auto& file : fs::directory_iterator(root / "contexts")) {
    if (file.path().extension() != ".json") continue;
    try {
      auto ctx = context_from_json(read_json(file.path()));
      context_order_.push_back(ctx.instance_id);
      contexts_[ctx.instance_id] = std::move(ctx);
    } catch (const StoreError&) {
      throw;
    } catch (const std::exception& e) {
      throw StoreError(StoreErrorKind::Io, "malformed context " + file.path().string() + ": " + e.what());
    }
  }
  std::sort(context_order_.begin(), context_order_.end(), by_position);
  for (const auto& file : fs::directory_iterator(root / "inbox")) {
    if (file.path().extension() != ".json") continue;
    auto& box = inboxes_[file.path().stem().string()];
    for (const auto& m : read_json(file.path()))
      box.push_back({m.at("instance").get<std::string>(), m.at("activity").get<std::string>(),
                     m.at("message").get<std::string>()});
  }
}

}  // namespace wisflow

namespace wisflow {

std::size_t load_seed(Store& store, const Json& seed) {
  const Json& objects = seed.at("objects");
  auto txn = store.begin();
  std::map<std::string, std::string> ids;
  std::vector<std::string> reserved;
  for (const auto& o : objects) {
    reserved.push_back(txn.reserve_id(o.at("class").get<std::string>()));
    if (o.contains("key")) ids[o.at("key").get<std::string>()] = reserved.back();
  }
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const Json& o = objects[i];
    const Json field_doc = o.value("fields", Json::object());
    const Json link_doc = o.value("links", Json::object());
    FieldValues fields;
    for (const auto& [k, v] : field_doc.items()) fields[k] = primitive_from_json(v);
    LinkValues links;
    for (const auto& [role, keys] : link_doc.items()) {
      for (const auto& key : keys) {
        auto it = ids.find(key.get<std::string>());
        if (it == ids.end())
          throw StoreError(StoreErrorKind::Schema, "seed link to unknown key '" + key.get<std::string>() + "'");
        links[role].push_back(it->second);
      }
    }
    txn.create_object(o.at("class").get<std::string>(), std::move(fields), std::move(links), reserved[i]);
  }
  txn.commit();
  return objects.size();
}

}  // namespace wisflow
