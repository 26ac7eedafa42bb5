#include "wisflow/project.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "wisflow/parser.hpp"

namespace wisflow {

namespace {

bool is_model_file(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  return ext == ".cd" || ext == ".act" || ext == ".page" || ext == ".app";
}

template <class T>
bool take(Parsed<T>&& parsed, std::vector<Diagnostic>& diags, std::optional<T>& out) {
  diags.insert(diags.end(), parsed.diagnostics.begin(), parsed.diagnostics.end());
  if (!parsed) return false;
  out = std::move(parsed.value);
  return true;
}

Diagnostic project_error(const std::string& file, std::string code, std::string message) {
  return {Severity::Error, {file, 1, 1}, std::move(code), std::move(message)};
}

}  // namespace

Parsed<LinkedSystem> load_project(const std::vector<SourceFile>& files) {
  Parsed<LinkedSystem> result;
  auto& diags = result.diagnostics;
  ModelSet models;
  models.classes.model.name = "Empty";
  bool have_classes = false, have_app = false, parse_failed = false;

  for (const auto& f : files) {
    const auto ext = std::filesystem::path(f.path).extension().string();
    if (ext == ".cd") {
      std::optional<ast::ClassModel> m;
      if (!take(parse_class_model(f.contents, f.path), diags, m)) {
        parse_failed = true;
      } else if (have_classes) {
        diags.push_back(project_error(f.path, "duplicate-model", "more than one class model found; only one .cd file is allowed"));
      } else {
        models.classes = {std::move(*m), f.path};
        have_classes = true;
      }
    } else if (ext == ".act") {
      std::optional<ast::ActivityModel> m;
      if (take(parse_activity(f.contents, f.path), diags, m))
        models.activities.push_back({std::move(*m), f.path});
      else
        parse_failed = true;
    } else if (ext == ".page") {
      std::optional<ast::PageModel> m;
      if (take(parse_page(f.contents, f.path), diags, m))
        models.pages.push_back({std::move(*m), f.path});
      else
        parse_failed = true;
    } else if (ext == ".app") {
      std::optional<ast::AppModel> m;
      if (!take(parse_app(f.contents, f.path), diags, m)) {
        parse_failed = true;
      } else if (have_app) {
        diags.push_back(project_error(f.path, "duplicate-model", "more than one application model found; only one .app file is allowed"));
      } else {
        models.app = {std::move(*m), f.path};
        have_app = true;
      }
    }
  }

  if (!have_app && !parse_failed) diags.push_back(project_error(".", "no-app", "no application model found"));
  if (has_errors(diags)) return result;

  auto linked = link(std::move(models));
  diags.insert(diags.end(), linked.diagnostics.begin(), linked.diagnostics.end());
  result.value = std::move(linked.value);
  return result;
}

std::vector<SourceFile> read_model_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw ProjectIoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec))
    if (entry.is_regular_file() && is_model_file(entry.path())) paths.push_back(entry.path());
  if (ec) throw ProjectIoError("cannot list " + dir.string() + ": " + ec.message());
  std::sort(paths.begin(), paths.end());

  std::vector<SourceFile> files;
  for (const auto& p : paths) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ProjectIoError("cannot read " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw ProjectIoError("cannot read " + p.string());
    files.push_back({p.string(), buf.str()});
  }
  return files;
}

}  // namespace wisflow
