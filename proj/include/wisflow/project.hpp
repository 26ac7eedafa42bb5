#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "wisflow/diagnostic.hpp"
#include "wisflow/linker.hpp"

namespace wisflow {

struct SourceFile {
  std::string path;
  std::string contents;
};

/// Raised when a model directory or file cannot be read.
class ProjectIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses every `.cd`, `.act`, `.page` and `.app` file and links them.
/// Other files are ignored. Exactly one `.app` is required, at most one `.cd`.
Parsed<LinkedSystem> load_project(const std::vector<SourceFile>& files);

/// Reads the model files of a directory (non-recursive, sorted by name).
std::vector<SourceFile> read_model_dir(const std::filesystem::path& dir);

}  // namespace wisflow
