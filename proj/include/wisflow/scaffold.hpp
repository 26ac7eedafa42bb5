#pragma once

#include <string>
#include <vector>

namespace wisflow {

struct FixtureFile {
  std::string name;
  std::string contents;
};

/// The thesis-grading example project: class, activity, page and
/// application models plus `seed.json` with two Staff users.
const std::vector<FixtureFile>& grade_thesis_fixture();

}  // namespace wisflow
