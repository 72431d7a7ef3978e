#pragma once

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfx::cli {

// A prerequisite artifact is missing; the message names the producing command.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode { kOk = 0, kConfigError = 2, kMissingPrerequisite = 3, kRuntimeFailure = 4 };

// Entry point shared by the executable and in-process callers. `args`
// excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cfx::cli
