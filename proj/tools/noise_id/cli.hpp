#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace noiseid::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kValidation = 2,
  kCapability = 3,
  kSearchExhausted = 4,
};

/// Runs `noise-id` with argv-style arguments (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace noiseid::cli
