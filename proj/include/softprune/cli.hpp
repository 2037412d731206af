#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "softprune/config.hpp"

namespace softprune {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitIo = 3,
  kExitVerifyMismatch = 4,
  kExitNumeric = 5,
};

/// Environment variable consulted for the default `seed`.
inline constexpr const char* kSeedEnv = "SOFTPRUNE_SEED";

/// Keys and defaults accepted by a subcommand.
std::map<std::string, std::string> config_schema(const std::string& subcommand);

/// `args` excludes the program name. Artifacts go to `out` unless an output
/// path is configured; the resolved config and errors go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace softprune
