#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace gsh::cli {

/// Exit codes of every command.
inline constexpr int kOk = 0;
inline constexpr int kVerifyFailed = 1;
inline constexpr int kUsage = 2;

/// Runs the command line `args` (without the program name). `env` replaces
/// the process environment for GSH_* lookups.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const std::map<std::string, std::string>& env);

/// GSH_* variables of the process environment.
std::map<std::string, std::string> process_environment();

}  // namespace gsh::cli
