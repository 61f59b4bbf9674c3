#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace plcrnn::cli {

// Stable process exit codes.
enum ExitCode : int {
    kExitOk = 0,
    kExitOther = 1,
    kExitUsage = 2,     // bad flags, bad config, invalid input
    kExitNumeric = 3,   // non-finite loss or gradient during training
    kExitArtifact = 4,  // checkpoint unreadable or not the requested structure
};

/// Runs one command line (argv[0] is the program name) and returns the exit
/// code. Normal output goes to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Convenience overload; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Every long flag (with leading "--") accepted by a subcommand, for checking
/// that --help documents them all.
std::vector<std::string> subcommand_flags(const std::string& subcommand);

/// Names of all subcommands.
std::vector<std::string> subcommand_names();

}  // namespace plcrnn::cli
