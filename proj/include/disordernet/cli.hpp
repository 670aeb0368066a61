#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dnet::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;       // bad flags or invalid configuration
inline constexpr int kExitData = 3;        // unreadable input, bad manifest or model file
inline constexpr int kExitDivergence = 4;  // training produced non-finite values

// Runs one subcommand: train, eval, crossval, scan, synth or serve.
// args[0] is the program name. Written file paths go to `out`, one per line;
// progress and errors go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dnet::cli
