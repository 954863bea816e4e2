#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rbdpipe::cli {

/// Entry point for the command-line surface (compute, bench, simulate,
/// check). Returns the process exit code; all output goes to the given
/// streams so tests can drive it in-process.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rbdpipe::cli
