#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tsal::cli {

/// Runs one command line (args excludes the program name). Tables and
/// results go to `out`; the resolved config and diagnostics go to `err`,
/// errors as "ERROR <code>: message". Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tsal::cli
