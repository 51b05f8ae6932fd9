#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace uwash {

// Entry point of the `uwash` tool. `args` excludes the program name.
// Returns the process exit code; failures print one line
// "error: <origin>: <message>" to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace uwash
