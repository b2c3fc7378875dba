#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace csb::cli {

// Runs the tool with `args` (args[0] is the program name). Returns the exit
// code: 0 on success, 1 when a stage failed or left items unfinished, 2 on a
// usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace csb::cli
