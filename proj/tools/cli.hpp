#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ivnmix::cli {

/// Runs the command line `args` (without the program name). Returns 0 on
/// success, 1 on a usage error and 2 on a runtime error.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ivnmix::cli
