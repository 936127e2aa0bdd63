#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pathbench {

/// Entry point of the command-line tool. args excludes the program name.
/// Machine-readable results go to out; errors go to err as one JSON object.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pathbench
