#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace plnspatial {

/// Runs one subcommand. 0 on success, 1 on usage or input errors, 2 on numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace plnspatial
