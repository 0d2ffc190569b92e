#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace crs::app {

/// Exit codes: 0 success, 1 input error (bad flags, unreadable or malformed
/// inputs, duplicate ids), 2 internal error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace crs::app
