#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace marginfilter {

// Runs one command line (program name excluded). Returns the process exit
// status; diagnostics and usage go to `err`, reports to `out`.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_dispatch(int argc, const char* const* argv);

}  // namespace marginfilter
