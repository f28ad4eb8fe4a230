#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gdcpd {

// Entry point behind the gdcpd executable: parses the subcommand line and
// runs it, writing normal output to `out` and failures to `err`. Returns the
// process exit code. Exposed as a function so tests can drive the tool
// in-process with captured streams.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace gdcpd
