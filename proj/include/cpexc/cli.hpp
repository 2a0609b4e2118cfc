#pragma once

// Command-line front end. `args` excludes the program name. Returns the
// process exit code: 0 when every check row passes, 1 when any fails, 2 on
// usage, configuration or I/O errors.

#include <iosfwd>
#include <string>
#include <vector>

namespace cpexc {

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cpexc
