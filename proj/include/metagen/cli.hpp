#pragma once

#include <iosfwd>

namespace metagen {

// Entry point of the `metagen` command; returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace metagen
