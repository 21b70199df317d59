#pragma once

#include <iosfwd>

namespace hdiff::cli {

/// Runs one subcommand. Returns 0 on success, 1 on runtime failure and 2 on
/// usage errors (unknown command, missing or malformed flags).
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hdiff::cli
