#pragma once

#include <iosfwd>

namespace visemenet::cli {

/// Runs one invocation. Exit codes: 0 success, 1 runtime failure (one line
/// "error: <category>: <message>" on `err`), 2 bad command line.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace visemenet::cli
