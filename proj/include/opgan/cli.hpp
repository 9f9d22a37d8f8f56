#pragma once

#include <ostream>

namespace opgan::cli {

/// Entry point behind the `opgan` executable. Exit codes: 0 success, 1 a
/// runtime failure reported as "error: <kind>: <message>", 2 a usage error.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace opgan::cli
