#pragma once

#include <iosfwd>

namespace squeeze {

// Returns the process exit status: 0 ok, 1 runtime failure, 2 usage error.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace squeeze
