#pragma once

#include <iosfwd>

namespace ocsvdd {

// Exit codes: 0 success, 1 usage or configuration error, 2 data or numeric error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ocsvdd
