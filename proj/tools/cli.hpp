#pragma once

#include <iosfwd>

namespace xpir::cli {

// Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics are one
// line each on `err`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace xpir::cli
