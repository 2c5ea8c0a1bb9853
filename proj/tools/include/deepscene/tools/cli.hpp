#pragma once

#include <iosfwd>

namespace deepscene::tools {

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitConfig = 3, kExitIo = 4 };

/// Entry point of the `deepscene` binary; argv[0] is the program name.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace deepscene::tools
