#pragma once
// The gpvae command-line tool as a library, so it can run in-process.

#include <iosfwd>
#include <string>
#include <vector>

namespace gpvae::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kNumericError = 3 };

/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gpvae::cli
