#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace estatcom::cli {

/// Exit codes of the command-line tool.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;  // validation error, unknown flag or failed verify check
inline constexpr int kTrip = 2;        // simulate ended in a protection trip

/// Runs one command line. args[0] is the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

}  // namespace estatcom::cli
