#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mfcal::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kError = 1;
inline constexpr int kNotConverged = 2;

// Runs the mfcal command line (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mfcal::cli
