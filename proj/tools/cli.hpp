#pragma once

#include <string>
#include <vector>

namespace aspinn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

/// Runs the command line (without the program name) and returns the exit status.
int run(const std::vector<std::string>& args);

} // namespace aspinn::cli
