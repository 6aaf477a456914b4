#pragma once

#include <string>
#include <vector>

namespace matchlab {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Exit codes: 0 success, 1 failed check or non-convergence, 2 usage/config error.
int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args);

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(const std::string& bytes);

}  // namespace matchlab
