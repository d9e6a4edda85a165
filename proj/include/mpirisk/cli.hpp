#pragma once

#include <string>
#include <vector>

namespace mpirisk::cli {

/// Exit codes: 0 success, 1 file or data error, 2 usage, 3 validation failure.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace mpirisk::cli
