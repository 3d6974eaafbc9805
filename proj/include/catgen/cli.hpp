#pragma once

#include <string>
#include <vector>

namespace catgen {

/// Runs the command line. Exit codes: 0 success, 1 usage error, 2 data or
/// numeric failure.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace catgen
