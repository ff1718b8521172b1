#pragma once

#include <string>
#include <vector>

namespace drm {

// Runs the `drm` command line given argv-style arguments (program name
// excluded). Returns the process exit code: 0 success, 1 usage error,
// 2 data error, 3 numeric/convergence error.
int run_cli(const std::vector<std::string>& args);

}  // namespace drm
