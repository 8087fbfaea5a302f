#pragma once

#include <string>
#include <vector>

namespace dirw {

// CLI entry point shared by the dirw binary and the tests. Returns the
// process exit code: 0 success, 2 configuration error, 3 I/O error,
// 4 evaluation error.
int run_cli(const std::vector<std::string>& args);

}  // namespace dirw
