#pragma once

#include <string>
#include <vector>

namespace fruitmap::cli {

enum ExitCode : int { kOk = 0, kInvalid = 1, kIoFailure = 2 };

/// Entry point of the `fruitmap` tool. `args` excludes the program name.
/// Exit 0 on success, 1 on validation, domain or usage errors, 2 on I/O errors.
int run(const std::vector<std::string>& args);

int run(int argc, const char* const* argv);

}  // namespace fruitmap::cli
