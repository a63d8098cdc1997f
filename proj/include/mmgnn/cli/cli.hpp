#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace mmgnn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitUsage = 64;

/// Entry point of the mmgnn executable. `args` excludes the program name.
/// Machine-readable results go to `out`, logs to `err`.
int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
        std::ostream& err = std::cerr);

}  // namespace mmgnn::cli
