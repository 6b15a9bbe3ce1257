#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mixprompt::cli {

// Process exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;  // usage, config, data or spec problems
inline constexpr int kExitRuntime = 2;     // backend or other runtime failures

// Runs one invocation. `args` excludes the program name. Results go to `out`,
// diagnostics and usage errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mixprompt::cli
