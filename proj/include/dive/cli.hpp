#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dive::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitPipeline = 2;

/// Entry point behind the `dive` binary. args[0] is the program name.
/// Returns 0 on success, 1 on usage/validation/configuration errors,
/// 2 on pipeline errors.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace dive::cli
