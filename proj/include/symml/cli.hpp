#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace symml::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

inline constexpr const char* kSeedEnv = "SYMPLECTIC_ML_SEED";

// argv[0] is the program name. Returns the process exit code.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Arguments without the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace symml::cli
