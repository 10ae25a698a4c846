#pragma once

#include <string>
#include <vector>

namespace faceerase::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the faceerase tool; args[0] is the program name.
/// Failures print a JSON object {"error": {...}} on stderr.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

/// Default checkpoint directory when --ckpt is omitted.
inline constexpr const char* kCheckpointEnv = "FACEERASE_CKPT";

}  // namespace faceerase::cli
