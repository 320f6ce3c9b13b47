#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace patcnn {

inline constexpr int kExitOk = 0;
inline constexpr int kExitModuleError = 1;
inline constexpr int kExitUsage = 2;

// Runs one pipeline subcommand (phantom, groundtruth, train, predict,
// evaluate, quantify, stats, overlay). args excludes the program name.
// Settings resolve as: built-in defaults < --config file < --set key=value
// < PATCNN_DATA_ROOT / PATCNN_OUTPUT_ROOT < explicit flags.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace patcnn
