#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mtedebias/harness/config.hpp"

namespace mte::harness {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitEstimation = 3, kExitIo = 4 };

const std::vector<std::string>& command_names();

// Runs one command and writes its outputs plus manifest.json under
// config.run.out. Returns the exit code; errors are reported on `err`.
int run_command(const std::string& command, const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace mte::harness
