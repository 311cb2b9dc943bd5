#pragma once

#include <string>
#include <vector>

namespace ctune {

struct ExecResult {
  int exit_code = -1;
  bool timed_out = false;
  bool signaled = false;
  double wall = 0.0;
  double user = 0.0;
  double sys = 0.0;
  std::string output;  // combined stdout+stderr
};

// Runs `/bin/sh -c command` in workdir with extra environment variables.
// The child gets its own process group; on timeout the whole group is
// SIGKILLed and reaped, so no orphans survive. cpu (>= 0) is a best-effort
// affinity pin.
ExecResult run_command(const std::string& command, const std::string& workdir,
                       const std::vector<std::pair<std::string, std::string>>& extra_env,
                       double timeout_seconds, int cpu = -1);

}  // namespace ctune
