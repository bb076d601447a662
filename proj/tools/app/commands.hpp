#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "manifest.hpp"
#include "run_config.hpp"
#include "storagessm/errors.hpp"

namespace storagessm::app {

// Process exit codes, one per error class.
enum ExitCode : int {
  kExitOk = 0,
  kExitError = 1,
  kExitUsage = 2,
  kExitData = 3,
  kExitSolver = 4,
  kExitDegeneracy = 5,
  kExitDomain = 6,
  kExitReplayMismatch = 7,
  kExitUnexpected = 70,
};

class ReplayMismatchError : public Error {
 public:
  using Error::Error;
};

// Maps the exception in flight to its exit code.
int exit_code_for(const std::exception& e);

// Runs one command into config.out and writes its manifest. On failure the
// output directory gets an INCOMPLETE marker, `failed_stage` names the stage,
// and the exception propagates.
void execute(const RunConfig& config, std::string& failed_stage);

struct ReplayReport {
  std::filesystem::path out;
  std::vector<std::string> matched;
  std::vector<std::string> mismatched;  // differing or missing, in either directory
};

// Re-runs the command recorded in run_dir/manifest.json into `out` and
// compares every output, and the recorded copy, against the manifest
// SHA-256. Inputs must be unchanged. `threads` overrides the recorded
// thread count; outputs must not depend on it.
ReplayReport replay(const std::filesystem::path& run_dir, const std::filesystem::path& out,
                    std::optional<int> threads, bool quiet, std::string& failed_stage);

}  // namespace storagessm::app
