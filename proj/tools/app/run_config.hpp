#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "storagessm/equilibrium.hpp"
#include "storagessm/model_params.hpp"
#include "storagessm/samplers.hpp"

namespace storagessm::app {

inline constexpr const char* kStorageSsm = "storage-ssm";
inline constexpr const char* kLgll = "lgll";

// Everything a run depends on. Serialised into the manifest, minus the output
// directory, so a replay into any directory reproduces the same files.
struct RunConfig {
  std::string command;  // solve | simulate | fit | compare | diagnose

  // fit and diagnose use the first entry; compare uses all of them.
  std::vector<std::string> models{kStorageSsm};
  std::string data;     // price CSV, absolute path
  std::string summary;  // diagnose: posterior summary to take means from

  // Parameters for solve, simulate and diagnose (natural scale).
  double v = 0.097;
  double delta = 0.011;
  double b = 0.420;
  std::vector<double> theta;  // diagnose: full parameter vector of the model

  std::size_t length = 300;
  std::size_t sim_burn_in = 500;

  SolverConfig solver;
  PriorSpec prior;
  double capacity = kDefaultCapacity;
  double annual_rate = kDefaultAnnualRate;

  std::size_t particles = 10000;
  std::size_t iterations = 12000;
  std::size_t burn_in = 2000;
  std::size_t cj_draws = 0;         // 0 uses the number of posterior draws
  std::size_t residual_mc = 10000;  // simulated prices per period for det-trend Pearson residuals
  std::uint64_t seed = 1;
  int threads = 1;

  // Not part of the reproducible configuration.
  std::filesystem::path out;
  bool quiet = false;

  // Throws InvalidArgument for inconsistent settings and DataError for
  // missing input files.
  void validate() const;
  ModelParams model_params() const;
};

bool is_known_model(const std::string& kind);
bool is_det_trend(const std::string& kind);
TrendSpec trend_spec_for(const std::string& kind);

nlohmann::json to_json(const RunConfig& c);
RunConfig config_from_json(const nlohmann::json& j);

// --out, else $STORAGESSM_OUTPUT_DIR, else ./storagessm-<command>.
std::filesystem::path resolve_output_dir(const std::string& flag, const std::string& command);

}  // namespace storagessm::app
