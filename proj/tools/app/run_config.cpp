#include "run_config.hpp"

#include <algorithm>
#include <cstdlib>

#include "storagessm/errors.hpp"

namespace storagessm::app {

namespace fs = std::filesystem;

bool is_det_trend(const std::string& kind) {
  return kind == "linear" || kind == "rcs3" || kind == "rcs7";
}

bool is_known_model(const std::string& kind) {
  return kind == kStorageSsm || kind == kLgll || is_det_trend(kind);
}

TrendSpec trend_spec_for(const std::string& kind) {
  if (kind == "linear") return TrendSpec::linear();
  if (kind == "rcs3") return TrendSpec::rcs3();
  if (kind == "rcs7") return TrendSpec::rcs7();
  throw InvalidArgument("not a deterministic-trend model: " + kind);
}

ModelParams RunConfig::model_params() const {
  ModelParams p;
  p.v = v;
  p.delta = delta;
  p.b = b;
  p.capacity = capacity;
  p.r = monthly_rate_from_annual(annual_rate);
  return p;
}

void RunConfig::validate() const {
  static const std::vector<std::string> commands{"solve", "simulate", "fit", "compare", "diagnose"};
  if (std::find(commands.begin(), commands.end(), command) == commands.end())
    throw InvalidArgument("unknown command '" + command + "'");
  if (models.empty()) throw InvalidArgument("no model given");
  for (const auto& m : models)
    if (!is_known_model(m)) throw InvalidArgument("unknown model '" + m + "'");
  if (command == "simulate" && models.front() != kStorageSsm && models.front() != kLgll)
    throw InvalidArgument("simulate supports storage-ssm and lgll");
  if ((command == "fit" || command == "diagnose") && models.size() != 1)
    throw InvalidArgument(command + " takes exactly one model");

  const bool needs_data = command == "fit" || command == "compare" || command == "diagnose";
  if (needs_data) {
    if (data.empty()) throw InvalidArgument(command + " needs --data");
    if (!fs::is_regular_file(data)) throw DataError("data file not found: " + data, 0);
  }
  if (command == "diagnose") {
    if (theta.empty() == summary.empty())
      throw InvalidArgument("diagnose needs exactly one of --theta and --summary");
    if (!summary.empty() && !fs::is_regular_file(summary))
      throw DataError("summary file not found: " + summary, 0);
  }
  if (command == "fit" || command == "compare") {
    if (iterations == 0 || burn_in == 0) throw InvalidArgument("iterations and burn-in must be positive");
    if (burn_in >= iterations) throw InvalidArgument("burn-in must be smaller than iterations");
  }
  if (particles < 2) throw InvalidArgument("need at least two particles");
  if (length < 2) throw InvalidArgument("length must be at least 2");
  if (residual_mc < 2) throw InvalidArgument("residual-mc must be at least 2");
  if (threads < 0) throw InvalidArgument("threads must be >= 0");
  solver.validate();
  prior.validate();
  if (command == "simulate" && models.front() == kLgll) {
    LgllParams{b, v}.validate();
  } else if (command == "solve" || command == "simulate") {
    // The solver ignores v, and a simulation may switch the trend off.
    if (v < 0.0) throw InvalidArgument("v must be nonnegative");
    ModelParams p = model_params();
    p.v = 1.0;
    p.validate();
  }
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["command"] = c.command;
  j["models"] = c.models;
  j["data"] = c.data;
  j["summary"] = c.summary;
  j["v"] = c.v;
  j["delta"] = c.delta;
  j["b"] = c.b;
  j["theta"] = c.theta;
  j["length"] = c.length;
  j["sim_burn_in"] = c.sim_burn_in;
  j["solver"] = {{"grid_size", c.solver.grid_size},   {"quad_nodes", c.solver.quad_nodes},
                 {"quad_lo", c.solver.quad_lo},       {"quad_hi", c.solver.quad_hi},
                 {"policy_tol", c.solver.policy_tol}, {"max_iters", c.solver.max_iters},
                 {"root_tol", c.solver.root_tol}};
  j["prior"] = {{"v2_scale", c.prior.v2_scale},     {"v2_df", c.prior.v2_df},
                {"delta_a", c.prior.delta_a},       {"delta_b", c.prior.delta_b},
                {"log_b_mean", c.prior.log_b_mean}, {"log_b_sd", c.prior.log_b_sd},
                {"coef_sd", c.prior.coef_sd}};
  j["capacity"] = c.capacity;
  j["annual_rate"] = c.annual_rate;
  j["particles"] = c.particles;
  j["iterations"] = c.iterations;
  j["burn_in"] = c.burn_in;
  j["cj_draws"] = c.cj_draws;
  j["residual_mc"] = c.residual_mc;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
  try {
    RunConfig c;
    j.at("command").get_to(c.command);
    j.at("models").get_to(c.models);
    j.at("data").get_to(c.data);
    j.at("summary").get_to(c.summary);
    j.at("v").get_to(c.v);
    j.at("delta").get_to(c.delta);
    j.at("b").get_to(c.b);
    j.at("theta").get_to(c.theta);
    j.at("length").get_to(c.length);
    j.at("sim_burn_in").get_to(c.sim_burn_in);
    const auto& s = j.at("solver");
    s.at("grid_size").get_to(c.solver.grid_size);
    s.at("quad_nodes").get_to(c.solver.quad_nodes);
    s.at("quad_lo").get_to(c.solver.quad_lo);
    s.at("quad_hi").get_to(c.solver.quad_hi);
    s.at("policy_tol").get_to(c.solver.policy_tol);
    s.at("max_iters").get_to(c.solver.max_iters);
    s.at("root_tol").get_to(c.solver.root_tol);
    const auto& p = j.at("prior");
    p.at("v2_scale").get_to(c.prior.v2_scale);
    p.at("v2_df").get_to(c.prior.v2_df);
    p.at("delta_a").get_to(c.prior.delta_a);
    p.at("delta_b").get_to(c.prior.delta_b);
    p.at("log_b_mean").get_to(c.prior.log_b_mean);
    p.at("log_b_sd").get_to(c.prior.log_b_sd);
    p.at("coef_sd").get_to(c.prior.coef_sd);
    j.at("capacity").get_to(c.capacity);
    j.at("annual_rate").get_to(c.annual_rate);
    j.at("particles").get_to(c.particles);
    j.at("iterations").get_to(c.iterations);
    j.at("burn_in").get_to(c.burn_in);
    j.at("cj_draws").get_to(c.cj_draws);
    j.at("residual_mc").get_to(c.residual_mc);
    j.at("seed").get_to(c.seed);
    j.at("threads").get_to(c.threads);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed run configuration: ") + e.what(), 0);
  }
}

fs::path resolve_output_dir(const std::string& flag, const std::string& command) {
  if (!flag.empty()) return fs::absolute(flag);
  if (const char* env = std::getenv("STORAGESSM_OUTPUT_DIR"); env && *env) return fs::absolute(env);
  return fs::absolute("storagessm-" + command);
}

}  // namespace storagessm::app
