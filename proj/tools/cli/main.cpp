#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace storagessm;
using namespace storagessm::app;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kModels{"storage-ssm", "lgll", "linear", "rcs3", "rcs7"};

void add_common(CLI::App* cmd, RunConfig& c, std::string& out) {
  cmd->add_option("-o,--out", out, "Output directory (else $STORAGESSM_OUTPUT_DIR)");
  cmd->add_option("--seed", c.seed, "Top-level random seed")->capture_default_str();
  cmd->add_option("-j,--threads", c.threads, "Filter threads; 0 uses all cores")
      ->capture_default_str();
  cmd->add_flag("-q,--quiet", c.quiet, "No progress output");
}

void add_structure(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--capacity", c.capacity, "Storage capacity C")->capture_default_str();
  cmd->add_option("--annual-rate", c.annual_rate, "Annual interest rate")->capture_default_str();
  cmd->add_option("--grid", c.solver.grid_size, "Policy grid points")->capture_default_str();
  cmd->add_option("--quad-nodes", c.solver.quad_nodes, "Trapezoid subintervals")
      ->capture_default_str();
  cmd->add_option("--policy-tol", c.solver.policy_tol, "Policy iteration tolerance")
      ->capture_default_str();
  cmd->add_option("--root-tol", c.solver.root_tol, "Root-finding tolerance")->capture_default_str();
  cmd->add_option("--max-iters", c.solver.max_iters, "Maximum policy sweeps")
      ->capture_default_str();
}

void add_params(CLI::App* cmd, RunConfig& c, bool with_v) {
  if (with_v) cmd->add_option("--v", c.v, "Trend innovation sd")->capture_default_str();
  cmd->add_option("--delta", c.delta, "Monthly depreciation rate")->capture_default_str();
  cmd->add_option("--b", c.b, "Demand semi-elasticity parameter")->capture_default_str();
}

void add_data(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--data", c.data, "Price CSV with header date,price")
      ->required()
      ->check(CLI::ExistingFile);
}

void add_sampler(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("-N,--particles", c.particles, "Particles per filter")->capture_default_str();
  cmd->add_option("-M,--iterations", c.iterations, "MCMC iterations")->capture_default_str();
  cmd->add_option("--burn-in", c.burn_in, "Burn-in iterations")->capture_default_str();
  cmd->add_option("--prior-v2-scale", c.prior.v2_scale, "v^2 ~ scale / chi2(df)")
      ->capture_default_str();
  cmd->add_option("--prior-v2-df", c.prior.v2_df)->capture_default_str();
  cmd->add_option("--prior-delta-a", c.prior.delta_a, "delta ~ Beta(a, b)")->capture_default_str();
  cmd->add_option("--prior-delta-b", c.prior.delta_b)->capture_default_str();
  cmd->add_option("--prior-log-b-mean", c.prior.log_b_mean, "log b ~ N(mean, sd^2)")
      ->capture_default_str();
  cmd->add_option("--prior-log-b-sd", c.prior.log_b_sd)->capture_default_str();
  cmd->add_option("--prior-coef-sd", c.prior.coef_sd, "Trend coefficients ~ N(0, sd^2)")
      ->capture_default_str();
}

int report_failure(const std::string& what, const std::exception& e, const std::string& stage) {
  std::cerr << "storagessm-cli: " << what;
  if (!stage.empty()) std::cerr << ": stage '" << stage << "'";
  std::cerr << ": " << e.what() << "\n";
  return exit_code_for(e);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Commodity storage model with stochastic trend: solve, simulate, fit, compare"};
  app.require_subcommand(1);
  RunConfig c;
  std::string out_flag;
  std::string model = kStorageSsm;

  auto* solve = app.add_subcommand("solve", "Solve the rational expectations equilibrium");
  add_params(solve, c, false);
  add_structure(solve, c);
  add_common(solve, c, out_flag);

  auto* sim = app.add_subcommand("simulate", "Simulate a price path");
  sim->add_option("--model", model, "storage-ssm or lgll")
      ->check(CLI::IsMember({"storage-ssm", "lgll"}))
      ->capture_default_str();
  add_params(sim, c, true);
  sim->add_option("-T,--length", c.length, "Observations kept")->capture_default_str();
  sim->add_option("--sim-burn-in", c.sim_burn_in, "Discarded leading periods")
      ->capture_default_str();
  add_structure(sim, c);
  add_common(sim, c, out_flag);

  auto* fit = app.add_subcommand("fit", "Posterior sampling for one model");
  fit->add_option("--model", model, "Model kind")->check(CLI::IsMember(kModels))->capture_default_str();
  add_data(fit, c);
  add_sampler(fit, c);
  add_structure(fit, c);
  add_common(fit, c, out_flag);

  std::vector<std::string> compare_models{"storage-ssm", "lgll"};
  auto* cmp = app.add_subcommand("compare", "Marginal likelihoods and Bayes factors");
  cmp->add_option("models", compare_models, "Models; Bayes factors are relative to the first")
      ->check(CLI::IsMember(kModels))
      ->capture_default_str();
  add_data(cmp, c);
  add_sampler(cmp, c);
  cmp->add_option("-L,--cj-draws", c.cj_draws, "Proposal draws for the denominator; 0 uses M")
      ->capture_default_str();
  add_structure(cmp, c);
  add_common(cmp, c, out_flag);

  auto* diag = app.add_subcommand("diagnose", "Residual diagnostics at given parameters");
  diag->add_option("--model", model, "Model kind")->check(CLI::IsMember(kModels))->capture_default_str();
  add_data(diag, c);
  auto* theta = diag->add_option("--theta", c.theta, "Natural-scale parameters in model order");
  diag->add_option("--summary", c.summary, "summary.json from fit; uses posterior means")
      ->check(CLI::ExistingFile)
      ->excludes(theta);
  diag->add_option("-N,--particles", c.particles, "Particles (storage-ssm)")->capture_default_str();
  diag->add_option("--residual-mc", c.residual_mc, "Simulated prices per period (trend models)")
      ->capture_default_str();
  add_structure(diag, c);
  add_common(diag, c, out_flag);

  std::string run_dir, replay_out;
  std::optional<int> replay_threads;
  bool replay_quiet = false;
  auto* rep = app.add_subcommand("replay", "Re-run from a manifest and compare outputs");
  rep->add_option("run_dir", run_dir, "Directory holding manifest.json")
      ->required()
      ->check(CLI::ExistingDirectory);
  rep->add_option("-o,--out", replay_out, "Replay directory (default <run_dir>-replay)");
  rep->add_option("-j,--threads", replay_threads, "Override the recorded thread count");
  rep->add_flag("-q,--quiet", replay_quiet, "No progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (rep->parsed()) {
    std::string stage;
    const fs::path out =
        replay_out.empty() ? fs::path(run_dir).lexically_normal().string() + "-replay" : replay_out;
    try {
      const auto r = replay(run_dir, fs::absolute(out), replay_threads, replay_quiet, stage);
      for (const auto& f : r.matched) std::cout << "match    " << f << "\n";
      for (const auto& f : r.mismatched) std::cout << "MISMATCH " << f << "\n";
      if (!r.mismatched.empty()) {
        std::cerr << "storagessm-cli: replay: " << r.mismatched.size() << " output(s) differ\n";
        return kExitReplayMismatch;
      }
      return kExitOk;
    } catch (const std::exception& e) {
      return report_failure("replay", e, stage);
    }
  }

  CLI::App* cmd = app.get_subcommands().front();
  c.command = cmd->get_name();
  if (c.command == "compare") c.models = compare_models;
  else c.models = {model};
  if (!c.data.empty()) c.data = fs::absolute(c.data).lexically_normal().string();
  if (!c.summary.empty()) c.summary = fs::absolute(c.summary).lexically_normal().string();
  c.out = resolve_output_dir(out_flag, c.command);

  std::string stage;
  try {
    execute(c, stage);
  } catch (const std::exception& e) {
    return report_failure(c.command, e, stage);
  }
  if (!c.quiet) std::cerr << c.command << ": outputs in " << c.out.string() << "\n";
  return kExitOk;
}
