#include "commands.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>

#include "storagessm/io.hpp"
#include "storagessm/kalman.hpp"
#include "storagessm/model_eval.hpp"
#include "storagessm/particle_filter.hpp"
#include "storagessm/samplers.hpp"
#include "storagessm/trend.hpp"

namespace storagessm::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Shortest round-trip representation, so equal doubles print identically.
std::string num(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::ofstream open_csv(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

PriceSeries load_data(const RunConfig& c, RunContext& ctx, json* gaps_out = nullptr) {
  ctx.stage("load data");
  ctx.add_input("data", c.data);
  PriceData d = load_price_csv(c.data);
  json gaps = json::array();
  for (const auto& g : d.gaps) {
    if (!c.quiet)
      std::cerr << "warning: " << c.data << ":" << g.line << ": " << g.missing_months
                << " month(s) missing between " << g.last_before.str() << " and "
                << g.first_after.str() << "\n";
    gaps.push_back({{"after", g.last_before.str()},
                    {"before", g.first_after.str()},
                    {"missing_months", g.missing_months},
                    {"line", g.line}});
  }
  if (gaps_out) *gaps_out = gaps;
  return d.series;
}

std::unique_ptr<InferenceModel> make_model(const std::string& kind, const PriceSeries& prices,
                                           const RunConfig& c) {
  if (kind == kStorageSsm) {
    FilterOptions f;
    f.particles = c.particles;
    f.threads = c.threads;
    return std::make_unique<StorageSsmInference>(prices, c.prior, c.solver, f, c.capacity,
                                                 c.annual_rate);
  }
  if (kind == kLgll) return std::make_unique<LgllInference>(prices, c.prior);
  return std::make_unique<DetTrendInference>(prices, trend_spec_for(kind), c.prior, c.solver,
                                             DetTrendOptions{}, c.capacity, c.annual_rate);
}

Chain run_chain(const InferenceModel& model, const RunConfig& c) {
  SamplerOptions o;
  o.iterations = c.iterations;
  o.burn_in = c.burn_in;
  o.seed = c.seed;
  if (!c.quiet) o.progress_every = std::max<std::size_t>(1, c.iterations / 20);
  return model.exact() ? mh_exact(model, o) : pmmh(model, o);
}

ModelParams storage_params(const RunConfig& c, double v, double delta, double b) {
  ModelParams p;
  p.v = v;
  p.delta = delta;
  p.b = b;
  p.capacity = c.capacity;
  p.r = monthly_rate_from_annual(c.annual_rate);
  return p;
}

FilterOptions diagnostic_filter(const RunConfig& c) {
  FilterOptions f;
  f.particles = c.particles;
  f.threads = c.threads;
  f.seed = derive_seed(c.seed, static_cast<std::uint64_t>(Stream::kFilter), c.iterations + 1);
  return f;
}

struct Evaluation {
  std::vector<double> pearson;
  std::vector<double> pit;
  std::size_t pit_clamped = 0;
  std::optional<double> x_bar;  // mean filtered supply, storage models only
};

// Filters the data at fixed natural-scale parameters and writes the filtered
// components to `filtered` when given.
Evaluation evaluate_at(const std::string& kind, const std::vector<double>& theta,
                       const PriceSeries& prices, const RunConfig& c,
                       const std::optional<fs::path>& filtered) {
  Evaluation e;
  if (kind == kStorageSsm) {
    const auto sol = std::make_shared<const EquilibriumSolution>(
        solve_equilibrium(storage_params(c, theta[0], theta[1], theta[2]), c.solver));
    const StorageSsm model(sol);
    const auto out = bpf(model, prices, diagnostic_filter(c));
    if (filtered) out.write_csv(*filtered);
    e.pearson = out.pearson;
    e.pit = out.pit;
    e.pit_clamped = out.pit_clamped;
    e.x_bar = mean_of(out.state_mean);
  } else if (kind == kLgll) {
    const LgllParams lp{theta[1], theta[0]};
    if (filtered) {
      const auto kf = kalman_filter(lp, prices);
      const auto ks = kalman_smoother(lp, prices);
      auto out = open_csv(*filtered);
      out << "t,date,log_price,filtered_trend,filtered_var,smoothed_trend,smoothed_var\n";
      for (std::size_t t = 0; t < prices.size(); ++t)
        out << t + 1 << ',' << prices.dates[t].str() << ',' << num(prices.log_prices[t]) << ','
            << num(kf.filtered_mean[t]) << ',' << num(kf.filtered_var[t]) << ','
            << num(ks.mean[t]) << ',' << num(ks.var[t]) << '\n';
    }
    auto r = lgll_residuals(lp, prices);
    e.pearson = std::move(r.pearson);
    e.pit = std::move(r.pit);
    e.pit_clamped = r.pit_clamped;
  } else {
    const auto spec = trend_spec_for(kind);
    const DetTrendParams dp{theta[0], theta[1], std::vector<double>(theta.begin() + 2, theta.end())};
    const auto sol = solve_equilibrium(storage_params(c, 1.0, dp.delta, dp.b), c.solver);
    const auto ev = det_trend_evaluate(dp, spec, sol, prices);
    if (filtered) write_trend_csv(*filtered, prices, ev.trend);
    auto r = det_trend_residuals(dp, spec, sol, prices, c.residual_mc,
                                 derive_seed(c.seed, static_cast<std::uint64_t>(Stream::kResidualMc)));
    e.pearson = std::move(r.pearson);
    e.pit = std::move(r.pit);
    e.pit_clamped = r.pit_clamped;
    e.x_bar = mean_of(ev.states);
  }
  return e;
}

std::vector<double> posterior_means(const PosteriorSummary& s) {
  std::vector<double> m;
  for (const auto& p : s.parameters) m.push_back(p.mean);
  return m;
}

json summary_json(const PosteriorSummary& s, const Chain& chain) {
  json params = json::array();
  for (const auto& p : s.parameters)
    params.push_back({{"name", p.name},
                      {"mean", p.mean},
                      {"sd", p.sd},
                      {"ess", p.ess},
                      {"q025", p.q025},
                      {"q975", p.q975}});
  json failures = json::array();
  for (const auto& f : chain.failures)
    failures.push_back({{"iteration", f.iteration}, {"reason", f.reason}});
  json proposal = json::array();
  for (Eigen::Index i = 0; i < chain.final_proposal.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < chain.final_proposal.cols(); ++j)
      row.push_back(chain.final_proposal(i, j));
    proposal.push_back(row);
  }
  return {{"parameters", params},
          {"draws", s.draws},
          {"burn_in", chain.burn_in},
          {"acceptance_rate", s.acceptance_rate},
          {"overall_acceptance_rate", chain.acceptance_rate()},
          {"solver_failures", failures},
          {"final_proposal", proposal}};
}

void write_summary_csv(const fs::path& path, const PosteriorSummary& s) {
  auto out = open_csv(path);
  out << "parameter,mean,sd,ess,q025,q975\n";
  for (const auto& p : s.parameters)
    out << p.name << ',' << num(p.mean) << ',' << num(p.sd) << ',' << num(p.ess) << ','
        << num(p.q025) << ',' << num(p.q975) << '\n';
}

// Storage cost and demand elasticity at posterior means. Names locate delta
// and b in any storage model.
json economics(const PosteriorSummary& s, const Evaluation& e) {
  double delta = 0.0, b = 0.0;
  for (const auto& p : s.parameters) {
    if (p.name == "delta") delta = p.mean;
    if (p.name == "b") b = p.mean;
  }
  return {{"delta", delta},
          {"storage_cost_pct", storage_cost_annual(delta)},
          {"b", b},
          {"x_bar", *e.x_bar},
          {"elasticity", price_elasticity(b, *e.x_bar)}};
}

void run_solve(const RunConfig& c, RunContext& ctx) {
  ctx.stage("solve equilibrium");
  const auto sol = solve_equilibrium(c.model_params(), c.solver);
  ctx.stage("write outputs");
  sol.write_csv(ctx.output("equilibrium.csv"));
  write_json(ctx.output("solution.json"), {{"delta", c.delta},
                                           {"b", c.b},
                                           {"capacity", c.capacity},
                                           {"monthly_rate", sol.params().r},
                                           {"x_star", sol.x_star()},
                                           {"x_star2", sol.x_star2()},
                                           {"iterations", sol.iterations()},
                                           {"final_residual", sol.final_residual()}});
}

void run_simulate(const RunConfig& c, RunContext& ctx) {
  if (c.models.front() == kLgll) {
    ctx.stage("simulate");
    const auto lp = simulate_lgll({c.b, c.v}, c.length, c.seed);
    const auto series = PriceSeries::from_log_prices(lp, "simulated");
    ctx.stage("write outputs");
    write_price_csv(ctx.output("prices.csv"), series);
    auto out = open_csv(ctx.output("simulated.csv"));
    out << "t,log_price\n";
    for (std::size_t t = 0; t < lp.size(); ++t) out << t + 1 << ',' << num(lp[t]) << '\n';
    return;
  }
  ctx.stage("solve equilibrium");
  const auto sol = solve_equilibrium(c.model_params(), c.solver);
  ctx.stage("simulate");
  const auto path = simulate(c.model_params(), sol, c.length, c.sim_burn_in, c.seed);
  ctx.stage("write outputs");
  path.write_csv(ctx.output("simulated.csv"), sol);
  write_price_csv(ctx.output("prices.csv"), path.series());
}

void run_fit(const RunConfig& c, RunContext& ctx) {
  json gaps;
  const auto prices = load_data(c, ctx, &gaps);
  const std::string kind = c.models.front();
  const auto model = make_model(kind, prices, c);
  ctx.stage("sample posterior (" + kind + ")");
  const auto chain = run_chain(*model, c);
  const auto s = posterior_summary(chain);
  ctx.stage("filter at posterior means (" + kind + ")");
  const auto e = evaluate_at(kind, posterior_means(s), prices, c, ctx.output("filtered.csv"));
  ctx.stage("write outputs");
  chain.write_csv(ctx.output("chain.csv"));
  write_summary_csv(ctx.output("summary.csv"), s);
  json j = summary_json(s, chain);
  j["model"] = kind;
  j["observations"] = prices.size();
  j["data_gaps"] = gaps;
  if (e.x_bar) j["economics"] = economics(s, e);
  write_json(ctx.output("summary.json"), j);
}

void run_compare(const RunConfig& c, RunContext& ctx) {
  json gaps;
  const auto prices = load_data(c, ctx, &gaps);
  std::vector<MarginalLikResult> ml;
  std::vector<json> econ;
  for (const auto& kind : c.models) {
    const auto model = make_model(kind, prices, c);
    ctx.stage("sample posterior (" + kind + ")");
    const auto chain = run_chain(*model, c);
    chain.write_csv(ctx.output("chain_" + kind + ".csv"));
    ctx.stage("marginal likelihood (" + kind + ")");
    ChibOptions co;
    co.l = c.cj_draws;
    co.seed = c.seed;
    co.threads = c.threads;
    ml.push_back(chib_jeliazkov(chain, *model, co));
    const auto s = posterior_summary(chain);
    if (kind != kLgll) {
      ctx.stage("filter at posterior means (" + kind + ")");
      econ.push_back(economics(s, evaluate_at(kind, posterior_means(s), prices, c, std::nullopt)));
      econ.back()["model"] = kind;
    }
  }

  ctx.stage("write outputs");
  json rows = json::array();
  auto out = open_csv(ctx.output("comparison.csv"));
  out << "model,log_marginal,log_lik,log_prior,log_ordinate,m,l,log_bf_reference\n";
  for (std::size_t i = 0; i < ml.size(); ++i) {
    const double bf = log_bayes_factor(ml.front(), ml[i]);
    out << c.models[i] << ',' << num(ml[i].log_marginal) << ',' << num(ml[i].log_lik) << ','
        << num(ml[i].log_prior) << ',' << num(ml[i].log_ordinate) << ',' << ml[i].m << ','
        << ml[i].l << ',' << num(bf) << '\n';
    rows.push_back({{"model", c.models[i]},
                    {"log_marginal", ml[i].log_marginal},
                    {"log_lik", ml[i].log_lik},
                    {"log_prior", ml[i].log_prior},
                    {"log_ordinate", ml[i].log_ordinate},
                    {"m", ml[i].m},
                    {"l", ml[i].l},
                    {"theta_bar", ml[i].theta_bar},
                    {"log_bf_reference", bf}});
  }
  auto eo = open_csv(ctx.output("economics.csv"));
  eo << "model,delta,storage_cost_pct,b,x_bar,elasticity\n";
  for (const auto& e : econ)
    eo << e["model"].get<std::string>() << ',' << num(e["delta"]) << ','
       << num(e["storage_cost_pct"]) << ',' << num(e["b"]) << ',' << num(e["x_bar"]) << ','
       << num(e["elasticity"]) << '\n';
  write_json(ctx.output("comparison.json"), {{"reference", c.models.front()},
                                             {"models", rows},
                                             {"economics", econ},
                                             {"observations", prices.size()},
                                             {"data_gaps", gaps}});
}

std::vector<double> theta_from_summary(const RunConfig& c, RunContext& ctx,
                                       const InferenceModel& model) {
  ctx.add_input("summary", c.summary);
  std::ifstream in(c.summary);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(c.summary + ": " + e.what(), 0);
  }
  const auto names = model.names();
  std::vector<double> theta;
  try {
    const auto& params = j.at("parameters");
    if (params.size() != names.size())
      throw DataError(c.summary + ": parameter count does not match model " + model.kind(), 0);
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (params[i].at("name").get<std::string>() != names[i])
        throw DataError(c.summary + ": expected parameter " + names[i], 0);
      theta.push_back(params[i].at("mean").get<double>());
    }
  } catch (const json::exception& e) {
    throw DataError(c.summary + ": " + e.what(), 0);
  }
  return theta;
}

void run_diagnose(const RunConfig& c, RunContext& ctx) {
  const auto prices = load_data(c, ctx);
  const std::string kind = c.models.front();
  const auto model = make_model(kind, prices, c);
  const auto theta = c.theta.empty() ? theta_from_summary(c, ctx, *model) : c.theta;
  if (theta.size() != model->dim())
    throw InvalidArgument(kind + " takes " + std::to_string(model->dim()) + " parameters (" +
                          [&] {
                            std::string s;
                            for (const auto& n : model->names()) s += (s.empty() ? "" : ",") + n;
                            return s;
                          }() + ")");
  ctx.stage("residuals (" + kind + ")");
  const auto e = evaluate_at(kind, theta, prices, c, std::nullopt);
  ctx.stage("diagnostic tests");
  const auto jb = jarque_bera(e.pit);
  const auto lb = ljung_box(e.pearson);

  ctx.stage("write outputs");
  auto out = open_csv(ctx.output("residuals.csv"));
  out << "t,date,pearson,pit\n";
  for (std::size_t i = 0; i < e.pearson.size(); ++i)
    out << i + 2 << ',' << prices.dates[i + 1].str() << ',' << num(e.pearson[i]) << ','
        << num(e.pit[i]) << '\n';
  auto d = open_csv(ctx.output("diagnostics.csv"));
  d << "model,n,rho1,lb_statistic,lb_p_value,jb_statistic,jb_p_value,skewness,kurtosis,"
       "pit_clamped\n";
  d << kind << ',' << e.pit.size() << ',' << num(lb.rho1) << ',' << num(lb.statistic) << ','
    << num(lb.p_value) << ',' << num(jb.statistic) << ',' << num(jb.p_value) << ','
    << num(jb.skewness) << ',' << num(jb.kurtosis) << ',' << e.pit_clamped << '\n';
  write_json(ctx.output("diagnostics.json"), {{"model", kind},
                                              {"theta", theta},
                                              {"n", e.pit.size()},
                                              {"rho1", lb.rho1},
                                              {"ljung_box", {{"lags", 12},
                                                             {"statistic", lb.statistic},
                                                             {"p_value", lb.p_value}}},
                                              {"jarque_bera", {{"statistic", jb.statistic},
                                                               {"p_value", jb.p_value},
                                                               {"skewness", jb.skewness},
                                                               {"kurtosis", jb.kurtosis}}},
                                              {"pit_clamped", e.pit_clamped}});
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ReplayMismatchError*>(&e)) return kExitReplayMismatch;
  if (dynamic_cast<const DataError*>(&e)) return kExitData;
  if (dynamic_cast<const NonConvergenceError*>(&e) || dynamic_cast<const RootFindError*>(&e))
    return kExitSolver;
  if (dynamic_cast<const FilterDegeneracyError*>(&e)) return kExitDegeneracy;
  if (dynamic_cast<const DomainError*>(&e)) return kExitDomain;
  if (dynamic_cast<const InvalidArgument*>(&e)) return kExitUsage;
  if (dynamic_cast<const Error*>(&e)) return kExitError;
  return kExitUnexpected;
}

void execute(const RunConfig& config, std::string& failed_stage) {
  RunContext ctx(config.out);
  try {
    config.validate();
    begin_run(config.out);
    if (config.command == "solve") run_solve(config, ctx);
    else if (config.command == "simulate") run_simulate(config, ctx);
    else if (config.command == "fit") run_fit(config, ctx);
    else if (config.command == "compare") run_compare(config, ctx);
    else run_diagnose(config, ctx);
    ctx.stage("write manifest");
    write_manifest(config, ctx);
  } catch (const std::exception& e) {
    failed_stage = ctx.stage();
    mark_incomplete(config.out, ctx.stage(), e.what());
    throw;
  }
}

ReplayReport replay(const fs::path& run_dir, const fs::path& out, std::optional<int> threads,
                    bool quiet, std::string& failed_stage) {
  failed_stage = "read manifest";
  const json manifest = read_manifest(run_dir);
  RunConfig c = config_from_json(manifest.at("config"));
  if (threads) c.threads = *threads;
  c.out = out;
  c.quiet = quiet;
  if (fs::weakly_canonical(run_dir) == fs::weakly_canonical(out))
    throw InvalidArgument("replay output directory must differ from the recorded run");

  failed_stage = "check inputs";
  for (const auto& [role, entry] : manifest.at("inputs").items()) {
    const auto path = entry.at("path").get<std::string>();
    if (!fs::is_regular_file(path)) throw DataError("recorded input missing: " + path, 0);
    if (sha256_file(path) != entry.at("sha256").get<std::string>())
      throw ReplayMismatchError("recorded input changed since the run: " + path);
  }

  failed_stage.clear();
  execute(c, failed_stage);

  ReplayReport r;
  r.out = out;
  // A file counts as matched only when the regenerated copy and the recorded
  // copy both still hash to the manifest entry.
  const auto same = [](const fs::path& p, const std::string& hash) {
    return fs::is_regular_file(p) && sha256_file(p) == hash;
  };
  for (const auto& [name, hash] : manifest.at("outputs").items()) {
    const auto h = hash.get<std::string>();
    if (same(out / name, h) && same(run_dir / name, h))
      r.matched.push_back(name);
    else
      r.mismatched.push_back(name);
  }
  return r;
}

}  // namespace storagessm::app
