#include "storagessm/samplers.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>

#include "storagessm/errors.hpp"
#include "storagessm/numerics.hpp"

namespace storagessm {

namespace {

constexpr double kLog2 = 0.69314718055994530942;

void check_dim(std::span<const double> theta, std::size_t dim, const char* who) {
  if (theta.size() != dim)
    throw InvalidArgument(std::string(who) + ": parameter vector has the wrong dimension");
}

// log delta and log(1 - delta) for delta = 1 / (1 + exp(-2t)), without
// cancellation in either tail.
double log_delta_at(double t) { return -std::log1p(std::exp(-2.0 * t)); }
double log_one_minus_delta_at(double t) { return -std::log1p(std::exp(2.0 * t)); }

LikelihoodEval failed(std::string reason) {
  LikelihoodEval e;
  e.failed = true;
  e.reason = std::move(reason);
  return e;
}

}  // namespace

void PriorSpec::validate() const {
  if (!(v2_scale > 0.0 && v2_df > 0.0)) throw InvalidArgument("prior: bad v^2 hyperparameters");
  if (!(delta_a > 0.0 && delta_b > 0.0)) throw InvalidArgument("prior: bad delta hyperparameters");
  if (!(log_b_sd > 0.0)) throw InvalidArgument("prior: log b sd must be positive");
  if (!(coef_sd > 0.0)) throw InvalidArgument("prior: coefficient sd must be positive");
}

double PriorSpec::log_density_v2(double v2) const {
  if (!(v2 > 0.0)) return -std::numeric_limits<double>::infinity();
  // Inverse gamma with shape df/2 and scale scale/2.
  const double a = 0.5 * v2_df;
  const double s = 0.5 * v2_scale;
  return a * std::log(s) - std::lgamma(a) - (a + 1.0) * std::log(v2) - s / v2;
}

double PriorSpec::log_density_delta(double delta) const {
  if (!(delta > 0.0 && delta < 1.0)) return -std::numeric_limits<double>::infinity();
  const double log_beta =
      std::lgamma(delta_a) + std::lgamma(delta_b) - std::lgamma(delta_a + delta_b);
  return (delta_a - 1.0) * std::log(delta) + (delta_b - 1.0) * std::log1p(-delta) - log_beta;
}

double PriorSpec::log_density_log_b(double log_b) const {
  return normal_log_density(log_b, log_b_mean, log_b_sd);
}

double PriorSpec::log_density_coef(double c) const { return normal_log_density(c, 0.0, coef_sd); }

double PriorSpec::log_density_log_v(double log_v) const {
  const double log_v2 = 2.0 * log_v;
  const double a = 0.5 * v2_df;
  const double s = 0.5 * v2_scale;
  // Written in log v^2 so that extreme values stay finite.
  return a * std::log(s) - std::lgamma(a) - (a + 1.0) * log_v2 - s * std::exp(-log_v2) + kLog2 +
         log_v2;
}

double PriorSpec::log_density_atanh_delta(double t) const {
  const double ld = log_delta_at(t);
  const double l1d = log_one_minus_delta_at(t);
  const double log_beta =
      std::lgamma(delta_a) + std::lgamma(delta_b) - std::lgamma(delta_a + delta_b);
  return delta_a * ld + delta_b * l1d - log_beta + kLog2;
}

double PriorSpec::v2_mean() const {
  const double a = 0.5 * v2_df;
  return a > 1.0 ? 0.5 * v2_scale / (a - 1.0) : std::numeric_limits<double>::infinity();
}

double PriorSpec::v2_sd() const {
  const double a = 0.5 * v2_df;
  return a > 2.0 ? v2_mean() / std::sqrt(a - 2.0) : std::numeric_limits<double>::infinity();
}

double PriorSpec::delta_mean() const { return delta_a / (delta_a + delta_b); }

double PriorSpec::delta_sd() const {
  const double s = delta_a + delta_b;
  return std::sqrt(delta_a * delta_b / (s * s * (s + 1.0)));
}

double draw_v2(const PriorSpec& prior, StreamEngine& engine) {
  std::chi_squared_distribution<double> chi2(prior.v2_df);
  return prior.v2_scale / chi2(engine);
}

double draw_delta(const PriorSpec& prior, StreamEngine& engine) {
  std::gamma_distribution<double> ga(prior.delta_a, 1.0);
  std::gamma_distribution<double> gb(prior.delta_b, 1.0);
  const double x = ga(engine);
  const double y = gb(engine);
  return x / (x + y);
}

double draw_log_b(const PriorSpec& prior, StreamEngine& engine) {
  std::normal_distribution<double> n(prior.log_b_mean, prior.log_b_sd);
  return n(engine);
}

// Storage SSM ---------------------------------------------------------------

StorageSsmInference::StorageSsmInference(PriceSeries prices, PriorSpec prior, SolverConfig solver,
                                         FilterOptions filter, double capacity,
                                         double annual_rate)
    : prices_(std::move(prices)),
      prior_(prior),
      solver_(solver),
      filter_(filter),
      capacity_(capacity),
      rate_(monthly_rate_from_annual(annual_rate)) {
  prices_.validate();
  prior_.validate();
  solver_.validate();
  filter_.diagnostics = false;
  filter_.store_history = false;
}

std::vector<double> StorageSsmInference::to_natural(std::span<const double> theta) const {
  check_dim(theta, 3, "storage-ssm");
  return {v_from_log_v(theta[0]), delta_from_atanh(theta[1]), std::exp(theta[2])};
}

std::vector<double> StorageSsmInference::to_transformed(std::span<const double> natural) const {
  check_dim(natural, 3, "storage-ssm");
  return {log_v_from_v(natural[0]), atanh_from_delta(natural[1]), std::log(natural[2])};
}

double StorageSsmInference::log_prior(std::span<const double> theta) const {
  check_dim(theta, 3, "storage-ssm");
  return prior_.log_density_log_v(theta[0]) + prior_.log_density_atanh_delta(theta[1]) +
         prior_.log_density_log_b(theta[2]);
}

ModelParams StorageSsmInference::params_at(std::span<const double> natural) const {
  ModelParams p;
  p.v = natural[0];
  p.delta = natural[1];
  p.b = natural[2];
  p.capacity = capacity_;
  p.r = rate_;
  return p;
}

LikelihoodEval StorageSsmInference::log_likelihood(std::span<const double> theta,
                                                   std::uint64_t seed) const {
  const ModelParams params = params_at(to_natural(theta));
  try {
    params.validate();
    auto sol = std::make_shared<const EquilibriumSolution>(solve_equilibrium(params, solver_));
    const StorageSsm model(std::move(sol));
    FilterOptions opts = filter_;
    opts.seed = seed;
    LikelihoodEval e;
    e.value = bpf(model, prices_, opts).log_lik;
    if (!std::isfinite(e.value)) return failed("non-finite likelihood");
    return e;
  } catch (const Error& err) {
    return failed(err.what());
  }
}

std::vector<double> StorageSsmInference::initial(std::uint64_t seed) const {
  StreamEngine engine(seed, Stream::kInit);
  const double v2 = draw_v2(prior_, engine);
  const double delta = draw_delta(prior_, engine);
  const double log_b = draw_log_b(prior_, engine);
  return {0.5 * std::log(v2), atanh_from_delta(delta), log_b};
}

// LGLL -----------------------------------------------------------------------

LgllInference::LgllInference(PriceSeries prices, PriorSpec prior)
    : prices_(std::move(prices)), prior_(prior) {
  prices_.validate();
  prior_.validate();
}

std::vector<double> LgllInference::to_natural(std::span<const double> theta) const {
  check_dim(theta, 2, "lgll");
  return {v_from_log_v(theta[0]), std::exp(theta[1])};
}

std::vector<double> LgllInference::to_transformed(std::span<const double> natural) const {
  check_dim(natural, 2, "lgll");
  return {log_v_from_v(natural[0]), std::log(natural[1])};
}

double LgllInference::log_prior(std::span<const double> theta) const {
  check_dim(theta, 2, "lgll");
  return prior_.log_density_log_v(theta[0]) + prior_.log_density_log_b(theta[1]);
}

LikelihoodEval LgllInference::log_likelihood(std::span<const double> theta,
                                             std::uint64_t) const {
  const auto nat = to_natural(theta);
  try {
    LikelihoodEval e;
    e.value = kalman_loglik({nat[1], nat[0]}, prices_);
    if (!std::isfinite(e.value)) return failed("non-finite likelihood");
    return e;
  } catch (const Error& err) {
    return failed(err.what());
  }
}

std::vector<double> LgllInference::initial(std::uint64_t seed) const {
  StreamEngine engine(seed, Stream::kInit);
  const double v2 = draw_v2(prior_, engine);
  const double log_b = draw_log_b(prior_, engine);
  return {0.5 * std::log(v2), log_b};
}

// Deterministic trends -------------------------------------------------------

DetTrendInference::DetTrendInference(PriceSeries prices, TrendSpec spec, PriorSpec prior,
                                     SolverConfig solver, DetTrendOptions options,
                                     double capacity, double annual_rate)
    : prices_(std::move(prices)),
      spec_(std::move(spec)),
      prior_(prior),
      solver_(solver),
      options_(options),
      capacity_(capacity),
      rate_(monthly_rate_from_annual(annual_rate)) {
  prices_.validate();
  prior_.validate();
  solver_.validate();
  spec_.validate();
  if (spec_.kind == TrendKind::kStochastic)
    throw InvalidArgument("DetTrendInference needs a deterministic trend");
  const Eigen::MatrixXd basis = trend_basis(spec_, prices_.size());
  const Eigen::Map<const Eigen::VectorXd> p(prices_.log_prices.data(), basis.rows());
  const Eigen::VectorXd resid = p - basis * basis.colPivHouseholderQr().solve(p);
  const double dof = std::max(static_cast<double>(basis.rows() - basis.cols()), 1.0);
  const double s2 = std::max(resid.squaredNorm() / dof, 1e-12);
  const Eigen::MatrixXd xtx_inv = (basis.transpose() * basis)
                                      .ldlt()
                                      .solve(Eigen::MatrixXd::Identity(basis.cols(), basis.cols()));
  for (Eigen::Index j = 0; j < basis.cols(); ++j)
    coef_scale_.push_back(std::sqrt(s2 * xtx_inv(j, j)));
}

std::vector<std::string> DetTrendInference::names() const {
  std::vector<std::string> n{"delta", "b"};
  if (spec_.kind == TrendKind::kLinear) {
    n.push_back("alpha");
    n.push_back("beta");
  } else {
    for (std::size_t g = 1; g <= spec_.coefficient_count(); ++g)
      n.push_back("gamma" + std::to_string(g));
  }
  return n;
}

std::vector<double> DetTrendInference::to_natural(std::span<const double> theta) const {
  check_dim(theta, dim(), "det-trend");
  std::vector<double> nat(theta.begin(), theta.end());
  nat[0] = delta_from_atanh(theta[0]);
  nat[1] = std::exp(theta[1]);
  for (std::size_t j = 2; j < nat.size(); ++j) nat[j] *= coef_scale_[j - 2];
  return nat;
}

std::vector<double> DetTrendInference::to_transformed(std::span<const double> natural) const {
  check_dim(natural, dim(), "det-trend");
  std::vector<double> t(natural.begin(), natural.end());
  t[0] = atanh_from_delta(natural[0]);
  t[1] = std::log(natural[1]);
  for (std::size_t j = 2; j < t.size(); ++j) t[j] /= coef_scale_[j - 2];
  return t;
}

double DetTrendInference::log_prior(std::span<const double> theta) const {
  check_dim(theta, dim(), "det-trend");
  double lp = prior_.log_density_atanh_delta(theta[0]) + prior_.log_density_log_b(theta[1]);
  for (std::size_t j = 2; j < theta.size(); ++j) {
    const double scale = coef_scale_[j - 2];
    lp += prior_.log_density_coef(theta[j] * scale) + std::log(scale);
  }
  return lp;
}

ModelParams DetTrendInference::params_at(std::span<const double> natural) const {
  ModelParams p;
  p.delta = natural[0];
  p.b = natural[1];
  p.capacity = capacity_;
  p.r = rate_;
  return p;
}

DetTrendParams DetTrendInference::det_params_at(std::span<const double> natural) const {
  return {natural[0], natural[1], std::vector<double>(natural.begin() + 2, natural.end())};
}

LikelihoodEval DetTrendInference::log_likelihood(std::span<const double> theta,
                                                 std::uint64_t) const {
  const auto nat = to_natural(theta);
  const ModelParams params = params_at(nat);
  try {
    params.validate();
    const EquilibriumSolution sol = solve_equilibrium(params, solver_);
    LikelihoodEval e;
    e.value = det_trend_loglik(det_params_at(nat), spec_, sol, prices_, options_);
    if (!std::isfinite(e.value)) return failed("non-finite likelihood");
    return e;
  } catch (const Error& err) {
    return failed(err.what());
  }
}

std::vector<double> DetTrendInference::initial(std::uint64_t seed) const {
  StreamEngine engine(seed, Stream::kInit);
  const double delta = draw_delta(prior_, engine);
  const double log_b = draw_log_b(prior_, engine);
  const Eigen::MatrixXd basis = trend_basis(spec_, prices_.size());
  const Eigen::Map<const Eigen::VectorXd> p(prices_.log_prices.data(),
                                            static_cast<Eigen::Index>(prices_.size()));
  const Eigen::VectorXd gamma = basis.colPivHouseholderQr().solve(p);
  std::vector<double> theta{atanh_from_delta(delta), log_b};
  for (Eigen::Index j = 0; j < gamma.size(); ++j) theta.push_back(gamma(j) / coef_scale_[j]);
  return theta;
}

// Sampler --------------------------------------------------------------------

Eigen::MatrixXd adapt_proposal(const std::vector<std::vector<double>>& draws,
                               std::size_t iteration, std::size_t burn_in,
                               const Eigen::MatrixXd& current, const AdaptOptions& options) {
  if (iteration >= burn_in) return current;
  const auto d = current.rows();
  if (iteration < options.warm_start || iteration < 2 || draws.size() < iteration)
    return options.initial_scale * Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < iteration; ++i)
    mean += Eigen::Map<const Eigen::VectorXd>(draws[i].data(), d);
  mean /= static_cast<double>(iteration);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < iteration; ++i) {
    const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(draws[i].data(), d) - mean;
    cov.noalias() += c * c.transpose();
  }
  cov /= static_cast<double>(iteration - 1);
  const double scale = 2.38 * 2.38 / static_cast<double>(d);
  return scale * (cov + options.epsilon * Eigen::MatrixXd::Identity(d, d));
}

double mh_log_acceptance(double log_lik_new, double log_prior_new, double log_lik_old,
                         double log_prior_old) {
  const double r = (log_lik_new + log_prior_new) - (log_lik_old + log_prior_old);
  if (std::isnan(r)) return -std::numeric_limits<double>::infinity();
  return std::min(0.0, r);
}

double Chain::acceptance_rate() const {
  if (accepted.empty()) return 0.0;
  return static_cast<double>(std::count(accepted.begin(), accepted.end(), 1)) /
         static_cast<double>(accepted.size());
}

double Chain::post_burn_in_acceptance_rate() const {
  if (accepted.size() <= burn_in) return 0.0;
  const auto first = accepted.begin() + static_cast<std::ptrdiff_t>(burn_in);
  return static_cast<double>(std::count(first, accepted.end(), 1)) /
         static_cast<double>(accepted.size() - burn_in);
}

std::vector<double> Chain::column(std::size_t j) const {
  std::vector<double> c;
  c.reserve(draws.size() > burn_in ? draws.size() - burn_in : 0);
  for (std::size_t i = burn_in; i < draws.size(); ++i) c.push_back(draws[i][j]);
  return c;
}

void Chain::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "iteration";
  for (const auto& n : names) out << ',' << n;
  out << ",log_lik,accepted\n";
  char buf[64];
  for (std::size_t i = 0; i < draws.size(); ++i) {
    out << i + 1;
    for (double x : draws[i]) {
      std::snprintf(buf, sizeof buf, ",%.17g", x);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g,%d\n", log_lik[i], accepted[i] ? 1 : 0);
    out << buf;
  }
}

Chain run_mh(const InferenceModel& model, const SamplerOptions& options) {
  if (options.iterations <= options.burn_in)
    throw InvalidArgument("sampler: iterations must exceed burn-in");
  const std::size_t d = model.dim();
  const auto filter_seed = [&](std::size_t i) {
    return derive_seed(options.seed, static_cast<std::uint64_t>(Stream::kFilter), i);
  };

  std::vector<double> theta;
  LikelihoodEval current;
  if (!options.initial.empty()) {
    if (options.initial.size() != d) throw InvalidArgument("sampler: initial value has wrong size");
    theta = model.to_transformed(options.initial);
    current = model.log_likelihood(theta, filter_seed(0));
  } else {
    // Prior draws until one has a finite likelihood.
    for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
      theta = model.initial(derive_seed(options.seed, static_cast<std::uint64_t>(Stream::kInit),
                                        attempt));
      current = model.log_likelihood(theta, filter_seed(0));
      if (!current.failed && std::isfinite(current.value)) break;
    }
  }
  double lp = model.log_prior(theta);
  if (current.failed || !std::isfinite(current.value) || !std::isfinite(lp))
    throw DomainError("sampler: no finite starting value (" + current.reason + ")");
  double ll = current.value;

  Chain chain;
  chain.names = model.names();
  chain.seed = options.seed;
  chain.burn_in = options.burn_in;
  chain.draws.reserve(options.iterations);
  chain.transformed.reserve(options.iterations);
  chain.log_lik.reserve(options.iterations);
  chain.log_prior.reserve(options.iterations);
  chain.accepted.reserve(options.iterations);

  const CounterRng rng(options.seed, Stream::kSampler);
  const auto di = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd sigma = options.adapt.initial_scale * Eigen::MatrixXd::Identity(di, di);
  Eigen::MatrixXd chol = sigma.llt().matrixL();
  Eigen::VectorXd xi(di);
  std::vector<double> proposal(d);

  for (std::size_t i = 0; i < options.iterations; ++i) {
    if (i < options.burn_in) {
      sigma = adapt_proposal(chain.transformed, i, options.burn_in, sigma, options.adapt);
      chol = sigma.llt().matrixL();
    }
    for (std::size_t j = 0; j < d; ++j)
      xi(static_cast<Eigen::Index>(j)) = rng.normal(i + 1, j + 1);
    const Eigen::VectorXd step = chol * xi;
    for (std::size_t j = 0; j < d; ++j) proposal[j] = theta[j] + step(static_cast<Eigen::Index>(j));

    const double lp_new = model.log_prior(proposal);
    bool accept = false;
    double ll_new = -std::numeric_limits<double>::infinity();
    if (std::isfinite(lp_new)) {
      const LikelihoodEval e = model.log_likelihood(proposal, filter_seed(i + 1));
      if (e.failed) chain.failures.push_back({i + 1, e.reason});
      ll_new = e.value;
      const double log_alpha = mh_log_acceptance(ll_new, lp_new, ll, lp);
      accept = std::log(rng.uniform(i + 1, 0)) < log_alpha;
    }
    if (accept) {
      theta = proposal;
      ll = ll_new;
      lp = lp_new;
    }
    chain.transformed.push_back(theta);
    chain.draws.push_back(model.to_natural(theta));
    chain.log_lik.push_back(ll);
    chain.log_prior.push_back(lp);
    chain.accepted.push_back(accept ? 1 : 0);
    if ((options.snapshot_every > 0 && i % options.snapshot_every == 0) ||
        i + 1 == options.burn_in) {
      chain.snapshots.push_back({i + 1, sigma});
    }
    if (options.progress_every > 0 && (i + 1) % options.progress_every == 0) {
      std::cerr << model.kind() << ": iteration " << i + 1 << "/" << options.iterations
                << ", acceptance " << chain.acceptance_rate() << "\n";
    }
  }
  chain.final_proposal = sigma;
  return chain;
}

Chain pmmh(const InferenceModel& model, const SamplerOptions& options) {
  return run_mh(model, options);
}

Chain mh_exact(const InferenceModel& model, const SamplerOptions& options) {
  if (!model.exact()) throw InvalidArgument("mh_exact: model likelihood is not exact");
  return run_mh(model, options);
}

McmcEss mcmc_ess(std::span<const double> draws) {
  const std::size_t n = draws.size();
  if (n < 2) throw InvalidArgument("mcmc_ess: need at least two draws");
  double mean = 0.0;
  for (double x : draws) mean += x;
  mean /= static_cast<double>(n);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = draws[i] - mean;
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += c[i] * c[i + lag];
    return s / static_cast<double>(n);
  };
  const double gamma0 = autocov(0);
  if (!(gamma0 > 0.0)) return {1.0, true};

  // Sums of adjacent autocovariance pairs, truncated at the first
  // nonpositive pair and forced to be nonincreasing.
  double sum_pairs = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    double pair = (m == 0 ? gamma0 : autocov(2 * m)) + autocov(2 * m + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    sum_pairs += pair;
    prev = pair;
  }
  const double tau = (-gamma0 + 2.0 * sum_pairs) / gamma0;
  const double ess = static_cast<double>(n) / tau;
  return {std::min(ess, static_cast<double>(n)), false};
}

double sample_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("sample_quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

PosteriorSummary posterior_summary(const Chain& chain) {
  PosteriorSummary out;
  out.draws = chain.size() > chain.burn_in ? chain.size() - chain.burn_in : 0;
  out.acceptance_rate = chain.post_burn_in_acceptance_rate();
  if (out.draws < 2) throw InvalidArgument("posterior_summary: fewer than two post-burn-in draws");
  for (std::size_t j = 0; j < chain.dim(); ++j) {
    const auto col = chain.column(j);
    double mean = 0.0;
    for (double x : col) mean += x;
    mean /= static_cast<double>(col.size());
    double ss = 0.0;
    for (double x : col) ss += (x - mean) * (x - mean);
    ParameterSummary s;
    s.name = chain.names[j];
    s.mean = mean;
    s.sd = std::sqrt(ss / static_cast<double>(col.size() - 1));
    s.ess = mcmc_ess(col).value;
    s.q025 = sample_quantile(col, 0.025);
    s.q975 = sample_quantile(col, 0.975);
    out.parameters.push_back(std::move(s));
  }
  return out;
}

}  // namespace storagessm
