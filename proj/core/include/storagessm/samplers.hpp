#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "storagessm/equilibrium.hpp"
#include "storagessm/kalman.hpp"
#include "storagessm/particle_filter.hpp"
#include "storagessm/ssm.hpp"
#include "storagessm/trend.hpp"

namespace storagessm {

// Parameter transforms to the unconstrained space.
inline double log_v_from_v(double v) { return std::log(v); }
inline double v_from_log_v(double t) { return std::exp(t); }
// arctanh(2 delta - 1) = 0.5 log(delta / (1 - delta)).
inline double atanh_from_delta(double delta) {
  return 0.5 * (std::log(delta) - std::log1p(-delta));
}
inline double delta_from_atanh(double t) { return 1.0 / (1.0 + std::exp(-2.0 * t)); }

// v^2 ~ v2_scale / chi2(v2_df), delta ~ Beta(delta_a, delta_b),
// log b ~ N(log_b_mean, log_b_sd^2), trend coefficients ~ N(0, coef_sd^2).
struct PriorSpec {
  double v2_scale = 0.1;
  double v2_df = 10.0;
  double delta_a = 2.0;
  double delta_b = 20.0;
  double log_b_mean = 0.0;
  double log_b_sd = 1.0;
  double coef_sd = 20.0;

  void validate() const;

  // Densities on the natural scale of each quantity.
  double log_density_v2(double v2) const;
  double log_density_delta(double delta) const;
  double log_density_log_b(double log_b) const;
  double log_density_coef(double c) const;

  // Densities of the transformed coordinates, Jacobian included.
  double log_density_log_v(double log_v) const;
  double log_density_atanh_delta(double t) const;

  // Analytic prior moments, used by tests and the README.
  double v2_mean() const;
  double v2_sd() const;
  double delta_mean() const;
  double delta_sd() const;
};

// Draws from the priors.
double draw_v2(const PriorSpec& prior, StreamEngine& engine);
double draw_delta(const PriorSpec& prior, StreamEngine& engine);
double draw_log_b(const PriorSpec& prior, StreamEngine& engine);

struct LikelihoodEval {
  double value = -std::numeric_limits<double>::infinity();
  // Set when the model could not be evaluated (solver failure, degenerate
  // filter); value is then -inf.
  bool failed = false;
  std::string reason;
};

// A model the samplers can run on, expressed in transformed coordinates.
class InferenceModel {
 public:
  virtual ~InferenceModel() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::vector<std::string> names() const = 0;
  virtual std::vector<double> to_natural(std::span<const double> theta) const = 0;
  virtual std::vector<double> to_transformed(std::span<const double> natural) const = 0;
  // Log prior density of theta in the transformed space.
  virtual double log_prior(std::span<const double> theta) const = 0;
  // `seed` selects the random numbers of a simulated likelihood; exact
  // models ignore it.
  virtual LikelihoodEval log_likelihood(std::span<const double> theta,
                                        std::uint64_t seed) const = 0;
  virtual bool exact() const = 0;
  // Starting point in transformed space.
  virtual std::vector<double> initial(std::uint64_t seed) const = 0;
};

// Storage model with stochastic trend; parameters (v, delta, b), likelihood
// by the bootstrap particle filter.
class StorageSsmInference final : public InferenceModel {
 public:
  StorageSsmInference(PriceSeries prices, PriorSpec prior, SolverConfig solver,
                      FilterOptions filter, double capacity = kDefaultCapacity,
                      double annual_rate = kDefaultAnnualRate);

  std::string kind() const override { return "storage-ssm"; }
  std::size_t dim() const override { return 3; }
  std::vector<std::string> names() const override { return {"v", "delta", "b"}; }
  std::vector<double> to_natural(std::span<const double> theta) const override;
  std::vector<double> to_transformed(std::span<const double> natural) const override;
  double log_prior(std::span<const double> theta) const override;
  LikelihoodEval log_likelihood(std::span<const double> theta, std::uint64_t seed) const override;
  bool exact() const override { return false; }
  std::vector<double> initial(std::uint64_t seed) const override;

  ModelParams params_at(std::span<const double> natural) const;
  const FilterOptions& filter_options() const { return filter_; }
  const SolverConfig& solver_config() const { return solver_; }

 private:
  PriceSeries prices_;
  PriorSpec prior_;
  SolverConfig solver_;
  FilterOptions filter_;
  double capacity_;
  double rate_;
};

// Local-level model; parameters (v, b), exact Kalman likelihood.
class LgllInference final : public InferenceModel {
 public:
  LgllInference(PriceSeries prices, PriorSpec prior);

  std::string kind() const override { return "lgll"; }
  std::size_t dim() const override { return 2; }
  std::vector<std::string> names() const override { return {"v", "b"}; }
  std::vector<double> to_natural(std::span<const double> theta) const override;
  std::vector<double> to_transformed(std::span<const double> natural) const override;
  double log_prior(std::span<const double> theta) const override;
  LikelihoodEval log_likelihood(std::span<const double> theta, std::uint64_t seed) const override;
  bool exact() const override { return true; }
  std::vector<double> initial(std::uint64_t seed) const override;

 private:
  PriceSeries prices_;
  PriorSpec prior_;
};

// Storage model with deterministic trend; parameters (delta, b, gamma_1..G),
// exact likelihood.
class DetTrendInference final : public InferenceModel {
 public:
  DetTrendInference(PriceSeries prices, TrendSpec spec, PriorSpec prior, SolverConfig solver,
                    DetTrendOptions options = {}, double capacity = kDefaultCapacity,
                    double annual_rate = kDefaultAnnualRate);

  std::string kind() const override { return spec_.name(); }
  std::size_t dim() const override { return 2 + spec_.coefficient_count(); }
  std::vector<std::string> names() const override;
  std::vector<double> to_natural(std::span<const double> theta) const override;
  std::vector<double> to_transformed(std::span<const double> natural) const override;
  double log_prior(std::span<const double> theta) const override;
  LikelihoodEval log_likelihood(std::span<const double> theta, std::uint64_t seed) const override;
  bool exact() const override { return true; }
  // delta and b from the prior; trend coefficients by least squares of the
  // log prices on the basis.
  std::vector<double> initial(std::uint64_t seed) const override;

  const TrendSpec& spec() const { return spec_; }
  ModelParams params_at(std::span<const double> natural) const;
  DetTrendParams det_params_at(std::span<const double> natural) const;
  const DetTrendOptions& options() const { return options_; }
  const SolverConfig& solver_config() const { return solver_; }

 private:
  PriceSeries prices_;
  TrendSpec spec_;
  PriorSpec prior_;
  SolverConfig solver_;
  DetTrendOptions options_;
  double capacity_;
  double rate_;
  // Least-squares standard errors of the trend coefficients. The sampler sees
  // each coefficient divided by its scale, so one proposal size and one
  // covariance floor suit an intercept and a monthly slope alike.
  std::vector<double> coef_scale_;
};

struct AdaptOptions {
  std::size_t warm_start = 200;
  double initial_scale = 0.01;  // diagonal of the initial proposal covariance
  double epsilon = 1e-8;
};

// Proposal covariance after `iteration` draws (draws[0..iteration-1]). Below
// the warm start it is initial_scale * I; during burn-in it is
// 2.38^2 / d (cov + epsilon I); at or after burn-in `current` is returned
// unchanged.
Eigen::MatrixXd adapt_proposal(const std::vector<std::vector<double>>& draws,
                               std::size_t iteration, std::size_t burn_in,
                               const Eigen::MatrixXd& current, const AdaptOptions& options);

// log min(1, ratio) for a symmetric proposal.
double mh_log_acceptance(double log_lik_new, double log_prior_new, double log_lik_old,
                         double log_prior_old);

struct SamplerOptions {
  std::size_t iterations = 12000;
  std::size_t burn_in = 2000;
  std::uint64_t seed = 1;
  AdaptOptions adapt;
  // Starting point on the natural scale; empty uses model.initial().
  std::vector<double> initial;
  // Iterations between stored proposal covariance snapshots.
  std::size_t snapshot_every = 500;
  // Progress lines on stderr every this many iterations; 0 disables.
  std::size_t progress_every = 0;
};

struct ProposalSnapshot {
  std::size_t iteration;
  Eigen::MatrixXd covariance;
};

struct SolverFailure {
  std::size_t iteration;
  std::string reason;
};

struct Chain {
  std::vector<std::string> names;
  std::vector<std::vector<double>> draws;        // natural scale, M x dim
  std::vector<std::vector<double>> transformed;  // M x dim
  std::vector<double> log_lik;                   // estimate stored with each draw
  std::vector<double> log_prior;                 // transformed-space prior at each draw
  std::vector<char> accepted;
  std::vector<ProposalSnapshot> snapshots;
  Eigen::MatrixXd final_proposal;
  std::vector<SolverFailure> failures;
  std::uint64_t seed = 0;
  std::size_t burn_in = 0;

  std::size_t size() const { return draws.size(); }
  std::size_t dim() const { return names.size(); }
  double acceptance_rate() const;
  double post_burn_in_acceptance_rate() const;
  // Column j of the post-burn-in natural-scale draws.
  std::vector<double> column(std::size_t j) const;

  // One row per iteration: iteration,<names>,log_lik,accepted.
  void write_csv(const std::filesystem::path& path) const;
};

// Random-walk Metropolis-Hastings with adaptive proposal covariance during
// burn-in. With a simulated likelihood this is particle marginal MH: the
// incumbent keeps the estimate it was accepted with.
Chain run_mh(const InferenceModel& model, const SamplerOptions& options);
Chain pmmh(const InferenceModel& model, const SamplerOptions& options);
Chain mh_exact(const InferenceModel& model, const SamplerOptions& options);

struct McmcEss {
  double value;
  // True when the chain has zero variance; value is then 1.
  bool degenerate;
};

// Geyer initial monotone sequence estimator.
McmcEss mcmc_ess(std::span<const double> draws);

struct ParameterSummary {
  std::string name;
  double mean;
  double sd;
  double ess;
  double q025;
  double q975;
};

struct PosteriorSummary {
  std::vector<ParameterSummary> parameters;
  std::size_t draws = 0;
  double acceptance_rate = 0.0;
};

// Moments over the post-burn-in draws (sd with divisor n - 1).
PosteriorSummary posterior_summary(const Chain& chain);

// Sample quantile with linear interpolation between order statistics.
double sample_quantile(std::vector<double> values, double q);

}  // namespace storagessm
