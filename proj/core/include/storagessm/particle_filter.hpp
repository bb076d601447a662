#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "storagessm/rng.hpp"
#include "storagessm/ssm.hpp"

namespace storagessm {

// h(x_t, x_{t+1}); its mean is taken under the filtering weights at t with
// x_{t+1} drawn from the transition density.
using Functional = std::function<double(double x_t, double x_next)>;

struct FilterOptions {
  std::size_t particles = 10000;
  std::uint64_t seed = 1;
  // Resample when ESS < resample_fraction * N. Zero disables resampling.
  double resample_fraction = 0.5;
  // Keep (x_t^k, W_t^k) for every period; required by the smoother.
  bool store_history = false;
  // Pearson/PIT residuals, filtered log f means and credible bands.
  bool diagnostics = true;
  double band_level = 0.95;
  // 0 uses the OpenMP default. Results do not depend on this value.
  int threads = 1;
};

// Weighted particle cloud at one period: previous and current states plus
// normalised weights.
struct ParticleSystem {
  std::vector<double> x_prev;
  std::vector<double> x;
  std::vector<double> weights;

  std::size_t size() const { return x.size(); }
  // 1 / sum W^2.
  double ess() const;
};

struct ParticleHistory {
  // states[t][k] and weights[t][k] (normalised, before resampling), t = 0..T-1.
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> weights;

  std::size_t periods() const { return states.size(); }
  bool empty() const { return states.empty(); }
};

struct FilterOutput {
  double log_lik = 0.0;
  // Per period; entry 0 is zero because the likelihood conditions on p_1.
  std::vector<double> loglik_contrib;
  std::vector<double> ess;
  std::vector<char> resampled;

  // Filtered E(log f(x_t)|p_1:t), E(k_t|p_1:t), E(x_t|p_1:t) and credible
  // band endpoints (weighted quantiles) for log f(x_t) and k_t. log f(x_t)
  // stands for p_t - k_t in any model.
  std::vector<double> logf_mean;
  std::vector<double> trend_mean;
  std::vector<double> state_mean;
  std::vector<double> logf_lower;
  std::vector<double> logf_upper;
  std::vector<double> trend_lower;
  std::vector<double> trend_upper;

  // functional_means[i][t] = E(h_i(x_t, x_{t+1}) | p_1:t).
  std::vector<std::vector<double>> functional_means;

  // Residuals for periods 2..T (length T - 1).
  std::vector<double> pearson;
  std::vector<double> pit;
  std::size_t pit_clamped = 0;

  ParticleHistory history;

  // Columns: t,loglik_contrib,trend_mean,logf_mean,trend_lower,trend_upper,
  // logf_lower,logf_upper,pearson,pit (residuals blank at t = 1).
  void write_csv(const std::filesystem::path& path) const;
};

// Bootstrap particle filter. The log likelihood is conditional on the first
// observation. Throws FilterDegeneracyError when every weight underflows.
FilterOutput bpf(const StateSpaceModel& model, const PriceSeries& prices,
                 const FilterOptions& options, std::span<const Functional> functionals = {});

// Systematic resampling: count of index k is floor(N W_k) or ceil(N W_k).
// `u` is the single uniform offset in [0, 1).
std::vector<std::size_t> systematic_resample(std::span<const double> weights, double u);
std::vector<std::size_t> systematic_resample(std::span<const double> weights,
                                             std::size_t count, double u);

// sum_k h(x_prev^k, x^k) W^k over a particle system.
double filtered_functional(const ParticleSystem& system, const Functional& h);

// Weighted empirical quantile (lowest value whose cumulative weight reaches q).
double weighted_quantile(std::span<const double> values, std::span<const double> weights,
                         double q);

struct PredictiveMoments {
  double mean;
  double variance;
  double pit_u;
};

// Moments of p_{t+1} given p_1:t from a system whose x_prev are the filtered
// particles at t and x the propagated ones, and Pr(p_{t+1} <= observed). For
// the storage model the variance is Var(log f(x_{t+1}) / f(x_t)) + v^2.
PredictiveMoments predictive_moments(const StateSpaceModel& model, const ParticleSystem& system,
                                     double p_t, double p_next_observed);

// Pearson residual [p - E(p)] / sd(p). Throws DomainError when variance <= 0.
double pearson_residual(double observed, double mean, double variance);

struct PitResidual {
  double value;
  bool clamped;
};
inline constexpr double kPitClamp = 1e-10;
// Phi^{-1}(u) with u clamped to [1e-10, 1 - 1e-10].
PitResidual pit_residual(double u);

struct SmootherOutput {
  // draws[m][t]: state of backward trajectory m at period t.
  std::vector<std::vector<double>> draws;
  // indices[m][t]: particle index selected at period t.
  std::vector<std::vector<std::size_t>> indices;
  std::vector<double> logf_mean;   // E(log f(x_t) | p_1:T)
  std::vector<double> trend_mean;  // p_t - logf_mean[t]
};

// Backward-sampling particle smoother over a stored filter history.
// logf_mean averages the backward kernel probabilities of every trajectory,
// so at t = T it equals the filtered mean exactly.
SmootherOutput particle_smoother(const StateSpaceModel& model, const PriceSeries& prices,
                                 const ParticleHistory& history, std::size_t trajectories,
                                 std::uint64_t seed);

}  // namespace storagessm
