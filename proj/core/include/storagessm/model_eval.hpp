#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "storagessm/samplers.hpp"

namespace storagessm {

struct MarginalLikResult {
  double log_marginal = 0.0;
  double log_lik = 0.0;        // at theta_bar
  double log_prior = 0.0;      // at theta_bar, transformed space
  double log_ordinate = 0.0;   // estimated log posterior density at theta_bar
  double log_numerator = 0.0;  // log mean of alpha(theta_i -> theta_bar) Q(theta_bar | theta_i)
  double log_denominator = 0.0;  // log mean of alpha(theta_bar -> theta_l)
  std::size_t m = 0;
  std::size_t l = 0;
  std::vector<double> theta_bar;  // transformed space
};

// log_marginal = log_lik + log_prior - log_ordinate.
MarginalLikResult assemble_marginal(double log_lik, double log_prior, double log_ordinate);

struct ChibOptions {
  // Proposal draws for the denominator; 0 uses the number of posterior draws.
  std::size_t l = 0;
  std::uint64_t seed = 1;
  int threads = 1;
};

// Chib and Jeliazkov estimate of the log marginal likelihood from a chain,
// evaluated at the transformed posterior mean with the chain's final
// proposal covariance. The numerator reuses the chain's stored likelihood
// values; the likelihood at theta_bar is computed once.
MarginalLikResult chib_jeliazkov(const Chain& chain, const InferenceModel& model,
                                 const ChibOptions& options);

double log_bayes_factor(const MarginalLikResult& a, const MarginalLikResult& b);

// log density of N(mean, cov) at x, given the lower Cholesky factor of cov.
double mvn_log_density(std::span<const double> x, std::span<const double> mean,
                       const Eigen::MatrixXd& chol_lower);

struct JarqueBera {
  double skewness;
  double kurtosis;
  double statistic;
  double p_value;
};

// Moments use divisor n; p-value from chi-squared with 2 degrees of freedom.
JarqueBera jarque_bera(std::span<const double> residuals);

struct LjungBox {
  double rho1;
  double statistic;
  double p_value;
};

LjungBox ljung_box(std::span<const double> residuals, std::size_t lags = 12);

// Lag-k sample autocorrelation (divisor n in both moments).
double autocorrelation(std::span<const double> x, std::size_t lag);

// Annual storage cost as percent of the average price, -[(1 - delta)^12 - 1] * 100.
double storage_cost_annual(double delta);
// -1 / (b x_bar).
double price_elasticity(double b, double x_bar);

}  // namespace storagessm
