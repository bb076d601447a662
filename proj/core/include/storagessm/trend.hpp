#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "storagessm/equilibrium.hpp"
#include "storagessm/kalman.hpp"
#include "storagessm/ssm.hpp"

namespace storagessm {

enum class TrendKind { kStochastic, kLinear, kRcs };

struct TrendSpec {
  TrendKind kind = TrendKind::kLinear;
  // Interior knots as quantiles of the time index, strictly inside (0, 1).
  std::vector<double> knot_quantiles;

  static TrendSpec stochastic() { return {TrendKind::kStochastic, {}}; }
  static TrendSpec linear() { return {TrendKind::kLinear, {}}; }
  static TrendSpec rcs3() { return {TrendKind::kRcs, {0.25, 0.5, 0.75}}; }
  static TrendSpec rcs7() {
    return {TrendKind::kRcs, {0.125, 0.25, 0.375, 0.5, 0.675, 0.75, 0.875}};
  }

  // Number of trend coefficients: 2 for linear, knots + 2 for rcs, 0 for the
  // stochastic trend.
  std::size_t coefficient_count() const;
  std::string name() const;
  void validate() const;
};

// Knot positions on the time index 1..T: the boundary points 1 and T plus
// the nearest-rank quantiles ceil(q T). Throws InvalidArgument when they are
// not distinct.
std::vector<double> rcs_knots(std::span<const double> quantiles, std::size_t length);

// Restricted cubic spline terms (truncated-power form, linear beyond the
// boundary knots) at time t, each scaled by 1 / (last - first knot)^2.
std::vector<double> rcs_terms(std::span<const double> knots, double t);

// T x G design matrix over t = 1..T. Linear: (1, t). rcs: (1, t, spline
// terms).
Eigen::MatrixXd trend_basis(const TrendSpec& spec, std::size_t length);

std::vector<double> fitted_trend(const TrendSpec& spec, std::span<const double> coefficients,
                                 std::size_t length);

struct DetTrendParams {
  double delta = 0.0112;
  double b = 0.4196;
  std::vector<double> coefficients;
};

struct DetTrendOptions {
  // Include log |dz_t / dp_t| in each contribution. Off gives the variant
  // that sums standard normal log densities of the implied shocks only.
  bool jacobian = true;
  // Stock-units margin beyond the kink points over which f is inverted.
  double inversion_margin = EquilibriumSolution::kDefaultInversionMargin;
  // A clamped inversion adds -0.5 * clamp_penalty * distance^2.
  double clamp_penalty = 1e4;
};

struct DetTrendEvaluation {
  double log_lik = 0.0;
  std::vector<double> loglik_contrib;  // length T, entry 0 carries only clamp penalties
  std::vector<double> trend;           // k_t
  std::vector<double> states;          // recovered x_t
  std::vector<double> shocks;          // z_t for t = 2..T (length T - 1)
  std::size_t clamped = 0;
};

// Exact likelihood of p_t = k_t + log f((1 - delta) sigma(x_{t-1}) + z_t),
// conditioned on p_1. `sol` must be solved for (params.delta, params.b).
DetTrendEvaluation det_trend_evaluate(const DetTrendParams& params, const TrendSpec& spec,
                                      const EquilibriumSolution& sol, const PriceSeries& prices,
                                      const DetTrendOptions& options = {});
double det_trend_loglik(const DetTrendParams& params, const TrendSpec& spec,
                        const EquilibriumSolution& sol, const PriceSeries& prices,
                        const DetTrendOptions& options = {});

// Pearson residuals from n_mc simulated one-step-ahead prices per period and
// exact PIT residuals (the implied shocks), both of length T - 1.
Residuals det_trend_residuals(const DetTrendParams& params, const TrendSpec& spec,
                              const EquilibriumSolution& sol, const PriceSeries& prices,
                              std::size_t n_mc, std::uint64_t seed,
                              const DetTrendOptions& options = {});

// Columns: t,date,log_price,trend,logf.
void write_trend_csv(const std::filesystem::path& path, const PriceSeries& prices,
                     std::span<const double> trend);

}  // namespace storagessm
