#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "storagessm/model_params.hpp"

namespace storagessm {

struct SolverConfig {
  std::size_t grid_size = 200;
  std::size_t quad_nodes = 128;  // trapezoid subintervals
  double quad_lo = -4.0;
  double quad_hi = 4.0;
  double policy_tol = 1e-10;
  int max_iters = 500;
  double root_tol = 1e-10;

  void validate() const;
};

// Trapezoid rule for integrals against the standard normal density on
// [lo, hi]. Weights already include phi(z); the truncated mass is not
// renormalised.
class NormalQuadrature {
 public:
  NormalQuadrature(std::size_t subintervals, double lo, double hi);

  std::span<const double> nodes() const { return nodes_; }
  std::span<const double> weights() const { return weights_; }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

inline double inverse_demand(const ModelParams& params, double x) {
  return params.demand_scale * std::exp(-params.b * x);
}

// Inverse of `inverse_demand`. Throws DomainError for p <= 0.
double demand(const ModelParams& params, double p);

// Storage regime label of a stock level.
enum class Regime { kStockOut, kStorage, kFullCapacity };

// Converged numerical policy: sigma(x) = 0 below x_star, C above x_star2, and
// a piecewise-linear interpolant of s_values on a uniform grid in between.
// Immutable after construction and safe to share between threads.
class EquilibriumSolution {
 public:
  EquilibriumSolution(ModelParams params, SolverConfig config, double x_star, double x_star2,
                      std::vector<double> s_values, int iterations, double final_residual);

  const ModelParams& params() const { return params_; }
  const SolverConfig& config() const { return config_; }
  double x_star() const { return x_star_; }
  double x_star2() const { return x_star2_; }
  std::span<const double> s_values() const { return s_values_; }
  std::vector<double> grid() const;
  double grid_point(std::size_t j) const { return x_star_ + static_cast<double>(j) * step_; }
  int iterations() const { return iterations_; }
  double final_residual() const { return final_residual_; }

  // sigma(x), in [0, C] and nondecreasing in x.
  double storage_policy(double x) const;
  // f(x) = P(x - sigma(x)).
  double price(double x) const;
  // log f(x), computed without an exp/log round trip.
  double log_price(double x) const;
  // d log f / dx. Uses the slope of the interpolation segment to the right of
  // x (one-sided at grid nodes and kinks).
  double log_price_slope(double x) const;
  // fbar(x) = beta * E[f((1 - delta) sigma(x) + z)], by the configured
  // trapezoid rule.
  double expected_next_price(double x) const;
  Regime regime(double x) const;

  // Result of inverting the price function.
  struct Inversion {
    double x;
    bool clamped;
    // Distance in stock units between the exact preimage and the clamped
    // value; zero when not clamped.
    double clamp_distance;
  };

  // Unique x with f(x) = p on [min(x_star, 0) - margin, max(x_star2, C) +
  // margin]. Prices outside f's range over that domain are clamped to the
  // boundary and flagged.
  Inversion inverse_price(double p, double margin = kDefaultInversionMargin) const;
  // Same, from log p.
  Inversion inverse_log_price(double log_p, double margin = kDefaultInversionMargin) const;

  static constexpr double kDefaultInversionMargin = 8.0;

  // Writes columns x,sigma,f for `points` equally spaced stock levels on
  // [x_star - pad, x_star2 + pad].
  void write_csv(const std::filesystem::path& path, std::size_t points = 401,
                 double pad = 3.0) const;

 private:
  ModelParams params_;
  SolverConfig config_;
  double x_star_;
  double x_star2_;
  double step_;
  double inv_step_;
  std::vector<double> s_values_;
  int iterations_;
  double final_residual_;
  NormalQuadrature quadrature_;
};

// Time iteration on the storage policy with kink points updated every sweep
// and the grid re-laid on [x*, x**]. Throws NonConvergenceError when
// max_iters is exhausted and RootFindError when a grid point cannot be solved.
EquilibriumSolution solve_equilibrium(const ModelParams& params, const SolverConfig& config = {});

// Right-hand side of the grid equation s = x - D(beta * E f(.)), evaluated
// with the solution's own price function. Used to check self-consistency.
double fixed_point_rhs(const EquilibriumSolution& sol, double x, double s);

}  // namespace storagessm
