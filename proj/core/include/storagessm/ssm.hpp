#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "storagessm/equilibrium.hpp"
#include "storagessm/numerics.hpp"
#include "storagessm/rng.hpp"

namespace storagessm {

struct YearMonth {
  int year = 2000;
  int month = 1;  // 1..12

  int index() const { return year * 12 + (month - 1); }
  static YearMonth from_index(int idx) { return {idx / 12, idx % 12 + 1}; }
  YearMonth next() const { return from_index(index() + 1); }
  std::string str() const;
  friend bool operator==(const YearMonth&, const YearMonth&) = default;
};

// Monthly log prices. Dates are strictly increasing.
struct PriceSeries {
  std::vector<YearMonth> dates;
  std::vector<double> log_prices;
  std::string label;

  std::size_t size() const { return log_prices.size(); }
  // Throws InvalidArgument unless length >= 2, lengths agree, prices are
  // finite and dates strictly increase.
  void validate() const;

  // Consecutive monthly dates starting at `start`.
  static PriceSeries from_log_prices(std::vector<double> log_prices, std::string label = "series",
                                     YearMonth start = {2000, 1});
};

// State-space model with a scalar latent state and a Gaussian measurement
// density, consumed generically by the particle filter. The measurement may
// depend on the previous price and on both the previous and current state.
class StateSpaceModel {
 public:
  virtual ~StateSpaceModel() = default;

  virtual double sample_initial(const DrawSource& draw) const = 0;
  virtual double sample_transition(double x_prev, const DrawSource& draw) const = 0;
  virtual double transition_log_density(double x, double x_prev) const = 0;
  // Mean and standard deviation of p_t given p_{t-1}, x_t and x_{t-1}.
  virtual double measurement_mean(double p_prev, double x, double x_prev) const = 0;
  virtual double measurement_sd() const = 0;
  virtual double measurement_log_density(double p, double p_prev, double x, double x_prev) const {
    return normal_log_density(p, measurement_mean(p_prev, x, x_prev), measurement_sd());
  }
  // Trend level k_t implied by the log price and the state at t.
  virtual double trend_component(double p, double x) const = 0;
  virtual std::size_t state_dim() const { return 1; }
};

// Stochastic-trend storage model:
//   p_t = p_{t-1} + log f(x_t) - log f(x_{t-1}) + eps_t,  eps_t ~ N(0, v^2)
//   x_t = (1 - delta) sigma(x_{t-1}) + z_t,                z_t ~ N(0, 1)
// with x_1 uniform on (-2, C + 2).
class StorageSsm final : public StateSpaceModel {
 public:
  explicit StorageSsm(std::shared_ptr<const EquilibriumSolution> solution);

  const EquilibriumSolution& solution() const { return *solution_; }
  const ModelParams& params() const { return solution_->params(); }

  double transition_mean(double x_prev) const {
    return (1.0 - params().delta) * solution_->storage_policy(x_prev);
  }
  double sample_initial(const DrawSource& draw) const override;
  double sample_transition(double x_prev, const DrawSource& draw) const override;
  double transition_log_density(double x, double x_prev) const override;
  double measurement_mean(double p_prev, double x, double x_prev) const override {
    return p_prev + solution_->log_price(x) - solution_->log_price(x_prev);
  }
  double measurement_sd() const override { return params().v; }
  double measurement_density(double p, double p_prev, double x, double x_prev) const;
  double trend_component(double p, double x) const override { return p - solution_->log_price(x); }

 private:
  std::shared_ptr<const EquilibriumSolution> solution_;
};

struct SimulatedPath {
  std::vector<double> log_prices;
  std::vector<double> states;  // x_t
  std::vector<double> trend;   // k_t
  std::vector<double> trend_shocks;
  std::vector<double> supply_shocks;
  std::uint64_t seed = 0;

  PriceSeries series(std::string label = "simulated", YearMonth start = {2000, 1}) const;
  // Columns: t,log_price,k,x,regime.
  void write_csv(const std::filesystem::path& path, const EquilibriumSolution& sol) const;
};

// Simulates burn_in + length steps from x_0 ~ U(-2, C + 2), k_0 = 0, and
// keeps the last `length`. params.v may be zero (constant trend).
SimulatedPath simulate(const ModelParams& params, const EquilibriumSolution& sol,
                       std::size_t length, std::size_t burn_in, std::uint64_t seed);

const char* regime_name(Regime regime);

}  // namespace storagessm
