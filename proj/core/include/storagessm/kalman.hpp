#pragma once

#include <vector>

#include "storagessm/ssm.hpp"

namespace storagessm {

// Local-level model p_t = k_t + e_t, e_t ~ N(0, b^2), k_t = k_{t-1} + u_t,
// u_t ~ N(0, v^2). This is the storage model without storage (z_t enters
// prices directly through log f(x) = -b x).
struct LgllParams {
  double b = 0.4;
  double v = 0.05;

  void validate() const;
};

// k_1 ~ N(p_1, kDiffuseScale * b^2) before p_1 is observed.
inline constexpr double kDiffuseScale = 1e6;

struct KalmanOutput {
  // Sum over t = 2..T of log N(p_t; prediction, F_t).
  double log_lik = 0.0;
  std::vector<double> loglik_contrib;  // length T, entry 0 is zero

  // Filtered moments of k_t given p_1:t (length T).
  std::vector<double> filtered_mean;
  std::vector<double> filtered_var;
  // One-step predictions for t = 2..T (length T - 1).
  std::vector<double> predicted_mean;  // E(k_t | p_1:t-1) = E(p_t | p_1:t-1)
  std::vector<double> predicted_var;   // Var(k_t | p_1:t-1)
  std::vector<double> innovation_var;  // F_t = Var(p_t | p_1:t-1)
  std::vector<double> gain;
};

KalmanOutput kalman_filter(const LgllParams& params, const PriceSeries& prices);
double kalman_loglik(const LgllParams& params, const PriceSeries& prices);

struct Residuals {
  std::vector<double> pearson;
  std::vector<double> pit;
  std::size_t pit_clamped = 0;
};

// Standardised one-step prediction errors and their Gaussian PIT transform
// (length T - 1).
Residuals lgll_residuals(const LgllParams& params, const PriceSeries& prices);

struct KalmanSmootherOutput {
  std::vector<double> mean;  // E(k_t | p_1:T)
  std::vector<double> var;
};

// Rauch-Tung-Striebel smoother.
KalmanSmootherOutput kalman_smoother(const LgllParams& params, const PriceSeries& prices);

// The local-level model in the particle-filter interface, with the trend as
// the state: k_1 ~ N(p_1, b^2) (the posterior under a flat prior after
// seeing p_1), k_t = k_{t-1} + u_t and p_t ~ N(k_t, b^2).
class LgllSsm final : public StateSpaceModel {
 public:
  LgllSsm(LgllParams params, double first_log_price);

  const LgllParams& params() const { return params_; }
  double sample_initial(const DrawSource& draw) const override;
  double sample_transition(double x_prev, const DrawSource& draw) const override;
  double transition_log_density(double x, double x_prev) const override;
  double measurement_mean(double, double x, double) const override { return x; }
  double measurement_sd() const override { return params_.b; }
  double trend_component(double, double x) const override { return x; }

 private:
  LgllParams params_;
  double first_;
};

// Draws p_1..p_T from the local-level model with k_0 = 0.
std::vector<double> simulate_lgll(const LgllParams& params, std::size_t length,
                                  std::uint64_t seed);

}  // namespace storagessm
