#include "storagessm/kalman.hpp"

#include <cmath>

#include "storagessm/errors.hpp"
#include "storagessm/numerics.hpp"
#include "storagessm/particle_filter.hpp"

namespace storagessm {

void LgllParams::validate() const {
  if (!(b > 0.0) || !std::isfinite(b)) throw InvalidArgument("LGLL: b must be positive");
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("LGLL: v must be positive");
}

KalmanOutput kalman_filter(const LgllParams& params, const PriceSeries& prices) {
  params.validate();
  prices.validate();
  const auto& p = prices.log_prices;
  const std::size_t n = p.size();
  const double h = params.b * params.b;
  const double q = params.v * params.v;

  KalmanOutput out;
  out.loglik_contrib.assign(n, 0.0);
  out.filtered_mean.resize(n);
  out.filtered_var.resize(n);
  out.predicted_mean.reserve(n - 1);
  out.predicted_var.reserve(n - 1);
  out.innovation_var.reserve(n - 1);
  out.gain.reserve(n - 1);

  const double p0 = kDiffuseScale * h;
  // The prior is centred on p_1, so updating with p_1 leaves the mean there.
  double a = p[0];
  double var = p0 * h / (p0 + h);
  out.filtered_mean[0] = a;
  out.filtered_var[0] = var;

  for (std::size_t t = 1; t < n; ++t) {
    const double pred_var = var + q;
    const double f = pred_var + h;
    const double e = p[t] - a;
    const double k = pred_var / f;
    out.predicted_mean.push_back(a);
    out.predicted_var.push_back(pred_var);
    out.innovation_var.push_back(f);
    out.gain.push_back(k);
    out.loglik_contrib[t] = -kLogSqrt2Pi - 0.5 * std::log(f) - 0.5 * e * e / f;
    out.log_lik += out.loglik_contrib[t];
    a += k * e;
    var = pred_var * h / f;
    out.filtered_mean[t] = a;
    out.filtered_var[t] = var;
  }
  return out;
}

double kalman_loglik(const LgllParams& params, const PriceSeries& prices) {
  return kalman_filter(params, prices).log_lik;
}

Residuals lgll_residuals(const LgllParams& params, const PriceSeries& prices) {
  const KalmanOutput kf = kalman_filter(params, prices);
  const auto& p = prices.log_prices;
  Residuals out;
  out.pearson.reserve(kf.predicted_mean.size());
  out.pit.reserve(kf.predicted_mean.size());
  for (std::size_t i = 0; i < kf.predicted_mean.size(); ++i) {
    const double eta = pearson_residual(p[i + 1], kf.predicted_mean[i], kf.innovation_var[i]);
    out.pearson.push_back(eta);
    // Transform through the side with the smaller tail probability.
    const PitResidual xi = pit_residual(normal_cdf(-std::abs(eta)));
    out.pit.push_back(eta > 0.0 ? -xi.value : xi.value);
    if (xi.clamped) ++out.pit_clamped;
  }
  return out;
}

KalmanSmootherOutput kalman_smoother(const LgllParams& params, const PriceSeries& prices) {
  const KalmanOutput kf = kalman_filter(params, prices);
  const std::size_t n = kf.filtered_mean.size();
  KalmanSmootherOutput out;
  out.mean = kf.filtered_mean;
  out.var = kf.filtered_var;
  for (std::size_t t = n - 1; t-- > 0;) {
    // Predicted moments of k_{t+1} are stored at index t.
    const double j = kf.filtered_var[t] / kf.predicted_var[t];
    out.mean[t] = kf.filtered_mean[t] + j * (out.mean[t + 1] - kf.predicted_mean[t]);
    out.var[t] = kf.filtered_var[t] + j * j * (out.var[t + 1] - kf.predicted_var[t]);
  }
  return out;
}

LgllSsm::LgllSsm(LgllParams params, double first_log_price)
    : params_(params), first_(first_log_price) {
  params_.validate();
}

double LgllSsm::sample_initial(const DrawSource& draw) const {
  return first_ + params_.b * draw.normal();
}

double LgllSsm::sample_transition(double x_prev, const DrawSource& draw) const {
  return x_prev + params_.v * draw.normal();
}

double LgllSsm::transition_log_density(double x, double x_prev) const {
  return normal_log_density(x, x_prev, params_.v);
}

std::vector<double> simulate_lgll(const LgllParams& params, std::size_t length,
                                  std::uint64_t seed) {
  params.validate();
  const CounterRng rng(seed, Stream::kSimulation);
  std::vector<double> p(length);
  double k = 0.0;
  for (std::size_t t = 0; t < length; ++t) {
    k += params.v * rng.normal(t + 1, 1);
    p[t] = k - params.b * rng.normal(t + 1, 0);
  }
  return p;
}

}  // namespace storagessm
