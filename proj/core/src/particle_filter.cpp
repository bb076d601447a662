#include "storagessm/particle_filter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "storagessm/errors.hpp"
#include "storagessm/numerics.hpp"

namespace storagessm {

namespace {

int resolve_threads(int requested) {
#ifdef _OPENMP
  return requested > 0 ? requested : omp_get_max_threads();
#else
  (void)requested;
  return 1;
#endif
}

struct Band {
  double lower;
  double upper;
};

Band weighted_band(std::span<const double> values, std::span<const double> weights,
                   double level, std::vector<std::size_t>& order) {
  order.resize(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b] || (values[a] == values[b] && a < b);
  });
  const double q_lo = 0.5 * (1.0 - level);
  const double q_hi = 1.0 - q_lo;
  double cum = 0.0;
  double lower = values[order.front()];
  double upper = values[order.back()];
  bool have_lower = false;
  for (std::size_t idx : order) {
    cum += weights[idx];
    if (!have_lower && cum >= q_lo) {
      lower = values[idx];
      have_lower = true;
    }
    if (cum >= q_hi) {
      upper = values[idx];
      break;
    }
  }
  return {lower, upper};
}

std::size_t sample_index(std::span<const double> weights, double u) {
  double cum = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    cum += weights[k];
    if (u < cum) return k;
  }
  // Rounding left u above the total: take the last positive weight.
  for (std::size_t k = weights.size(); k-- > 0;)
    if (weights[k] > 0.0) return k;
  return weights.size() - 1;
}

}  // namespace

double ParticleSystem::ess() const {
  double sq = 0.0;
  for (double w : weights) sq += w * w;
  return 1.0 / sq;
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, double u) {
  return systematic_resample(weights, weights.size(), u);
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights,
                                             std::size_t count, double u) {
  std::vector<std::size_t> idx(count);
  if (weights.empty() || count == 0) return idx;
  const double step = 1.0 / static_cast<double>(count);
  double cum = weights[0];
  std::size_t k = 0;
  const std::size_t last = weights.size() - 1;
  for (std::size_t m = 0; m < count; ++m) {
    const double target = (static_cast<double>(m) + u) * step;
    while (target >= cum && k < last) cum += weights[++k];
    idx[m] = k;
  }
  return idx;
}

double filtered_functional(const ParticleSystem& system, const Functional& h) {
  double acc = 0.0;
  for (std::size_t k = 0; k < system.size(); ++k)
    acc += h(system.x_prev[k], system.x[k]) * system.weights[k];
  return acc;
}

double weighted_quantile(std::span<const double> values, std::span<const double> weights,
                         double q) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  double cum = 0.0;
  for (std::size_t idx : order) {
    cum += weights[idx];
    if (cum >= q) return values[idx];
  }
  return values[order.back()];
}

PredictiveMoments predictive_moments(const StateSpaceModel& model, const ParticleSystem& system,
                                     double p_t, double p_next_observed) {
  const double sd = model.measurement_sd();
  const std::size_t n = system.size();
  std::vector<double> means(n);
  double mean = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    means[k] = model.measurement_mean(p_t, system.x[k], system.x_prev[k]);
    mean += system.weights[k] * means[k];
  }
  double spread = 0.0;
  double u = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = means[k] - mean;
    spread += system.weights[k] * d * d;
    u += system.weights[k] * normal_cdf((p_next_observed - means[k]) / sd);
  }
  return {mean, spread + sd * sd, u};
}

double pearson_residual(double observed, double mean, double variance) {
  if (!(variance > 0.0)) throw DomainError("pearson_residual: nonpositive predictive variance");
  return (observed - mean) / std::sqrt(variance);
}

PitResidual pit_residual(double u) {
  bool clamped = false;
  if (u < kPitClamp) {
    u = kPitClamp;
    clamped = true;
  } else if (u > 1.0 - kPitClamp) {
    u = 1.0 - kPitClamp;
    clamped = true;
  }
  return {normal_quantile(u), clamped};
}

FilterOutput bpf(const StateSpaceModel& model, const PriceSeries& prices,
                 const FilterOptions& options, std::span<const Functional> functionals) {
  prices.validate();
  const std::size_t n = options.particles;
  if (n < 2) throw InvalidArgument("bpf: need at least 2 particles");
  const std::size_t periods = prices.size();
  const auto& p = prices.log_prices;
  const int threads = resolve_threads(options.threads);
  const CounterRng rng(options.seed, Stream::kFilter);
  const CounterRng resample_rng(options.seed, Stream::kResample);
  const double log_n = std::log(static_cast<double>(n));
  const double resample_below = options.resample_fraction * static_cast<double>(n);

  FilterOutput out;
  out.loglik_contrib.assign(periods, 0.0);
  out.ess.assign(periods, 0.0);
  out.resampled.assign(periods, 0);
  out.functional_means.assign(functionals.size(), std::vector<double>(periods, 0.0));
  if (options.diagnostics) {
    out.logf_mean.assign(periods, 0.0);
    out.trend_mean.assign(periods, 0.0);
    out.state_mean.assign(periods, 0.0);
    out.logf_lower.assign(periods, 0.0);
    out.logf_upper.assign(periods, 0.0);
    out.trend_lower.assign(periods, 0.0);
    out.trend_upper.assign(periods, 0.0);
    out.pearson.reserve(periods - 1);
    out.pit.reserve(periods - 1);
  }

  ParticleSystem sys;
  sys.x.resize(n);
  sys.x_prev.resize(n);
  sys.weights.assign(n, 1.0 / static_cast<double>(n));
  std::vector<double> log_w(n, -log_n);
  std::vector<double> logf(n);
  std::vector<std::size_t> order;

#pragma omp parallel for num_threads(threads) schedule(static) if (threads > 1)
  for (std::size_t k = 0; k < n; ++k) sys.x[k] = model.sample_initial(DrawSource(rng, 0, k));

  const auto record_filtered = [&](std::size_t t) {
    out.ess[t] = sys.ess();
    if (options.store_history) {
      out.history.states.push_back(sys.x);
      out.history.weights.push_back(sys.weights);
    }
    if (!options.diagnostics) return;
    double lf = 0.0, xm = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      logf[k] = p[t] - model.trend_component(p[t], sys.x[k]);
      lf += sys.weights[k] * logf[k];
      xm += sys.weights[k] * sys.x[k];
    }
    const Band band = weighted_band(logf, sys.weights, options.band_level, order);
    out.logf_mean[t] = lf;
    out.state_mean[t] = xm;
    out.trend_mean[t] = p[t] - lf;
    out.logf_lower[t] = band.lower;
    out.logf_upper[t] = band.upper;
    out.trend_lower[t] = p[t] - band.upper;
    out.trend_upper[t] = p[t] - band.lower;
  };
  record_filtered(0);

  const auto functional_step = [&](std::size_t t) {
    for (std::size_t i = 0; i < functionals.size(); ++i)
      out.functional_means[i][t] = filtered_functional(sys, functionals[i]);
  };

  std::vector<double> log_g(n);
  for (std::size_t t = 1; t < periods; ++t) {
    sys.x_prev.swap(sys.x);
#pragma omp parallel for num_threads(threads) schedule(static) if (threads > 1)
    for (std::size_t k = 0; k < n; ++k) {
      sys.x[k] = model.sample_transition(sys.x_prev[k], DrawSource(rng, t, k));
      log_g[k] = model.measurement_log_density(p[t], p[t - 1], sys.x[k], sys.x_prev[k]);
    }

    // One-step-ahead quantities use the weights at t - 1 and propagated states.
    functional_step(t - 1);
    if (options.diagnostics) {
      const PredictiveMoments pm = predictive_moments(model, sys, p[t - 1], p[t]);
      out.pearson.push_back(pearson_residual(p[t], pm.mean, pm.variance));
      const PitResidual pit = pit_residual(pm.pit_u);
      out.pit.push_back(pit.value);
      if (pit.clamped) ++out.pit_clamped;
    }

    double max_lw = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      log_w[k] += log_g[k];
      if (log_w[k] > max_lw) max_lw = log_w[k];
    }
    if (!std::isfinite(max_lw)) {
      throw FilterDegeneracyError(
          "bpf: all particle weights vanished at observation " + std::to_string(t + 1), t + 1);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      sys.weights[k] = std::exp(log_w[k] - max_lw);
      sum += sys.weights[k];
    }
    const double log_sum = std::log(sum);
    out.loglik_contrib[t] = max_lw + log_sum;
    out.log_lik += out.loglik_contrib[t];
    const double inv_sum = 1.0 / sum;
    for (std::size_t k = 0; k < n; ++k) {
      sys.weights[k] *= inv_sum;
      log_w[k] -= max_lw + log_sum;
    }
    record_filtered(t);

    if (out.ess[t] < resample_below) {
      const auto ancestors = systematic_resample(sys.weights, resample_rng.uniform(t, 0));
      std::vector<double> x_new(n), x_prev_new(n);
      for (std::size_t k = 0; k < n; ++k) {
        x_new[k] = sys.x[ancestors[k]];
        x_prev_new[k] = sys.x_prev[ancestors[k]];
      }
      sys.x.swap(x_new);
      sys.x_prev.swap(x_prev_new);
      std::fill(sys.weights.begin(), sys.weights.end(), 1.0 / static_cast<double>(n));
      std::fill(log_w.begin(), log_w.end(), -log_n);
      out.resampled[t] = 1;
    }
  }

  if (!functionals.empty()) {
    // One extra propagation so functionals are available at t = T as well.
    sys.x_prev.swap(sys.x);
    for (std::size_t k = 0; k < n; ++k)
      sys.x[k] = model.sample_transition(sys.x_prev[k], DrawSource(rng, periods, k));
    functional_step(periods - 1);
  }
  return out;
}

void FilterOutput::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "t,loglik_contrib,trend_mean,logf_mean,trend_lower,trend_upper,logf_lower,logf_upper,"
         "pearson,pit\n";
  char buf[512];
  for (std::size_t t = 0; t < loglik_contrib.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", t + 1,
                  loglik_contrib[t], trend_mean.empty() ? 0.0 : trend_mean[t],
                  logf_mean.empty() ? 0.0 : logf_mean[t],
                  trend_lower.empty() ? 0.0 : trend_lower[t],
                  trend_upper.empty() ? 0.0 : trend_upper[t],
                  logf_lower.empty() ? 0.0 : logf_lower[t],
                  logf_upper.empty() ? 0.0 : logf_upper[t]);
    out << buf;
    if (t == 0 || pearson.size() < t) {
      out << ",,\n";
    } else {
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", pearson[t - 1], pit[t - 1]);
      out << buf;
    }
  }
}

SmootherOutput particle_smoother(const StateSpaceModel& model, const PriceSeries& prices,
                                 const ParticleHistory& history, std::size_t trajectories,
                                 std::uint64_t seed) {
  if (history.empty()) throw InvalidArgument("particle_smoother: filter history was not stored");
  const std::size_t periods = history.periods();
  if (periods != prices.size())
    throw InvalidArgument("particle_smoother: history length does not match the price series");
  if (trajectories < 1) throw InvalidArgument("particle_smoother: need at least one trajectory");
  const auto& p = prices.log_prices;
  const CounterRng rng(seed, Stream::kSmoother);

  SmootherOutput out;
  out.draws.assign(trajectories, std::vector<double>(periods));
  out.indices.assign(trajectories, std::vector<std::size_t>(periods));
  out.logf_mean.assign(periods, 0.0);

  const std::size_t last = periods - 1;
  {
    const auto& w = history.weights[last];
    const auto& xs = history.states[last];
    double lf = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) lf += w[k] * (p[last] - model.trend_component(p[last], xs[k]));
    out.logf_mean[last] = lf;
  }

  std::vector<double> bw;
  for (std::size_t m = 0; m < trajectories; ++m) {
    std::size_t j = sample_index(history.weights[last], rng.uniform(last, m));
    out.indices[m][last] = j;
    out.draws[m][last] = history.states[last][j];
    for (std::size_t t = last; t-- > 0;) {
      const auto& xs = history.states[t];
      const auto& w = history.weights[t];
      const double x_next = out.draws[m][t + 1];
      bw.resize(xs.size());
      double max_b = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < xs.size(); ++k) {
        bw[k] = w[k] > 0.0 ? std::log(w[k]) + model.transition_log_density(x_next, xs[k]) +
                                 model.measurement_log_density(p[t + 1], p[t], x_next, xs[k])
                           : -std::numeric_limits<double>::infinity();
        max_b = std::max(max_b, bw[k]);
      }
      if (!std::isfinite(max_b))
        throw FilterDegeneracyError("particle_smoother: backward weights vanished", t + 1);
      double sum = 0.0;
      for (double& b : bw) {
        b = std::exp(b - max_b);
        sum += b;
      }
      double lf = 0.0;
      for (std::size_t k = 0; k < xs.size(); ++k) {
        bw[k] /= sum;
        lf += bw[k] * (p[t] - model.trend_component(p[t], xs[k]));
      }
      out.logf_mean[t] += lf / static_cast<double>(trajectories);
      j = sample_index(bw, rng.uniform(t, m));
      out.indices[m][t] = j;
      out.draws[m][t] = xs[j];
    }
  }
  out.trend_mean.resize(periods);
  for (std::size_t t = 0; t < periods; ++t) out.trend_mean[t] = p[t] - out.logf_mean[t];
  return out;
}

}  // namespace storagessm
