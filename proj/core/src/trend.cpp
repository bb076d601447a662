#include "storagessm/trend.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "storagessm/errors.hpp"
#include "storagessm/numerics.hpp"
#include "storagessm/particle_filter.hpp"

namespace storagessm {

std::size_t TrendSpec::coefficient_count() const {
  switch (kind) {
    case TrendKind::kStochastic:
      return 0;
    case TrendKind::kLinear:
      return 2;
    case TrendKind::kRcs:
      return knot_quantiles.size() + 2;
  }
  return 0;
}

std::string TrendSpec::name() const {
  switch (kind) {
    case TrendKind::kStochastic:
      return "stochastic";
    case TrendKind::kLinear:
      return "linear";
    case TrendKind::kRcs:
      return "rcs" + std::to_string(knot_quantiles.size());
  }
  return "unknown";
}

void TrendSpec::validate() const {
  if (kind != TrendKind::kRcs) {
    if (!knot_quantiles.empty()) throw InvalidArgument("trend: knots given for a non-spline trend");
    return;
  }
  if (knot_quantiles.empty()) throw InvalidArgument("trend: rcs needs at least one knot");
  for (std::size_t i = 0; i < knot_quantiles.size(); ++i) {
    const double q = knot_quantiles[i];
    if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("trend: knot quantiles must lie in (0, 1)");
    if (i > 0 && !(q > knot_quantiles[i - 1]))
      throw InvalidArgument("trend: knot quantiles must increase strictly");
  }
}

std::vector<double> rcs_knots(std::span<const double> quantiles, std::size_t length) {
  std::vector<double> knots;
  knots.reserve(quantiles.size() + 2);
  knots.push_back(1.0);
  for (double q : quantiles) knots.push_back(std::ceil(q * static_cast<double>(length)));
  knots.push_back(static_cast<double>(length));
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (!(knots[i] > knots[i - 1])) {
      throw InvalidArgument("trend: series of length " + std::to_string(length) +
                            " is too short for distinct knots");
    }
  }
  return knots;
}

std::vector<double> rcs_terms(std::span<const double> knots, double t) {
  const std::size_t k = knots.size();
  const double last = knots[k - 1];
  const double penult = knots[k - 2];
  const double scale = 1.0 / ((last - knots[0]) * (last - knots[0]));
  auto cube = [](double u) { return u > 0.0 ? u * u * u : 0.0; };
  std::vector<double> terms(k - 2);
  for (std::size_t j = 0; j + 2 < k; ++j) {
    const double kj = knots[j];
    terms[j] = scale * (cube(t - kj) - cube(t - penult) * (last - kj) / (last - penult) +
                        cube(t - last) * (penult - kj) / (last - penult));
  }
  return terms;
}

Eigen::MatrixXd trend_basis(const TrendSpec& spec, std::size_t length) {
  spec.validate();
  if (spec.kind == TrendKind::kStochastic)
    throw InvalidArgument("trend: the stochastic trend has no basis");
  if (length < 2) throw InvalidArgument("trend: need at least two periods");
  Eigen::MatrixXd basis(static_cast<Eigen::Index>(length),
                        static_cast<Eigen::Index>(spec.coefficient_count()));
  std::vector<double> knots;
  if (spec.kind == TrendKind::kRcs) knots = rcs_knots(spec.knot_quantiles, length);
  for (std::size_t i = 0; i < length; ++i) {
    const double t = static_cast<double>(i + 1);
    const auto row = static_cast<Eigen::Index>(i);
    basis(row, 0) = 1.0;
    basis(row, 1) = t;
    if (spec.kind == TrendKind::kRcs) {
      const auto terms = rcs_terms(knots, t);
      for (std::size_t j = 0; j < terms.size(); ++j)
        basis(row, static_cast<Eigen::Index>(j + 2)) = terms[j];
    }
  }
  return basis;
}

std::vector<double> fitted_trend(const TrendSpec& spec, std::span<const double> coefficients,
                                 std::size_t length) {
  if (coefficients.size() != spec.coefficient_count())
    throw InvalidArgument("trend: wrong number of coefficients for " + spec.name());
  const Eigen::MatrixXd basis = trend_basis(spec, length);
  const Eigen::Map<const Eigen::VectorXd> gamma(coefficients.data(),
                                                static_cast<Eigen::Index>(coefficients.size()));
  const Eigen::VectorXd k = basis * gamma;
  return {k.data(), k.data() + k.size()};
}

namespace {

void check_solution(const DetTrendParams& params, const EquilibriumSolution& sol) {
  if (params.delta != sol.params().delta || params.b != sol.params().b)
    throw InvalidArgument("det-trend: solution was solved for different (delta, b)");
}

}  // namespace

DetTrendEvaluation det_trend_evaluate(const DetTrendParams& params, const TrendSpec& spec,
                                      const EquilibriumSolution& sol, const PriceSeries& prices,
                                      const DetTrendOptions& options) {
  prices.validate();
  check_solution(params, sol);
  const std::size_t n = prices.size();
  const double carry = 1.0 - params.delta;

  DetTrendEvaluation out;
  out.trend = fitted_trend(spec, params.coefficients, n);
  out.loglik_contrib.assign(n, 0.0);
  out.states.resize(n);
  out.shocks.reserve(n - 1);
  for (std::size_t t = 0; t < n; ++t) {
    const auto inv =
        sol.inverse_log_price(prices.log_prices[t] - out.trend[t], options.inversion_margin);
    out.states[t] = inv.x;
    double contrib = 0.0;
    if (inv.clamped) {
      ++out.clamped;
      contrib -= 0.5 * options.clamp_penalty * inv.clamp_distance * inv.clamp_distance;
    }
    if (t > 0) {
      const double z = inv.x - carry * sol.storage_policy(out.states[t - 1]);
      out.shocks.push_back(z);
      contrib += normal_log_pdf(z);
      if (options.jacobian) contrib -= std::log(std::abs(sol.log_price_slope(inv.x)));
    }
    out.loglik_contrib[t] = contrib;
    out.log_lik += contrib;
  }
  return out;
}

double det_trend_loglik(const DetTrendParams& params, const TrendSpec& spec,
                        const EquilibriumSolution& sol, const PriceSeries& prices,
                        const DetTrendOptions& options) {
  return det_trend_evaluate(params, spec, sol, prices, options).log_lik;
}

Residuals det_trend_residuals(const DetTrendParams& params, const TrendSpec& spec,
                              const EquilibriumSolution& sol, const PriceSeries& prices,
                              std::size_t n_mc, std::uint64_t seed,
                              const DetTrendOptions& options) {
  if (n_mc < 2) throw InvalidArgument("det-trend residuals: need at least 2 MC draws");
  const DetTrendEvaluation eval = det_trend_evaluate(params, spec, sol, prices, options);
  const CounterRng rng(seed, Stream::kResidualMc);
  const double carry = 1.0 - params.delta;
  const std::size_t n = prices.size();

  Residuals out;
  out.pearson.reserve(n - 1);
  out.pit = eval.shocks;
  for (std::size_t t = 1; t < n; ++t) {
    const double mean_state = carry * sol.storage_policy(eval.states[t - 1]);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < n_mc; ++k) {
      const double sim = eval.trend[t] + sol.log_price(mean_state + rng.normal(t, k));
      const double d = sim - mean;
      mean += d / static_cast<double>(k + 1);
      m2 += d * (sim - mean);
    }
    const double var = m2 / static_cast<double>(n_mc - 1);
    out.pearson.push_back(pearson_residual(prices.log_prices[t], mean, var));
  }
  return out;
}

void write_trend_csv(const std::filesystem::path& path, const PriceSeries& prices,
                     std::span<const double> trend) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "t,date,log_price,trend,logf\n";
  char buf[160];
  for (std::size_t t = 0; t < prices.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g,%.17g\n", t + 1,
                  prices.dates[t].str().c_str(), prices.log_prices[t], trend[t],
                  prices.log_prices[t] - trend[t]);
    out << buf;
  }
}

}  // namespace storagessm
