#include "storagessm/ssm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "storagessm/errors.hpp"
#include "storagessm/numerics.hpp"

namespace storagessm {

std::string YearMonth::str() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
  return buf;
}

void PriceSeries::validate() const {
  if (log_prices.size() < 2) throw InvalidArgument("price series needs at least 2 observations");
  if (dates.size() != log_prices.size())
    throw InvalidArgument("price series dates and prices differ in length");
  for (double p : log_prices)
    if (!std::isfinite(p)) throw InvalidArgument("price series contains a non-finite log price");
  for (std::size_t t = 1; t < dates.size(); ++t)
    if (dates[t].index() <= dates[t - 1].index())
      throw InvalidArgument("price series dates must strictly increase");
}

PriceSeries PriceSeries::from_log_prices(std::vector<double> log_prices, std::string label,
                                         YearMonth start) {
  PriceSeries s;
  s.dates.reserve(log_prices.size());
  YearMonth d = start;
  for (std::size_t t = 0; t < log_prices.size(); ++t, d = d.next()) s.dates.push_back(d);
  s.log_prices = std::move(log_prices);
  s.label = std::move(label);
  return s;
}

StorageSsm::StorageSsm(std::shared_ptr<const EquilibriumSolution> solution)
    : solution_(std::move(solution)) {
  if (!solution_) throw InvalidArgument("StorageSsm needs a solution");
}

double StorageSsm::sample_initial(const DrawSource& draw) const {
  const double capacity = params().capacity;
  return -2.0 + (capacity + 4.0) * draw.uniform();
}

double StorageSsm::sample_transition(double x_prev, const DrawSource& draw) const {
  return transition_mean(x_prev) + draw.normal();
}

double StorageSsm::transition_log_density(double x, double x_prev) const {
  return normal_log_pdf(x - transition_mean(x_prev));
}

double StorageSsm::measurement_density(double p, double p_prev, double x, double x_prev) const {
  return std::exp(measurement_log_density(p, p_prev, x, x_prev));
}

const char* regime_name(Regime regime) {
  switch (regime) {
    case Regime::kStockOut:
      return "stockout";
    case Regime::kStorage:
      return "storage";
    case Regime::kFullCapacity:
      return "full";
  }
  return "unknown";
}

PriceSeries SimulatedPath::series(std::string label, YearMonth start) const {
  return PriceSeries::from_log_prices(log_prices, std::move(label), start);
}

void SimulatedPath::write_csv(const std::filesystem::path& path,
                              const EquilibriumSolution& sol) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "t,log_price,k,x,regime\n";
  char buf[160];
  for (std::size_t t = 0; t < log_prices.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%s\n", t + 1, log_prices[t], trend[t],
                  states[t], regime_name(sol.regime(states[t])));
    out << buf;
  }
}

SimulatedPath simulate(const ModelParams& params, const EquilibriumSolution& sol,
                       std::size_t length, std::size_t burn_in, std::uint64_t seed) {
  if (length < 1) throw InvalidArgument("simulate: length must be at least 1");
  if (!(params.v >= 0.0)) throw InvalidArgument("simulate: v must be nonnegative");
  const ModelParams& solved = sol.params();
  if (params.delta != solved.delta || params.b != solved.b || params.capacity != solved.capacity ||
      params.r != solved.r || params.demand_scale != solved.demand_scale) {
    throw InvalidArgument("simulate: solution was solved for different structural parameters");
  }
  const CounterRng rng(seed, Stream::kSimulation);
  const double carry = 1.0 - params.delta;

  SimulatedPath path;
  path.seed = seed;
  path.log_prices.reserve(length);
  path.states.reserve(length);
  path.trend.reserve(length);
  path.trend_shocks.reserve(length);
  path.supply_shocks.reserve(length);

  double x = -2.0 + (params.capacity + 4.0) * rng.uniform(0, 0);
  double k = 0.0;
  const std::size_t total = burn_in + length;
  for (std::size_t step = 1; step <= total; ++step) {
    const double z = rng.normal(step, 0);
    const double eps = params.v * rng.normal(step, 1);
    x = carry * sol.storage_policy(x) + z;
    k = k + eps;
    if (step > burn_in) {
      path.states.push_back(x);
      path.trend.push_back(k);
      path.supply_shocks.push_back(z);
      path.trend_shocks.push_back(eps);
      path.log_prices.push_back(k + sol.log_price(x));
    }
  }
  return path;
}

}  // namespace storagessm
