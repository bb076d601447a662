#pragma once

#include <cmath>

namespace storagessm {

// Monthly rate equivalent to a 5% annual interest rate.
inline double monthly_rate_from_annual(double annual_rate) {
  return std::pow(1.0 + annual_rate, 1.0 / 12.0) - 1.0;
}

inline constexpr double kDefaultCapacity = 10.0;
inline constexpr double kDefaultAnnualRate = 0.05;

// Structural and trend parameters of the storage model.
//
// Inverse demand is P(x) = demand_scale * exp(-b x). `v` is the standard
// deviation of the log-price trend innovation; the equilibrium solver ignores
// it. The discount factor beta = (1 - delta) / (1 + r) is always derived.
struct ModelParams {
  double delta = 0.0112;
  double b = 0.4196;
  double capacity = kDefaultCapacity;
  double r = monthly_rate_from_annual(kDefaultAnnualRate);
  double v = 0.0972;
  double demand_scale = 1.0;

  double beta() const { return (1.0 - delta) / (1.0 + r); }

  // Throws InvalidArgument when any invariant is violated.
  void validate() const;
};

}  // namespace storagessm
