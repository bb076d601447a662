#include "storagessm/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "storagessm/errors.hpp"
#include "storagessm/numerics.hpp"

namespace storagessm {

void ModelParams::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  if (!(b > 0.0) || !std::isfinite(b)) throw InvalidArgument("b must be positive");
  if (!(capacity > 0.0) || !std::isfinite(capacity))
    throw InvalidArgument("capacity must be positive");
  if (!(r > -1.0) || !std::isfinite(r)) throw InvalidArgument("r must exceed -1");
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("v must be positive");
  if (!(demand_scale > 0.0) || !std::isfinite(demand_scale))
    throw InvalidArgument("demand_scale must be positive");
  const double bt = beta();
  if (!(bt > 0.0 && bt < 1.0)) throw InvalidArgument("beta must lie in (0, 1)");
}

void SolverConfig::validate() const {
  if (grid_size < 3) throw InvalidArgument("grid_size must be at least 3");
  if (quad_nodes < 2) throw InvalidArgument("quad_nodes must be at least 2");
  if (!(quad_lo < quad_hi)) throw InvalidArgument("quadrature range is empty");
  if (!(policy_tol > 0.0)) throw InvalidArgument("policy_tol must be positive");
  if (max_iters < 1) throw InvalidArgument("max_iters must be at least 1");
  if (!(root_tol > 0.0)) throw InvalidArgument("root_tol must be positive");
}

NormalQuadrature::NormalQuadrature(std::size_t subintervals, double lo, double hi)
    : nodes_(subintervals + 1), weights_(subintervals + 1) {
  const double h = (hi - lo) / static_cast<double>(subintervals);
  for (std::size_t i = 0; i <= subintervals; ++i) {
    nodes_[i] = lo + static_cast<double>(i) * h;
    const double end_factor = (i == 0 || i == subintervals) ? 0.5 : 1.0;
    weights_[i] = end_factor * h * normal_pdf(nodes_[i]);
  }
}

double demand(const ModelParams& params, double p) {
  if (!(p > 0.0)) throw DomainError("demand: price must be positive");
  return -std::log(p / params.demand_scale) / params.b;
}

namespace {

// Policy on a uniform grid, shared by the iteration and the final solution.
struct PolicyView {
  double lo;
  double hi;
  double inv_step;
  const double* s;
  std::size_t n;
  double capacity;

  double sigma(double x) const {
    if (x <= lo) return 0.0;
    if (x >= hi) return capacity;
    const double t = (x - lo) * inv_step;
    std::size_t j = static_cast<std::size_t>(t);
    if (j > n - 2) j = n - 2;
    const double frac = t - static_cast<double>(j);
    return s[j] + frac * (s[j + 1] - s[j]);
  }
};

// beta * sum_i w_i f((1 - delta) s + z_i) for the policy `pol`.
double expected_price(const ModelParams& params, const PolicyView& pol,
                      const NormalQuadrature& quad, double s) {
  const double carried = (1.0 - params.delta) * s;
  const auto nodes = quad.nodes();
  const auto weights = quad.weights();
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double y = carried + nodes[i];
    acc += weights[i] * std::exp(-params.b * (y - pol.sigma(y)));
  }
  return params.beta() * params.demand_scale * acc;
}

}  // namespace

EquilibriumSolution::EquilibriumSolution(ModelParams params, SolverConfig config, double x_star,
                                         double x_star2, std::vector<double> s_values,
                                         int iterations, double final_residual)
    : params_(params),
      config_(config),
      x_star_(x_star),
      x_star2_(x_star2),
      step_((x_star2 - x_star) / static_cast<double>(s_values.size() - 1)),
      inv_step_(1.0 / step_),
      s_values_(std::move(s_values)),
      iterations_(iterations),
      final_residual_(final_residual),
      quadrature_(config.quad_nodes, config.quad_lo, config.quad_hi) {}

std::vector<double> EquilibriumSolution::grid() const {
  std::vector<double> g(s_values_.size());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = grid_point(j);
  g.back() = x_star2_;
  return g;
}

double EquilibriumSolution::storage_policy(double x) const {
  const PolicyView pol{x_star_, x_star2_, inv_step_, s_values_.data(), s_values_.size(),
                       params_.capacity};
  return pol.sigma(x);
}

double EquilibriumSolution::log_price(double x) const {
  return std::log(params_.demand_scale) - params_.b * (x - storage_policy(x));
}

double EquilibriumSolution::price(double x) const {
  return inverse_demand(params_, x - storage_policy(x));
}

double EquilibriumSolution::log_price_slope(double x) const {
  if (x < x_star_ || x >= x_star2_) return -params_.b;
  std::size_t j = static_cast<std::size_t>((x - x_star_) * inv_step_);
  if (j > s_values_.size() - 2) j = s_values_.size() - 2;
  const double sigma_slope = (s_values_[j + 1] - s_values_[j]) * inv_step_;
  return -params_.b * (1.0 - sigma_slope);
}

double EquilibriumSolution::expected_next_price(double x) const {
  const PolicyView pol{x_star_, x_star2_, inv_step_, s_values_.data(), s_values_.size(),
                       params_.capacity};
  return expected_price(params_, pol, quadrature_, pol.sigma(x));
}

Regime EquilibriumSolution::regime(double x) const {
  if (x < x_star_) return Regime::kStockOut;
  if (x > x_star2_) return Regime::kFullCapacity;
  return Regime::kStorage;
}

EquilibriumSolution::Inversion EquilibriumSolution::inverse_price(double p, double margin) const {
  if (!(p > 0.0)) throw DomainError("inverse_price: price must be positive");
  return inverse_log_price(std::log(p), margin);
}

EquilibriumSolution::Inversion EquilibriumSolution::inverse_log_price(double log_p,
                                                                      double margin) const {
  // f(x) = K exp(-b g(x)) with g(x) = x - sigma(x) nondecreasing, so invert g.
  const double target = (std::log(params_.demand_scale) - log_p) / params_.b;
  // Supply shocks reach negative stocks even when x* is large (small b), and
  // carried stocks never exceed C.
  const double capacity = params_.capacity;
  const double lo = std::min(x_star_, 0.0) - margin;
  const double hi = std::max(x_star2_, capacity) + margin;
  if (target <= x_star_) {
    if (target < lo) return {lo, true, lo - target};
    return {target, false, 0.0};
  }
  if (target >= x_star2_ - capacity) {
    const double x = target + capacity;
    if (x > hi) return {hi, true, x - hi};
    return {x, false, 0.0};
  }
  // Storage regime: g is piecewise linear on the grid.
  const std::size_t n = s_values_.size();
  std::size_t lo_idx = 0, hi_idx = n - 1;
  auto g_at = [&](std::size_t j) { return grid_point(j) - s_values_[j]; };
  while (hi_idx - lo_idx > 1) {
    const std::size_t mid = (lo_idx + hi_idx) / 2;
    if (g_at(mid) <= target) {
      lo_idx = mid;
    } else {
      hi_idx = mid;
    }
  }
  const double g0 = g_at(lo_idx);
  const double g1 = g_at(hi_idx);
  const double x0 = grid_point(lo_idx);
  if (!(g1 > g0)) return {x0, false, 0.0};
  const double x = x0 + (target - g0) / (g1 - g0) * step_;
  return {x, false, 0.0};
}

void EquilibriumSolution::write_csv(const std::filesystem::path& path, std::size_t points,
                                    double pad) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "x,sigma,f\n";
  const double lo = x_star_ - pad;
  const double hi = x_star2_ + pad;
  char buf[128];
  for (std::size_t i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", x, storage_policy(x), price(x));
    out << buf;
  }
}

EquilibriumSolution solve_equilibrium(const ModelParams& params, const SolverConfig& config) {
  params.validate();
  config.validate();

  const NormalQuadrature quad(config.quad_nodes, config.quad_lo, config.quad_hi);
  const std::size_t n = config.grid_size;
  const double capacity = params.capacity;
  const auto demand_of = [&](double p) { return -std::log(p / params.demand_scale) / params.b; };

  // Initial guess: kinks at 0 and C with sigma(x) = x in between.
  double x_star = 0.0;
  double x_star2 = capacity;
  std::vector<double> s(n), s_next(n);
  for (std::size_t j = 0; j < n; ++j)
    s[j] = capacity * static_cast<double>(j) / static_cast<double>(n - 1);

  double change = 0.0;
  double prev_change = capacity;
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    const double cur_step = (x_star2 - x_star) / static_cast<double>(n - 1);
    const PolicyView pol{x_star, x_star2, 1.0 / cur_step, s.data(), n, capacity};
    const auto rhs_demand = [&](double sv) { return demand_of(expected_price(params, pol, quad, sv)); };

    const double next_star = rhs_demand(0.0);
    const double next_star2 = rhs_demand(capacity) + capacity;
    if (!std::isfinite(next_star) || !std::isfinite(next_star2) || !(next_star < next_star2)) {
      throw NonConvergenceError("solve_equilibrium: kink points became invalid", change, iter);
    }
    const double step = (next_star2 - next_star) / static_cast<double>(n - 1);

    change = std::max(std::abs(next_star - x_star), std::abs(next_star2 - x_star2));
    s_next[0] = 0.0;
    s_next[n - 1] = capacity;
    for (std::size_t j = 1; j + 1 < n; ++j) {
      const double x = next_star + static_cast<double>(j) * step;
      // F(s) = s - x + D(Ef(s)); F(0) and F(C) are known from the kink updates.
      const auto residual = [&](double sv) { return sv - x + rhs_demand(sv); };
      // Bracket outward from the previous policy, widening geometrically.
      double lo = 0.0, hi = capacity, f_lo = next_star - x, f_hi = next_star2 - x;
      const double guess = pol.sigma(x);
      if (guess > 0.0 && guess < capacity) {
        const double f_guess = residual(guess);
        double width = 2.0 * prev_change + config.root_tol;
        if (f_guess < 0.0) {
          lo = guess;
          f_lo = f_guess;
          for (double probe = guess + width; probe < capacity; probe = lo + width) {
            const double f_probe = residual(probe);
            if (f_probe >= 0.0) {
              hi = probe;
              f_hi = f_probe;
              break;
            }
            lo = probe;
            f_lo = f_probe;
            width *= 4.0;
          }
        } else {
          hi = guess;
          f_hi = f_guess;
          for (double probe = guess - width; probe > 0.0; probe = hi - width) {
            const double f_probe = residual(probe);
            if (f_probe <= 0.0) {
              lo = probe;
              f_lo = f_probe;
              break;
            }
            hi = probe;
            f_hi = f_probe;
            width *= 4.0;
          }
        }
      }
      const auto root = brent_root(residual, lo, hi, f_lo, f_hi, config.root_tol);
      if (!root) {
        throw RootFindError("solve_equilibrium: root finder failed at grid point " +
                                std::to_string(j),
                            j);
      }
      s_next[j] = *root;
      change = std::max(change, std::abs(s_next[j] - pol.sigma(x)));
    }
    change = std::max(change, std::abs(capacity - pol.sigma(next_star2)));
    change = std::max(change, std::abs(pol.sigma(next_star)));

    x_star = next_star;
    x_star2 = next_star2;
    s.swap(s_next);
    prev_change = change;
    if (change < config.policy_tol) {
      return EquilibriumSolution(params, config, x_star, x_star2, std::move(s), iter, change);
    }
  }
  throw NonConvergenceError("solve_equilibrium: no convergence within max_iters", change,
                            config.max_iters);
}

double fixed_point_rhs(const EquilibriumSolution& sol, double x, double s) {
  const auto& params = sol.params();
  const NormalQuadrature quad(sol.config().quad_nodes, sol.config().quad_lo, sol.config().quad_hi);
  const auto s_vals = sol.s_values();
  const double step = (sol.x_star2() - sol.x_star()) / static_cast<double>(s_vals.size() - 1);
  const PolicyView pol{sol.x_star(), sol.x_star2(), 1.0 / step, s_vals.data(), s_vals.size(),
                       params.capacity};
  return x - (-std::log(expected_price(params, pol, quad, s) / params.demand_scale) / params.b);
}

}  // namespace storagessm
