#include "storagessm/model_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>

#include "storagessm/errors.hpp"
#include "storagessm/numerics.hpp"

namespace storagessm {

namespace {

double log_mean_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s / static_cast<double>(v.size()));
}

struct Moments {
  double mean;
  double m2;
};

Moments central_moments(std::span<const double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double m2 = 0.0;
  for (double v : x) m2 += (v - mean) * (v - mean);
  return {mean, m2 / static_cast<double>(x.size())};
}

}  // namespace

MarginalLikResult assemble_marginal(double log_lik, double log_prior, double log_ordinate) {
  MarginalLikResult r;
  r.log_lik = log_lik;
  r.log_prior = log_prior;
  r.log_ordinate = log_ordinate;
  r.log_marginal = log_lik + log_prior - log_ordinate;
  return r;
}

double mvn_log_density(std::span<const double> x, std::span<const double> mean,
                       const Eigen::MatrixXd& chol_lower) {
  const auto d = static_cast<Eigen::Index>(x.size());
  Eigen::VectorXd diff(d);
  for (Eigen::Index j = 0; j < d; ++j) diff(j) = x[j] - mean[j];
  const Eigen::VectorXd z = chol_lower.triangularView<Eigen::Lower>().solve(diff);
  double log_det = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) log_det += std::log(chol_lower(j, j));
  return -static_cast<double>(d) * kLogSqrt2Pi - log_det - 0.5 * z.squaredNorm();
}

MarginalLikResult chib_jeliazkov(const Chain& chain, const InferenceModel& model,
                                 const ChibOptions& options) {
  const std::size_t m = chain.size() > chain.burn_in ? chain.size() - chain.burn_in : 0;
  if (m < 2) throw InvalidArgument("chib_jeliazkov: chain has fewer than two post-burn-in draws");
  const std::size_t d = model.dim();
  const std::size_t l = options.l > 0 ? options.l : m;

  std::vector<double> theta_bar(d, 0.0);
  for (std::size_t i = chain.burn_in; i < chain.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) theta_bar[j] += chain.transformed[i][j];
  for (double& t : theta_bar) t /= static_cast<double>(m);

  const Eigen::LLT<Eigen::MatrixXd> llt(chain.final_proposal);
  if (llt.info() != Eigen::Success)
    throw DomainError("chib_jeliazkov: proposal covariance is not positive definite");
  const Eigen::MatrixXd chol = llt.matrixL();

  const LikelihoodEval at_bar = model.log_likelihood(
      theta_bar, derive_seed(options.seed, static_cast<std::uint64_t>(Stream::kMarginalLik), 0));
  if (at_bar.failed) {
    throw DomainError("chib_jeliazkov: likelihood at the posterior mean failed (" +
                      at_bar.reason + ")");
  }
  const double ll_bar = at_bar.value;
  const double lp_bar = model.log_prior(theta_bar);

  std::vector<double> num(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t k = chain.burn_in + i;
    num[i] = mh_log_acceptance(ll_bar, lp_bar, chain.log_lik[k], chain.log_prior[k]) +
             mvn_log_density(theta_bar, chain.transformed[k], chol);
  }

  const CounterRng rng(options.seed, Stream::kMarginalLik);
  std::vector<double> den(l);
  const auto di = static_cast<Eigen::Index>(d);
#pragma omp parallel for num_threads(options.threads > 0 ? options.threads : 1) schedule(dynamic) \
    if (options.threads != 1)
  for (std::size_t s = 0; s < l; ++s) {
    Eigen::VectorXd xi(di);
    for (std::size_t j = 0; j < d; ++j) xi(static_cast<Eigen::Index>(j)) = rng.normal(s + 1, j);
    const Eigen::VectorXd step = chol * xi;
    std::vector<double> theta(d);
    for (std::size_t j = 0; j < d; ++j) theta[j] = theta_bar[j] + step(static_cast<Eigen::Index>(j));
    const double lp = model.log_prior(theta);
    double ll = -std::numeric_limits<double>::infinity();
    if (std::isfinite(lp)) {
      ll = model
               .log_likelihood(theta, derive_seed(options.seed,
                                                  static_cast<std::uint64_t>(Stream::kMarginalLik),
                                                  s + 1))
               .value;
    }
    den[s] = mh_log_acceptance(ll, lp, ll_bar, lp_bar);
  }

  MarginalLikResult r;
  r.log_numerator = log_mean_exp(num);
  r.log_denominator = log_mean_exp(den);
  if (!std::isfinite(r.log_denominator))
    throw DomainError("chib_jeliazkov: denominator estimate is zero; increase L");
  const double ordinate = r.log_numerator - r.log_denominator;
  MarginalLikResult out = assemble_marginal(ll_bar, lp_bar, ordinate);
  out.log_numerator = r.log_numerator;
  out.log_denominator = r.log_denominator;
  out.m = m;
  out.l = l;
  out.theta_bar = std::move(theta_bar);
  return out;
}

double log_bayes_factor(const MarginalLikResult& a, const MarginalLikResult& b) {
  return a.log_marginal - b.log_marginal;
}

JarqueBera jarque_bera(std::span<const double> residuals) {
  const std::size_t n = residuals.size();
  if (n < 3) throw InvalidArgument("jarque_bera: need at least three residuals");
  const Moments mo = central_moments(residuals);
  if (!(mo.m2 > 0.0)) throw DomainError("jarque_bera: residuals have zero variance");
  double m3 = 0.0, m4 = 0.0;
  for (double v : residuals) {
    const double d = v - mo.mean;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m3 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  JarqueBera r;
  r.skewness = m3 / std::pow(mo.m2, 1.5);
  r.kurtosis = m4 / (mo.m2 * mo.m2);
  r.statistic = static_cast<double>(n) *
                (r.skewness * r.skewness / 6.0 + (r.kurtosis - 3.0) * (r.kurtosis - 3.0) / 24.0);
  // Chi-squared survival function with 2 degrees of freedom.
  r.p_value = std::exp(-0.5 * r.statistic);
  return r;
}

double autocorrelation(std::span<const double> x, std::size_t lag) {
  const Moments mo = central_moments(x);
  if (!(mo.m2 > 0.0)) throw DomainError("autocorrelation: series has zero variance");
  double s = 0.0;
  for (std::size_t i = 0; i + lag < x.size(); ++i) s += (x[i] - mo.mean) * (x[i + lag] - mo.mean);
  return s / static_cast<double>(x.size()) / mo.m2;
}

LjungBox ljung_box(std::span<const double> residuals, std::size_t lags) {
  const std::size_t n = residuals.size();
  if (lags < 1 || n <= lags) throw InvalidArgument("ljung_box: need more observations than lags");
  const double nn = static_cast<double>(n);
  LjungBox r{};
  double q = 0.0;
  for (std::size_t k = 1; k <= lags; ++k) {
    const double rho = autocorrelation(residuals, k);
    if (k == 1) r.rho1 = rho;
    q += rho * rho / (nn - static_cast<double>(k));
  }
  r.statistic = nn * (nn + 2.0) * q;
  const boost::math::chi_squared_distribution<double> chi2(static_cast<double>(lags));
  r.p_value = boost::math::cdf(boost::math::complement(chi2, r.statistic));
  return r;
}

double storage_cost_annual(double delta) {
  if (!(delta >= 0.0 && delta < 1.0)) throw InvalidArgument("storage_cost_annual: delta out of range");
  return -(std::pow(1.0 - delta, 12.0) - 1.0) * 100.0;
}

double price_elasticity(double b, double x_bar) {
  if (!(b > 0.0)) throw InvalidArgument("price_elasticity: b must be positive");
  if (x_bar == 0.0) throw DomainError("price_elasticity: mean supply is zero");
  return -1.0 / (b * x_bar);
}

}  // namespace storagessm
