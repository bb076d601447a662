#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "storagessm/errors.hpp"
#include "storagessm/kalman.hpp"

using namespace storagessm;

namespace {

using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

// log N(p_2..T | p_1) from the joint Gaussian of p_1..T, with
// Cov(p_i, p_j) = P0 + v^2 (min(i, j) - 1) + b^2 [i == j] and mean p_1.
double dense_loglik(const LgllParams& lp, const std::vector<double>& p) {
  const int n = static_cast<int>(p.size());
  const long double b2 = (long double)lp.b * lp.b, v2 = (long double)lp.v * lp.v;
  const long double p0 = 1e6L * b2;
  MatL s(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s(i, j) = p0 + v2 * std::min(i, j) + (i == j ? b2 : 0.0L);
  VecL r(n);
  for (int i = 0; i < n; ++i) r(i) = p[i] - p[0];
  Eigen::LLT<MatL> llt(s);
  const VecL z = llt.matrixL().solve(r);
  long double logdet = 0.0L;
  for (int i = 0; i < n; ++i) logdet += 2.0L * std::log(llt.matrixL()(i, i));
  const long double log2pi = std::log(2.0L * M_PIl);
  const long double joint = -0.5L * (n * log2pi + logdet + z.squaredNorm());
  const long double first = -0.5L * (log2pi + std::log(p0 + b2));
  return static_cast<double>(joint - first);
}

std::vector<double> jb_pvalues_for_seeds(int seeds, std::size_t length) {
  const LgllParams lp{0.42, 0.097};
  std::vector<double> pv;
  for (int s = 1; s <= seeds; ++s) {
    const auto prices = PriceSeries::from_log_prices(simulate_lgll(lp, length, s));
    const auto res = lgll_residuals(lp, prices);
    const auto& x = res.pit;
    double mean = 0.0;
    for (double e : x) mean += e / x.size();
    double m2 = 0, m3 = 0, m4 = 0;
    for (double e : x) {
      const double d = e - mean;
      m2 += d * d / x.size();
      m3 += d * d * d / x.size();
      m4 += d * d * d * d / x.size();
    }
    const double sk = m3 / std::pow(m2, 1.5), ku = m4 / (m2 * m2);
    pv.push_back(std::exp(-x.size() * (sk * sk / 6.0 + (ku - 3) * (ku - 3) / 24.0) / 2.0));
  }
  return pv;
}

}  // namespace

TEST(KalmanLoglik, MatchesDenseCovarianceOracle) {
  const LgllParams lp{1.0, 1.0};
  const std::vector<double> p{0.3, -0.4, 1.2, 0.8, 2.1};
  EXPECT_NEAR(kalman_loglik(lp, PriceSeries::from_log_prices(p)), dense_loglik(lp, p), 1e-10);
}

TEST(KalmanLoglik, MatchesOracleAcrossParameters) {
  const std::vector<double> p{1.0, 1.1, 0.9, 1.4, 1.3, 1.0, 0.7, 0.95, 1.2, 1.25};
  for (const LgllParams lp : {LgllParams{0.4, 0.05}, LgllParams{0.1, 0.3}, LgllParams{2.0, 0.01}})
    EXPECT_NEAR(kalman_loglik(lp, PriceSeries::from_log_prices(p)), dense_loglik(lp, p), 1e-8);
}

TEST(KalmanLoglik, NearZeroTrendVolatility) {
  const LgllParams lp{0.4, 1e-8};
  const std::vector<double> p{1.0, 1.3, 0.6, 1.1, 0.8, 1.2, 0.9, 1.4, 0.7, 1.0};
  const double ll = kalman_loglik(lp, PriceSeries::from_log_prices(p));
  EXPECT_NEAR(ll, dense_loglik(lp, p), 1e-8);
  // With a constant level the prediction is the running mean with a near-flat prior.
  double oracle = 0.0, sum = p[0];
  for (std::size_t t = 1; t < p.size(); ++t) {
    const double mean = sum / t;
    const double var = lp.b * lp.b * (1.0 + 1.0 / t);
    oracle += -0.5 * std::log(2 * M_PI * var) - 0.5 * (p[t] - mean) * (p[t] - mean) / var;
    sum += p[t];
  }
  EXPECT_NEAR(ll, oracle, 1e-4);
}

TEST(KalmanLoglik, OrderMatters) {
  const LgllParams lp{0.4, 0.05};
  std::vector<double> p{0.0, 0.5, -0.3, 0.9, 0.2, 0.4};
  const double a = kalman_loglik(lp, PriceSeries::from_log_prices(p));
  std::swap(p[2], p[3]);
  EXPECT_GT(std::abs(a - kalman_loglik(lp, PriceSeries::from_log_prices(p))), 1e-3);
}

TEST(KalmanLoglik, ContributionsSumAndStartAtZero) {
  const LgllParams lp{0.4, 0.05};
  const auto prices = PriceSeries::from_log_prices(simulate_lgll(lp, 50, 3));
  const auto kf = kalman_filter(lp, prices);
  EXPECT_EQ(kf.loglik_contrib[0], 0.0);
  double sum = 0.0;
  for (double c : kf.loglik_contrib) sum += c;
  EXPECT_NEAR(sum, kf.log_lik, 1e-12);
}

TEST(KalmanLoglik, RejectsBadParameters) {
  const auto prices = PriceSeries::from_log_prices({0.0, 1.0});
  EXPECT_THROW(kalman_loglik({0.0, 0.1}, prices), InvalidArgument);
  EXPECT_THROW(kalman_loglik({0.4, -0.1}, prices), InvalidArgument);
}

TEST(KalmanFilter, GainReachesSteadyState) {
  const LgllParams lp{0.4, 0.05};
  const auto prices = PriceSeries::from_log_prices(simulate_lgll(lp, 400, 4));
  const auto kf = kalman_filter(lp, prices);
  // Steady-state predicted variance solves P = P h / (P + h) + q.
  const double h = lp.b * lp.b, q = lp.v * lp.v;
  const double pss = 0.5 * (q + std::sqrt(q * q + 4.0 * q * h));
  EXPECT_NEAR(kf.predicted_var.back(), pss, 1e-12);
  EXPECT_NEAR(kf.gain.back(), pss / (pss + h), 1e-12);
  for (std::size_t t = 2; t < kf.filtered_var.size(); ++t)
    EXPECT_LE(kf.filtered_var[t], kf.filtered_var[t - 1] + 1e-15);
}

TEST(LgllResiduals, ObservationEqualToPrediction) {
  const LgllParams lp{0.4, 0.05};
  // A constant series is always predicted exactly.
  const auto res = lgll_residuals(lp, PriceSeries::from_log_prices({0.7, 0.7, 0.7, 0.7}));
  for (std::size_t i = 0; i < res.pearson.size(); ++i) {
    EXPECT_EQ(res.pearson[i], 0.0);
    EXPECT_EQ(res.pit[i], 0.0);
  }
}

TEST(LgllResiduals, PitEqualsPearsonForGaussianPredictive) {
  const LgllParams lp{0.4, 0.05};
  const auto prices = PriceSeries::from_log_prices(simulate_lgll(lp, 300, 11));
  const auto res = lgll_residuals(lp, prices);
  ASSERT_EQ(res.pearson.size(), 299u);
  for (std::size_t i = 0; i < res.pearson.size(); ++i)
    EXPECT_NEAR(res.pit[i], res.pearson[i], 1e-9 * (1.0 + std::abs(res.pearson[i])));
  EXPECT_EQ(res.pit_clamped, 0u);
}

TEST(LgllResiduals, JarqueBeraPassesUnderTrueModel) {
  int pass = 0;
  for (double p : jb_pvalues_for_seeds(50, 500)) pass += p > 0.05;
  EXPECT_GE(pass, 45);
}

TEST(KalmanSmoother, LastPeriodEqualsFilteredAndVarianceShrinks) {
  const LgllParams lp{0.4, 0.05};
  const auto prices = PriceSeries::from_log_prices(simulate_lgll(lp, 80, 12));
  const auto kf = kalman_filter(lp, prices);
  const auto ks = kalman_smoother(lp, prices);
  EXPECT_EQ(ks.mean.back(), kf.filtered_mean.back());
  for (std::size_t t = 0; t < ks.var.size(); ++t) EXPECT_LE(ks.var[t], kf.filtered_var[t] + 1e-15);
}

TEST(KalmanSmoother, MatchesDenseConditionalMean) {
  const LgllParams lp{0.5, 0.3};
  const std::vector<double> p{0.2, 0.6, 0.1, 0.9, 1.3, 0.8};
  const auto ks = kalman_smoother(lp, PriceSeries::from_log_prices(p));
  // E(k | p) = C_kp S^-1 (p - m) + m with Cov(k_i, p_j) = P0 + v^2 min(i, j).
  const int n = static_cast<int>(p.size());
  const long double b2 = lp.b * lp.b, v2 = lp.v * lp.v, p0 = 1e6L * b2;
  MatL s(n, n), c(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      c(i, j) = p0 + v2 * std::min(i, j);
      s(i, j) = c(i, j) + (i == j ? b2 : 0.0L);
    }
  VecL r(n);
  for (int i = 0; i < n; ++i) r(i) = p[i] - p[0];
  const Eigen::LLT<MatL> llt(s);
  const VecL mean = c * llt.solve(r);
  const MatL explained = c * llt.solve(MatL(c.transpose()));
  for (int i = 0; i < n; ++i) {
    EXPECT_NEAR(ks.mean[i], static_cast<double>(mean(i) + p[0]), 1e-8);
    EXPECT_NEAR(ks.var[i], static_cast<double>(c(i, i) - explained(i, i)), 1e-8);
  }
}

TEST(SimulateLgll, Deterministic) {
  const LgllParams lp{0.4, 0.05};
  EXPECT_EQ(simulate_lgll(lp, 20, 5), simulate_lgll(lp, 20, 5));
  EXPECT_NE(simulate_lgll(lp, 20, 5), simulate_lgll(lp, 20, 6));
}

TEST(SimulateLgll, DifferencesHaveLocalLevelAutocovariance) {
  // Delta p_t = u_t - b (z_t - z_{t-1}): variance v^2 + 2 b^2, lag-1 covariance -b^2.
  const LgllParams lp{0.4, 0.3};
  const auto p = simulate_lgll(lp, 200000, 9);
  double g0 = 0.0, g1 = 0.0;
  const std::size_t n = p.size() - 1;
  for (std::size_t t = 1; t < p.size(); ++t) {
    const double d = p[t] - p[t - 1];
    g0 += d * d / n;
    if (t > 1) g1 += d * (p[t - 1] - p[t - 2]) / (n - 1);
  }
  EXPECT_NEAR(g0, lp.v * lp.v + 2 * lp.b * lp.b, 0.01);
  EXPECT_NEAR(g1, -lp.b * lp.b, 0.01);
}
