#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "storagessm/errors.hpp"
#include "storagessm/model_eval.hpp"

using namespace storagessm;

namespace {

std::vector<double> normal_draws(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> z;
  std::vector<double> x(n);
  for (double& v : x) v = z(g);
  return x;
}

std::vector<double> ar1(std::size_t n, double phi, std::uint64_t seed) {
  auto x = normal_draws(n, seed);
  for (std::size_t t = 1; t < n; ++t) x[t] += phi * x[t - 1];
  return x;
}

// Chi-squared survival function for even degrees of freedom.
double chi2_sf_even(double x, int dof) {
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < dof / 2; ++k) {
    term *= 0.5 * x / k;
    sum += term;
  }
  return std::exp(-0.5 * x) * sum;
}

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// y_i ~ N(mu, 1), mu ~ N(0, tau^2). Parameter space is mu itself.
class NormalMean final : public InferenceModel {
 public:
  NormalMean(std::vector<double> y, double tau) : y_(std::move(y)), tau_(tau) {}
  mutable std::size_t calls = 0;

  std::string kind() const override { return "normal-mean"; }
  std::size_t dim() const override { return 1; }
  std::vector<std::string> names() const override { return {"mu"}; }
  std::vector<double> to_natural(std::span<const double> t) const override { return {t.begin(), t.end()}; }
  std::vector<double> to_transformed(std::span<const double> n) const override { return {n.begin(), n.end()}; }
  double log_prior(std::span<const double> t) const override {
    return -0.5 * std::log(2 * M_PI * tau_ * tau_) - 0.5 * t[0] * t[0] / (tau_ * tau_);
  }
  LikelihoodEval log_likelihood(std::span<const double> t, std::uint64_t) const override {
    ++calls;
    double acc = 0.0;
    for (double y : y_) acc += -0.5 * std::log(2 * M_PI) - 0.5 * (y - t[0]) * (y - t[0]);
    return {acc, false, {}};
  }
  bool exact() const override { return true; }
  std::vector<double> initial(std::uint64_t) const override { return {0.0}; }

  double post_mean() const { return std::accumulate(y_.begin(), y_.end(), 0.0) * post_var(); }
  double post_var() const { return 1.0 / (static_cast<double>(y_.size()) + 1.0 / (tau_ * tau_)); }
  double log_post(double mu) const {
    return -0.5 * std::log(2 * M_PI * post_var()) -
           0.5 * (mu - post_mean()) * (mu - post_mean()) / post_var();
  }
  // y ~ N(0, I + tau^2 11').
  double log_marginal() const {
    const auto n = static_cast<Eigen::Index>(y_.size());
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(n, n);
    s.array() += tau_ * tau_;
    const Eigen::LLT<Eigen::MatrixXd> llt(s);
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(y_.data(), n);
    const Eigen::VectorXd z = llt.matrixL().solve(y);
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    return -0.5 * (n * std::log(2 * M_PI) + logdet + z.squaredNorm());
  }

 private:
  std::vector<double> y_;
  double tau_;
};

// Likelihood defined only at the origin.
class Pinpoint final : public InferenceModel {
 public:
  std::string kind() const override { return "pinpoint"; }
  std::size_t dim() const override { return 1; }
  std::vector<std::string> names() const override { return {"a"}; }
  std::vector<double> to_natural(std::span<const double> t) const override { return {t.begin(), t.end()}; }
  std::vector<double> to_transformed(std::span<const double> n) const override { return {n.begin(), n.end()}; }
  double log_prior(std::span<const double>) const override { return 0.0; }
  LikelihoodEval log_likelihood(std::span<const double> t, std::uint64_t) const override {
    if (t[0] == 0.0) return {0.0, false, {}};
    return {-INFINITY, true, "undefined"};
  }
  bool exact() const override { return true; }
  std::vector<double> initial(std::uint64_t) const override { return {0.0}; }
};

Chain constant_chain(const InferenceModel& model, double value, std::size_t n) {
  Chain c;
  c.names = model.names();
  for (std::size_t i = 0; i < n; ++i) {
    c.transformed.push_back({value});
    c.draws.push_back({value});
    c.log_lik.push_back(model.log_likelihood(c.transformed.back(), 0).value);
    c.log_prior.push_back(model.log_prior(c.transformed.back()));
    c.accepted.push_back(0);
  }
  c.final_proposal = Eigen::MatrixXd::Identity(1, 1);
  c.burn_in = 0;
  return c;
}

double variance(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}

double toy_cj(const NormalMean& model, std::size_t m, std::uint64_t seed) {
  SamplerOptions o;
  o.burn_in = 1000;
  o.iterations = o.burn_in + m;
  o.seed = seed;
  ChibOptions co;
  co.seed = seed;
  return chib_jeliazkov(mh_exact(model, o), model, co).log_marginal;
}

}  // namespace

TEST(JarqueBera, NormalMomentsGiveZero) {
  // Two points at +-1 among six: skewness 0, kurtosis (1/3) / (1/3)^2 = 3.
  const std::vector<double> x{-1, 0, 0, 0, 0, 1};
  const auto jb = jarque_bera(x);
  EXPECT_NEAR(jb.skewness, 0.0, 1e-15);
  EXPECT_NEAR(jb.kurtosis, 3.0, 1e-12);
  EXPECT_NEAR(jb.statistic, 0.0, 1e-12);
  EXPECT_NEAR(jb.p_value, 1.0, 1e-12);
}

TEST(JarqueBera, HandComputedVector) {
  const std::vector<double> x{-2, -1, 0, 1, 2};
  // m2 = 10/5, m4 = 34/5.
  const double k = (34.0 / 5.0) / 4.0;
  const double stat = 5.0 * (k - 3.0) * (k - 3.0) / 24.0;
  const auto jb = jarque_bera(x);
  EXPECT_NEAR(jb.kurtosis, 1.7, 1e-14);
  EXPECT_NEAR(jb.statistic, stat, 1e-14);
  EXPECT_NEAR(jb.statistic, 0.35208333333333336, 1e-14);
  EXPECT_NEAR(jb.p_value, chi2_sf_even(stat, 2), 1e-14);
}

TEST(JarqueBera, SizeOnGaussianDraws) {
  int pass = 0;
  for (int s = 1; s <= 100; ++s) pass += jarque_bera(normal_draws(10000, s)).p_value > 0.01;
  EXPECT_GE(pass, 95);
}

TEST(JarqueBera, PermutationInvariant) {
  auto x = ar1(300, 0.6, 4);
  const auto a = jarque_bera(x);
  std::shuffle(x.begin(), x.end(), std::mt19937_64(5));
  const auto b = jarque_bera(x);
  EXPECT_NEAR(a.statistic, b.statistic, 1e-9);
}

TEST(JarqueBera, Errors) {
  EXPECT_THROW(jarque_bera(std::vector<double>(30, 1.5)), DomainError);
  EXPECT_THROW(jarque_bera(std::vector<double>{1.0, 2.0}), InvalidArgument);
}

TEST(LjungBox, MatchesDirectFormula) {
  const auto x = ar1(80, 0.3, 6);
  const double n = x.size();
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double c0 = 0.0;
  for (double v : x) c0 += (v - mean) * (v - mean);
  double q = 0.0, rho1 = 0.0;
  for (std::size_t k = 1; k <= 12; ++k) {
    double ck = 0.0;
    for (std::size_t t = k; t < x.size(); ++t) ck += (x[t] - mean) * (x[t - k] - mean);
    const double rho = ck / c0;
    if (k == 1) rho1 = rho;
    q += rho * rho / (n - k);
  }
  q *= n * (n + 2);
  const auto lb = ljung_box(x);
  EXPECT_NEAR(lb.rho1, rho1, 1e-12);
  EXPECT_NEAR(lb.statistic, q, 1e-9);
  EXPECT_NEAR(lb.p_value, chi2_sf_even(q, 12), 1e-12);
}

TEST(LjungBox, SizeOnWhiteNoise) {
  int pass = 0;
  for (int s = 1; s <= 100; ++s) pass += ljung_box(normal_draws(10000, 100 + s)).p_value > 0.01;
  EXPECT_GE(pass, 95);
}

TEST(LjungBox, PowerAgainstAr1) {
  int rejected = 0;
  for (int s = 1; s <= 100; ++s) rejected += ljung_box(ar1(500, 0.5, 200 + s)).p_value < 0.001;
  EXPECT_GE(rejected, 99);
}

TEST(LjungBox, PermutationDestroysSignificance) {
  auto x = ar1(500, 0.5, 7);
  EXPECT_LT(ljung_box(x).p_value, 1e-6);
  std::shuffle(x.begin(), x.end(), std::mt19937_64(8));
  EXPECT_GT(ljung_box(x).p_value, 0.001);
}

TEST(LjungBox, AlternatingSequence) {
  std::vector<double> x(400);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = i % 2 ? -1.0 : 1.0;
  EXPECT_NEAR(ljung_box(x).rho1, -1.0, 1.0 / x.size() + 1e-12);
  EXPECT_NEAR(autocorrelation(x, 2), 1.0, 2.0 / x.size() + 1e-12);
}

TEST(LjungBox, Errors) {
  EXPECT_THROW(ljung_box(std::vector<double>(12, 0.5)), InvalidArgument);
  EXPECT_THROW(ljung_box(std::vector<double>(40, 0.5)), DomainError);
}

TEST(BayesFactor, Arithmetic) {
  const auto a = assemble_marginal(200.0, -3.0, 32.85);
  const auto b = assemble_marginal(150.0, -2.0, 1.23);
  EXPECT_NEAR(a.log_marginal, 164.15, 1e-12);
  EXPECT_NEAR(b.log_marginal, 146.77, 1e-12);
  EXPECT_NEAR(log_bayes_factor(a, b), 17.38, 1e-10);
  EXPECT_EQ(log_bayes_factor(a, b), -log_bayes_factor(b, a));
  EXPECT_EQ(log_bayes_factor(a, a), 0.0);
}

TEST(MarginalLik, AssemblyIdentityIsExact) {
  const auto r = assemble_marginal(-512.25, 3.5, -1.75);
  EXPECT_EQ(r.log_marginal, r.log_lik + r.log_prior - r.log_ordinate);
}

TEST(MarginalLik, ConjugateOrdinateReproducesMarginal) {
  const NormalMean model(ar1(40, 0.0, 9), 2.0);
  for (double mu : {model.post_mean(), 0.0, 1.3}) {
    const std::vector<double> t{mu};
    const auto r = assemble_marginal(model.log_likelihood(t, 0).value, model.log_prior(t),
                                     model.log_post(mu));
    EXPECT_NEAR(r.log_marginal, model.log_marginal(), 1e-8);
  }
}

TEST(ChibJeliazkov, ConjugateToyFromChain) {
  auto y = normal_draws(30, 10);
  for (double& v : y) v += 0.7;
  const NormalMean model(y, 2.0);
  SamplerOptions o;
  o.iterations = 12000;
  o.burn_in = 2000;
  o.seed = 4;
  const auto chain = mh_exact(model, o);
  const auto r = chib_jeliazkov(chain, model, {});
  EXPECT_NEAR(r.theta_bar[0], model.post_mean(), 0.02);
  EXPECT_NEAR(r.log_marginal, model.log_marginal(), 0.03);
  EXPECT_EQ(r.m, 10000u);
  EXPECT_EQ(r.l, 10000u);
}

TEST(ChibJeliazkov, NumeratorReusesStoredLikelihoods) {
  const NormalMean model({0.1, -0.2, 0.4}, 1.0);
  const auto chain = constant_chain(model, 0.3, 50);
  model.calls = 0;
  ChibOptions o;
  o.l = 20;
  const auto r = chib_jeliazkov(chain, model, o);
  EXPECT_EQ(model.calls, 21u);
  EXPECT_EQ(r.l, 20u);
  EXPECT_EQ(r.log_marginal, r.log_lik + r.log_prior - r.log_ordinate);
}

TEST(ChibJeliazkov, ZeroDenominatorAsksForLargerL) {
  const Pinpoint model;
  const auto chain = constant_chain(model, 0.0, 10);
  try {
    chib_jeliazkov(chain, model, {});
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("increase L"), std::string::npos);
  }
}

TEST(ChibJeliazkov, DeterministicAcrossThreads) {
  const NormalMean model(normal_draws(20, 11), 1.5);
  SamplerOptions o;
  o.iterations = 3000;
  o.burn_in = 1000;
  const auto chain = mh_exact(model, o);
  ChibOptions one, four;
  four.threads = 4;
  EXPECT_EQ(chib_jeliazkov(chain, model, one).log_marginal,
            chib_jeliazkov(chain, model, four).log_marginal);
}

// Riemann sum of likelihood x prior over a 200 x 200 grid in (log v, log b).
TEST(ChibJeliazkov, LocalLevelMatchesQuadrature) {
  const auto prices = PriceSeries::from_log_prices(simulate_lgll({0.4, 0.1}, 50, 21));
  const LgllInference model(prices, PriorSpec{});
  SamplerOptions o;
  o.iterations = 25000;
  o.burn_in = 5000;
  o.seed = 7;
  const auto chain = mh_exact(model, o);
  const auto cj = chib_jeliazkov(chain, model, {});

  double lo[2], hi[2];
  for (int j = 0; j < 2; ++j) {
    std::vector<double> col;
    for (std::size_t i = chain.burn_in; i < chain.size(); ++i) col.push_back(chain.transformed[i][j]);
    const double m = std::accumulate(col.begin(), col.end(), 0.0) / col.size();
    const double sd = std::sqrt(variance(col));
    lo[j] = m - 10 * sd;
    hi[j] = m + 10 * sd;
  }
  const int n = 200;
  const double h0 = (hi[0] - lo[0]) / n, h1 = (hi[1] - lo[1]) / n;
  std::vector<double> terms;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      const std::vector<double> t{lo[0] + (i + 0.5) * h0, lo[1] + (k + 0.5) * h1};
      terms.push_back(kalman_loglik({std::exp(t[1]), std::exp(t[0])}, prices) + model.log_prior(t));
    }
  const double oracle = log_sum_exp(terms) + std::log(h0 * h1);
  EXPECT_NEAR(cj.log_marginal, oracle, 0.1);
}

TEST(ChibJeliazkov, SpreadShrinksWithDraws) {
  const NormalMean model(normal_draws(25, 22), 2.0);
  double last = INFINITY;
  for (std::size_t m : {100, 1000, 10000}) {
    std::vector<double> est;
    for (std::uint64_t s = 1; s <= 20; ++s) est.push_back(toy_cj(model, m, s));
    const double v = variance(est);
    EXPECT_LT(v, last) << "M=" << m;
    last = v;
  }
}

// The storage model should win on its own simulated data. Deep stock-outs
// make a small-N filter estimate noisy, so the path avoids them.
TEST(ChibJeliazkov, StorageModelPreferredOnStorageData) {
  ModelParams p;
  p.v = 0.097;
  p.delta = 0.011;
  p.b = 0.42;
  const auto sol = solve_equilibrium(p);
  SimulatedPath path;
  for (std::uint64_t seed = 1;; ++seed) {
    path = simulate(p, sol, 150, 500, seed);
    if (*std::min_element(path.states.begin(), path.states.end()) > sol.x_star() - 1.5) break;
  }
  SolverConfig coarse;
  coarse.grid_size = 40;
  coarse.quad_nodes = 32;
  coarse.policy_tol = 1e-6;
  coarse.root_tol = 1e-8;
  FilterOptions f;
  f.particles = 1000;
  f.threads = 0;
  const StorageSsmInference storage(path.series(), PriorSpec{}, coarse, f);
  SamplerOptions o;
  o.iterations = 1500;
  o.burn_in = 500;
  o.initial = {p.v, p.delta, p.b};
  ChibOptions co;
  co.l = 500;
  co.threads = 0;
  const auto ms = chib_jeliazkov(pmmh(storage, o), storage, co);

  const LgllInference lgll(path.series(), PriorSpec{});
  o.iterations = 6000;
  o.burn_in = 2000;
  o.initial.clear();
  const auto ml = chib_jeliazkov(mh_exact(lgll, o), lgll, {});
  EXPECT_GT(log_bayes_factor(ms, ml), 0.0);
}

TEST(ChibJeliazkov, RequiresPostBurnInDraws) {
  const NormalMean model({0.0, 1.0}, 1.0);
  auto chain = constant_chain(model, 0.2, 5);
  chain.burn_in = 4;
  EXPECT_THROW(chib_jeliazkov(chain, model, {}), InvalidArgument);
}

TEST(StorageSummaries, AnnualCost) {
  auto printed = [](double x) { return std::round(x * 10.0) / 10.0; };
  EXPECT_EQ(printed(storage_cost_annual(0.0112)), 12.6);
  EXPECT_EQ(printed(storage_cost_annual(0.0023)), 2.7);
  EXPECT_EQ(storage_cost_annual(0.0), 0.0);
  for (double d : {0.001, 0.05, 0.3})
    EXPECT_NEAR(storage_cost_annual(d), -100.0 * std::expm1(12.0 * std::log1p(-d)), 1e-12);
  EXPECT_THROW(storage_cost_annual(1.0), InvalidArgument);
}

TEST(StorageSummaries, Elasticity) {
  EXPECT_NEAR(price_elasticity(0.42, 5.0), -1.0 / 2.1, 1e-15);
  EXPECT_THROW(price_elasticity(0.0, 5.0), InvalidArgument);
  EXPECT_THROW(price_elasticity(0.42, 0.0), DomainError);
}

TEST(MvnLogDensity, MatchesUnivariate) {
  Eigen::MatrixXd l(1, 1);
  l(0, 0) = 2.0;
  const std::vector<double> x{1.0}, m{0.0};
  EXPECT_NEAR(mvn_log_density(x, m, l), -0.5 * std::log(2 * M_PI * 4.0) - 0.125, 1e-14);
}
