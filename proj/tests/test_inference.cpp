#include <cmath>
#include <random>

#include "countergm/distributions.hpp"
#include "countergm/inference.hpp"
#include "doctest.h"

using namespace countergm;

namespace {

Model make(std::vector<TermSpec> terms, std::size_t n, bool directed, Reference ref = Reference::poisson) {
  return Model(ModelSpec{std::move(terms), ref}, NodeAttributes(), n, directed);
}

CountNetwork poisson_network(std::size_t n, bool directed, double mu, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::poisson_distribution<int> pois(mu);
  CountNetwork y(n, directed);
  for (const auto& d : y.dyads()) y.set_value(d.tail, d.head, pois(rng));
  return y;
}

SampleBatch batch_from(const Eigen::MatrixXd& m) {
  SampleBatch b;
  b.stats = m;
  b.chain_starts = {0};
  for (Eigen::Index k = 0; k < m.cols(); ++k) b.labels.push_back("s" + std::to_string(k));
  return b;
}

FitControl quick_control(std::uint64_t seed) {
  FitControl c;
  c.sampler.burnin = 2000;
  c.sampler.interval = 200;
  c.sampler.draws = 1000;
  c.sampler.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("effective sample size") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  const int S = 20000;
  Eigen::VectorXd iid(S), ar(S);
  double prev = 0;
  for (int s = 0; s < S; ++s) {
    iid[s] = z(rng);
    prev = 0.9 * prev + std::sqrt(1 - 0.81) * z(rng);
    ar[s] = prev;
  }
  CHECK(effective_sample_size(iid) == doctest::Approx(S).epsilon(0.1));
  CHECK(effective_sample_size(ar) == doctest::Approx(S * 0.1 / 1.9).epsilon(0.2));
  Eigen::VectorXd flat = Eigen::VectorXd::Constant(100, 3.0);
  CHECK(effective_sample_size(flat) == 100.0);
}

TEST_CASE("bimodality check") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z;
  std::gamma_distribution<double> gam(2.0, 1.0);
  std::poisson_distribution<int> p05(0.5), p3(3.0);
  std::uniform_real_distribution<double> u;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> a(2000), b(2000), c(2000), d(2000), e(2000), mix(2000);
    for (int s = 0; s < 2000; ++s) {
      a[s] = z(rng);
      b[s] = gam(rng);
      c[s] = p05(rng);
      d[s] = p3(rng);
      e[s] = u(rng);
      mix[s] = s % 3 == 0 ? 8 + z(rng) : z(rng);
    }
    CHECK_FALSE(check_bimodality(a).bimodal);
    CHECK_FALSE(check_bimodality(b).bimodal);
    CHECK_FALSE(check_bimodality(c).bimodal);
    CHECK_FALSE(check_bimodality(d).bimodal);
    CHECK_FALSE(check_bimodality(e).bimodal);
    auto m = check_bimodality(mix);
    CHECK(m.bimodal);
    CHECK(m.modes == 2);
    CHECK(m.minor_mass == doctest::Approx(1.0 / 3).epsilon(0.1));
  }
}

TEST_CASE("batch means covariance of iid rows") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  Eigen::MatrixXd m(10000, 2);
  for (Eigen::Index s = 0; s < m.rows(); ++s) {
    m(s, 0) = z(rng);
    m(s, 1) = 2 * z(rng);
  }
  auto v = batch_means_covariance(batch_from(m));
  CHECK(v(0, 0) == doctest::Approx(1.0 / 10000).epsilon(0.35));
  CHECK(v(1, 1) == doctest::Approx(4.0 / 10000).epsilon(0.35));
}

TEST_CASE("normalizing constant ratio") {
  auto m = make({TermSpec::of(TermKind::sum)}, 2, false);
  SamplerControl c;
  c.burnin = 100;
  c.interval = 5;
  c.draws = 100000;
  const double t0[] = {0.0}, t1[] = {std::log(2.0)};
  auto at0 = sample(m, t0, CountNetwork(2, false), c);
  CHECK(log_normconst_ratio(at0, t0, t0).log_ratio == 0.0);
  auto r = log_normconst_ratio(at0, t0, t1);
  // exact: kappa(theta) = exp(e^theta)
  CHECK(r.log_ratio == doctest::Approx(1.0).epsilon(0.03));
  CHECK(r.reliable);
  auto at1 = sample(m, t1, CountNetwork(2, false), c);
  auto back = log_normconst_ratio(at1, t1, t0);
  CHECK(std::abs(r.log_ratio + back.log_ratio) < 0.05);

  const double far[] = {8.0};
  auto bad = log_normconst_ratio(at0, t0, far);
  CHECK_FALSE(bad.reliable);
  CHECK_THROWS(log_normconst_ratio(SampleBatch{}, t0, t1));
}

TEST_CASE("default starting values") {
  auto y = poisson_network(12, true, 1.3, 5);
  auto m = make({TermSpec::of(TermKind::sum), TermSpec::of(TermKind::transitive_minmax)}, 12, true);
  auto th = default_theta0(m, y);
  const double mean = static_cast<double>(y.total()) / y.dyad_count();
  CHECK(th[0] == doctest::Approx(std::log(mean + 1e-3)));
  CHECK(th[1] == 0.0);

  // zero-modified Poisson closed form reproduces P(0) and the nonzero mean
  auto z = make({TermSpec::of(TermKind::sum), TermSpec::of(TermKind::nonzero)}, 12, true);
  auto tz = default_theta0(z, y);
  const double p0 = 1.0 - static_cast<double>(y.nonzero()) / y.dyad_count();
  CHECK(zmp_pmf(tz[0], tz[1], 0) == doctest::Approx(p0).epsilon(1e-9));
  double nz_mean = 0;
  for (Count k = 1; k < 100; ++k) nz_mean += k * zmp_pmf(tz[0], tz[1], k);
  CHECK(nz_mean / (1 - p0) == doctest::Approx(static_cast<double>(y.total()) / y.nonzero()).epsilon(1e-6));

  auto g = make({TermSpec::of(TermKind::sum)}, 12, true, Reference::geometric);
  CHECK(default_theta0(g, y)[0] < 0);
}

TEST_CASE("MCMC MLE of the sum model matches the closed form") {
  auto y = poisson_network(15, true, 0.7, 11);
  auto m = make({TermSpec::of(TermKind::sum)}, 15, true);
  const double exact = std::log(static_cast<double>(y.total()) / y.dyad_count());
  const double start[] = {0.5};
  auto fit = mcmc_mle(m, y, start, quick_control(21));
  REQUIRE(fit.status == FitStatus::converged);
  CHECK(fit.converged);
  const double mcse = fit.mc_std_errors()[0];
  CHECK(mcse > 0);
  CHECK(std::abs(fit.theta[0] - exact) < 3 * mcse + 1e-9);
  // Poisson MLE standard error: 1 / sqrt(total)
  CHECK(fit.std_errors[0] == doctest::Approx(1.0 / std::sqrt(double(y.total()))).epsilon(0.15));
  CHECK(fit.vcov(0, 0) >= fit.mc_vcov(0, 0));
  CHECK(fit.iterations >= 2);
  CHECK(fit.loglik_ratio > 0);

  SUBCASE("method of moments agrees") {
    FitControl c = quick_control(22);
    c.sampler.interval = 50;
    c.mom_iterations = 4000;
    auto mom = mom_fit(m, y, start, c);
    CHECK(mom.status == FitStatus::converged);
    const double combined = std::hypot(mcse, mom.mc_std_errors()[0]);
    CHECK(std::abs(mom.theta[0] - fit.theta[0]) < 2 * combined);
  }
}

TEST_CASE("method of moments contracts") {
  auto y = poisson_network(8, true, 1.0, 3);
  auto m = make({TermSpec::of(TermKind::sum)}, 8, true);
  FitControl c = quick_control(1);
  c.mom_gain = 0.0;
  const double start[] = {0.25};
  auto r = mom_fit(m, y, start, c);
  CHECK_FALSE(r.converged);
  CHECK(r.theta[0] == 0.25);
  c.mom_exponent = 0.4;
  CHECK_THROWS_AS(mom_fit(m, y, start, c), std::invalid_argument);
}

TEST_CASE("zero-modified model recovers its generating parameters") {
  auto m = make({TermSpec::of(TermKind::sum), TermSpec::of(TermKind::nonzero)}, 20, true);
  const double truth[] = {0.6, -1.2};
  SamplerControl sc;
  sc.burnin = 20000;
  sc.interval = 10;
  sc.draws = 1;
  sc.seed = 4;
  auto sim = sample(m, truth, CountNetwork(20, true), sc);
  const CountNetwork& y = sim.final_network();
  auto theta0 = default_theta0(m, y);
  auto fit = mcmc_mle(m, y, theta0, quick_control(8));
  REQUIRE(fit.converged);
  for (int k = 0; k < 2; ++k) CHECK(std::abs(fit.theta[k] - truth[k]) < 3 * fit.std_errors[k]);

  SUBCASE("diagnostics at the estimate") {
    auto d = diagnostics(fit.sample, std::vector<double>(fit.observed.data(), fit.observed.data() + 2));
    CHECK(d.max_abs_z < 3);
    CHECK_FALSE(d.bimodal);
    CHECK(d.stats[0].ess > 50);
  }
}

TEST_CASE("fitting refuses invalid starts") {
  auto m = make({TermSpec::of(TermKind::sum), TermSpec::of(TermKind::cmp)}, 5, true);
  const double bad[] = {0.0, 2.0};
  CHECK_THROWS_AS(mcmc_mle(m, CountNetwork(5, true), bad, quick_control(1)), ModelError);
}

TEST_CASE("Monte Carlo test") {
  auto y = poisson_network(10, true, 1.0, 9);
  auto null = make({TermSpec::of(TermKind::sum)}, 10, true);
  const double th[] = {std::log(static_cast<double>(y.total()) / y.dyad_count())};
  SamplerControl c;
  c.burnin = 2000;
  c.interval = 100;
  c.draws = 999;
  auto r = monte_carlo_test(null, th, TermSpec::of(TermKind::mutual_min), NodeAttributes(), y, c);
  CHECK(r.nsim == 999);
  CHECK(r.p_value == doctest::Approx((1.0 + r.at_least) / 1000.0));
  // the data are independent Poisson, so the observed mutuality is typical
  CHECK(r.p_value > 0.01);
  CHECK(r.p_value < 0.99);
  CHECK(r.quantiles[0] <= r.quantiles[4]);
  CHECK_THROWS_AS(monte_carlo_test(null, th, TermSpec::of(TermKind::sum), NodeAttributes(), y, c), FitError);

  FitResult unconverged;
  CHECK_THROWS_AS(monte_carlo_test(null, unconverged, TermSpec::of(TermKind::mutual_min), NodeAttributes(), y, c),
                  FitError);
}

TEST_CASE("expectation increases with the coefficient") {
  auto m = make({TermSpec::of(TermKind::sum)}, 6, true);
  SamplerControl c;
  c.burnin = 500;
  c.interval = 30;
  c.draws = 2000;
  double last = -1;
  for (double mu : {0.5, 1.0, 2.0}) {
    const double th[] = {std::log(mu)};
    const double mean = sample(m, th, CountNetwork(6, true), c).stats.col(0).mean();
    CHECK(mean > last);
    last = mean;
  }
}
