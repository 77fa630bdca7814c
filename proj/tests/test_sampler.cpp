#include <cmath>
#include <map>
#include <set>

#include "countergm/distributions.hpp"
#include "countergm/sampler.hpp"
#include "doctest.h"
#include "stat_helpers.hpp"

using namespace countergm;

namespace {

Model make(std::vector<TermSpec> terms, std::size_t n, bool directed, Reference ref = Reference::poisson) {
  return Model(ModelSpec{std::move(terms), ref}, NodeAttributes(), n, directed);
}

std::map<long, long> tabulate_first_column(const SampleBatch& b) {
  std::map<long, long> counts;
  for (Eigen::Index s = 0; s < b.stats.rows(); ++s) ++counts[std::lround(b.stats(s, 0))];
  return counts;
}

}  // namespace

TEST_CASE("proposal kernel") {
  CHECK(proposal_pmf(1, 0) == doctest::Approx(std::exp(-0.5) * 0.5 / (1 - std::exp(-0.5))).epsilon(1e-14));
  CHECK(proposal_pmf(1, 0) == doctest::Approx(0.7707).epsilon(1e-4));
  CHECK(proposal_pmf(0, 2) == doctest::Approx(std::exp(-2.5) / (1 - std::exp(-2.5) * 2.5 * 2.5 / 2)).epsilon(1e-14));
  CHECK(proposal_pmf(0, 2) == doctest::Approx(0.1104).epsilon(1e-3));
  // numerically normalized truncated kernel
  double z = 0;
  for (Count k = 0; k <= 200; ++k)
    if (k != 2) z += poisson_pmf(2.5, k);
  CHECK(proposal_pmf(0, 2) == doctest::Approx(poisson_pmf(2.5, 0) / z).epsilon(1e-12));

  double s = 0;
  for (Count k = 0; k <= 200; ++k)
    if (k != 3) s += proposal_pmf(k, 3);
  CHECK(std::abs(s - 1.0) < 1e-12);
  CHECK_THROWS(proposal_pmf(4, 4));
}

TEST_CASE("Hastings factor cases") {
  const double pi0 = 0.3;
  CHECK(std::exp(log_hastings(0, 4, pi0)) ==
        doctest::Approx((pi0 + (1 - pi0) * proposal_pmf(0, 4)) / proposal_pmf(4, 0)));
  CHECK(std::exp(log_hastings(4, 0, pi0)) ==
        doctest::Approx(proposal_pmf(4, 0) / (pi0 + (1 - pi0) * proposal_pmf(0, 4))));
  CHECK(std::exp(log_hastings(2, 5, pi0)) == doctest::Approx(proposal_pmf(2, 5) / proposal_pmf(5, 2)));
  CHECK(log_hastings(2, 5, pi0) == doctest::Approx(-log_hastings(5, 2, pi0)));
  CHECK(log_hastings(0, 3, pi0) == doctest::Approx(-log_hastings(3, 0, pi0)));
}

TEST_CASE("proposal frequencies follow the kernel") {
  Rng rng(3);
  std::map<long, long> counts;
  const int N = 200000;
  for (int i = 0; i < N; ++i) ++counts[static_cast<long>(propose(3, 0.25, rng))];
  fit::GofResult g = fit::goodness_of_fit(counts, [](long k) {
    if (k == 3) return 0.0;
    return (k == 0 ? 0.25 : 0.0) + 0.75 * proposal_pmf(static_cast<Count>(k), 3);
  });
  CHECK(g.p_value > 0.001);
}

TEST_CASE("single-dyad detailed balance") {
  auto model = make({TermSpec::of(TermKind::sum)}, 2, false);
  const double theta[] = {std::log(2.0)};
  CountNetwork y(2, false);
  Rng rng(17);
  std::vector<double> delta(1);
  std::map<long, long> counts;
  for (int t = 0; t < 1000000; ++t) {
    mh_step(model, theta, y, 0.0, rng, delta);
    ++counts[static_cast<long>(y.at(0, 1))];
  }
  auto g = fit::goodness_of_fit(counts, [](long k) { return poisson_pmf(2.0, k); });
  CHECK(g.tv < 0.01);
}

TEST_CASE("stationary laws of dyad-independent models") {
  SamplerControl c;
  c.burnin = 1000;
  c.interval = 5;
  c.draws = 100000;
  for (double pi0 : {0.0, 0.2, 0.5}) {
    c.pi0 = pi0;
    CAPTURE(pi0);
    {
      auto m = make({TermSpec::of(TermKind::sum)}, 2, false);
      const double th[] = {std::log(2.0)};
      auto b = sample(m, th, CountNetwork(2, false), c);
      auto g = fit::goodness_of_fit(tabulate_first_column(b), [](long k) { return poisson_pmf(2.0, k); });
      CHECK(g.tv < 0.01);
      CHECK(g.p_value > 0.001);
    }
    {
      auto m = make({TermSpec::of(TermKind::sum)}, 2, false, Reference::geometric);
      const double th[] = {std::log(0.5)};
      auto b = sample(m, th, CountNetwork(2, false), c);
      auto g = fit::goodness_of_fit(tabulate_first_column(b), [](long k) { return geometric_pmf(0.5, k); });
      CHECK(g.tv < 0.01);
      CHECK(g.p_value > 0.001);
    }
    {
      auto m = make({TermSpec::of(TermKind::sum), TermSpec::of(TermKind::nonzero)}, 2, false);
      const double th[] = {0.4, -0.8};
      auto b = sample(m, th, CountNetwork(2, false), c);
      auto g = fit::goodness_of_fit(tabulate_first_column(b), [&](long k) { return zmp_pmf(th[0], th[1], k); });
      CHECK(g.tv < 0.01);
      CHECK(g.p_value > 0.001);
    }
  }
}

TEST_CASE("reachability") {
  // every value 0..20 is proposed from 0 through chained kernel moves
  Rng rng(1);
  std::set<Count> seen;
  Count y = 0;
  for (int t = 0; t < 100000 && seen.size() < 21; ++t) {
    y = propose(y, 0.2, rng);
    if (y > 25) y = 0;
    if (y <= 20) seen.insert(y);
  }
  CHECK(seen.size() == 21);

  auto m = make({TermSpec::of(TermKind::sum)}, 2, false);
  const double th[] = {std::log(10.0)};
  CountNetwork net(2, false);
  std::vector<double> delta(1);
  std::set<Count> visited;
  for (int t = 0; t < 1000000 && visited.size() < 21; ++t) {
    mh_step(m, th, net, 0.2, rng, delta);
    if (net.at(0, 1) <= 20) visited.insert(net.at(0, 1));
  }
  CHECK(visited.size() == 21);
}

TEST_CASE("batch properties") {
  auto m = make({TermSpec::of(TermKind::sum), TermSpec::of(TermKind::transitive_minmax),
                 TermSpec::within_actor_covariance(ActorDirection::out)},
                6, true);
  const double th[] = {0.3, -0.1, 0.2};
  SamplerControl c;
  c.burnin = 200;
  c.interval = 20;
  c.draws = 50;
  c.chains = 3;
  c.seed = 99;
  auto a = sample(m, th, CountNetwork(6, true), c);
  c.threads = 3;
  auto b = sample(m, th, CountNetwork(6, true), c);
  CHECK(a.stats == b.stats);
  CHECK(a.final_networks == b.final_networks);
  CHECK(a.chain_starts == std::vector<std::size_t>{0, 17, 34});
  REQUIRE(a.final_networks.size() == 3);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const auto row = static_cast<Eigen::Index>(ch + 1 < 3 ? a.chain_starts[ch + 1] - 1 : a.size() - 1);
    auto g = eval_stats(m, a.final_networks[ch]);
    for (std::size_t k = 0; k < 3; ++k) CHECK(a.stats(row, k) == g.values[k]);
  }
  c.seed = 100;
  auto d = sample(m, th, CountNetwork(6, true), c);
  CHECK_FALSE(a.stats == d.stats);
  CHECK(a.acceptance_rate > 0);
  CHECK(a.acceptance_rate < 1);
}

TEST_CASE("sum model on a directed network") {
  auto m = make({TermSpec::of(TermKind::sum)}, 10, true);
  const double th[] = {std::log(2.0)};
  SamplerControl c;
  c.burnin = 2000;
  c.interval = 90;
  c.draws = 2000;
  auto b = sample(m, th, CountNetwork(10, true), c);
  const double per_dyad = b.stats.col(0).mean() / 90.0;
  // independent dyads: sd of the per-dyad mean over 2000 (nearly) independent draws
  CHECK(std::abs(per_dyad - 2.0) < 4 * std::sqrt(2.0 / 90.0 / 2000.0));
}

TEST_CASE("sampler refuses constraint violations") {
  auto m = make({TermSpec::of(TermKind::sum), TermSpec::of(TermKind::cmp)}, 3, true);
  const double th[] = {0.0, 1.5};
  SamplerControl c;
  CHECK_THROWS_AS(sample(m, th, CountNetwork(3, true), c), ModelError);
  c.pi0 = 1.0;
  const double ok[] = {0.0, -0.5};
  CHECK_THROWS_AS(sample(m, ok, CountNetwork(3, true), c), std::invalid_argument);
}
