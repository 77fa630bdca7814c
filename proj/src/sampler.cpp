#include "countergm/sampler.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <thread>

namespace countergm {

std::string SamplerControl::validate() const {
  if (interval < 1) return "sampler interval must be >= 1";
  if (draws < 1) return "sampler draws must be >= 1";
  if (!(pi0 >= 0.0 && pi0 < 1.0)) return "pi0 must lie in [0, 1)";
  if (chains < 1) return "at least one chain is required";
  if (chains > draws) return "more chains than draws";
  return {};
}

double log_proposal_pmf(Count y_star, Count y) {
  if (y_star == y) throw std::invalid_argument("proposal_pmf: y_star must differ from y");
  const double lambda = static_cast<double>(y) + 0.5;
  const double log_lambda = std::log(lambda);
  const double log_excluded = -lambda + static_cast<double>(y) * log_lambda - log_factorial(y);
  return -lambda + static_cast<double>(y_star) * log_lambda - log_factorial(y_star) -
         std::log1p(-std::exp(log_excluded));
}

double proposal_pmf(Count y_star, Count y) { return std::exp(log_proposal_pmf(y_star, y)); }

Count propose(Count y, double pi0, Rng& rng) {
  if (y != 0 && pi0 > 0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < pi0) return 0;
  std::poisson_distribution<Count> kernel(static_cast<double>(y) + 0.5);
  Count y_star;
  do {
    y_star = kernel(rng);
  } while (y_star == y);
  return y_star;
}

double log_hastings(Count y, Count y_star, double pi0) {
  if (y == 0) return std::log(pi0 + (1 - pi0) * proposal_pmf(0, y_star)) - log_proposal_pmf(y_star, 0);
  if (y_star == 0) return log_proposal_pmf(y, 0) - std::log(pi0 + (1 - pi0) * proposal_pmf(0, y));
  return log_proposal_pmf(y, y_star) - log_proposal_pmf(y_star, y);
}

bool mh_step(const Model& model, std::span<const double> theta, CountNetwork& y, double pi0, Rng& rng,
             std::span<double> delta) {
  const auto& dyads = y.dyads();
  const Dyad d = dyads[std::uniform_int_distribution<std::size_t>(0, dyads.size() - 1)(rng)];
  const Count current = y.at(d.tail, d.head);
  const Count proposed = propose(current, pi0, rng);

  model.change(y, d, current, proposed, delta);
  double log_r = log_hastings(current, proposed, pi0) + log_reference_ratio(model.reference(), current, proposed);
  for (std::size_t k = 0; k < theta.size(); ++k) log_r += theta[k] * delta[k];

  if (!(log_r >= 0.0)) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (!(std::log(u) < log_r)) return false;
  }
  y.set_value(d.tail, d.head, proposed);
  return true;
}

std::uint64_t chain_seed(std::uint64_t seed, std::size_t chain) {
  // splitmix64 finalizer over (seed, chain)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (chain + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

struct ChainOutput {
  Eigen::MatrixXd stats;
  CountNetwork final_network;
  std::size_t accepted = 0;
  std::size_t steps = 0;
};

ChainOutput run_chain(const Model& model, std::span<const double> theta, CountNetwork y,
                      const SamplerControl& control, std::size_t draws, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t p = model.dimension();
  std::vector<double> delta(p), g(p);
  ChainOutput out{Eigen::MatrixXd(draws, p), y, 0, 0};

  auto advance = [&](std::size_t steps) {
    for (std::size_t t = 0; t < steps; ++t)
      if (mh_step(model, theta, y, control.pi0, rng, delta)) ++out.accepted;
    out.steps += steps;
  };

  advance(control.burnin);
  for (std::size_t s = 0; s < draws; ++s) {
    advance(control.interval);
    model.evaluate(y, g);
    for (std::size_t k = 0; k < p; ++k) out.stats(s, k) = g[k];
  }
  out.final_network = std::move(y);
  return out;
}

}  // namespace

SampleBatch sample(const Model& model, std::span<const double> theta, const CountNetwork& y0,
                   const SamplerControl& control) {
  return sample(model, theta, std::vector<CountNetwork>(std::max<std::size_t>(control.chains, 1), y0), control);
}

SampleBatch sample(const Model& model, std::span<const double> theta, const std::vector<CountNetwork>& starts,
                   const SamplerControl& control) {
  if (auto msg = control.validate(); !msg.empty()) throw std::invalid_argument(msg);
  if (theta.size() != model.dimension()) throw ModelError("theta has the wrong dimension");
  if (auto msg = check_constraints(model.spec(), theta); !msg.empty()) throw ModelError(msg);
  if (starts.size() != control.chains) throw std::invalid_argument("need one starting network per chain");

  const std::size_t chains = control.chains;
  std::vector<std::size_t> per_chain(chains, control.draws / chains);
  for (std::size_t c = 0; c < control.draws % chains; ++c) ++per_chain[c];

  std::vector<std::optional<ChainOutput>> results(chains);
  auto work = [&](std::size_t c) {
    results[c] = run_chain(model, theta, starts[c], control, per_chain[c], chain_seed(control.seed, c));
  };
  const std::size_t threads = std::min(std::max<std::size_t>(control.threads, 1), chains);
  if (threads <= 1) {
    for (std::size_t c = 0; c < chains; ++c) work(c);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t c = t; c < chains; c += threads) work(c);
      });
  }

  SampleBatch batch;
  batch.labels = model.labels();
  batch.control = control;
  batch.stats.resize(static_cast<Eigen::Index>(control.draws), static_cast<Eigen::Index>(model.dimension()));
  std::size_t row = 0, accepted = 0, steps = 0;
  for (auto& r : results) {
    batch.chain_starts.push_back(row);
    batch.stats.middleRows(static_cast<Eigen::Index>(row), r->stats.rows()) = r->stats;
    row += static_cast<std::size_t>(r->stats.rows());
    accepted += r->accepted;
    steps += r->steps;
    batch.final_networks.push_back(std::move(r->final_network));
  }
  batch.acceptance_rate = steps ? static_cast<double>(accepted) / static_cast<double>(steps) : 0.0;
  return batch;
}

}  // namespace countergm
