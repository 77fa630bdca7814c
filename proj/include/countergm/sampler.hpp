#ifndef COUNTERGM_SAMPLER_HPP
#define COUNTERGM_SAMPLER_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "countergm/terms.hpp"

namespace countergm {

using Rng = std::mt19937_64;

struct SamplerControl {
  std::size_t burnin = 10000;
  std::size_t interval = 100;  // MH steps between retained draws
  std::size_t draws = 1000;    // total over all chains
  double pi0 = 0.2;            // probability of proposing 0 from a nonzero value
  std::uint64_t seed = 1;
  std::size_t chains = 1;
  std::size_t threads = 1;

  /// Empty when valid, otherwise a description of the problem.
  std::string validate() const;
};

struct SampleBatch {
  std::vector<std::string> labels;
  Eigen::MatrixXd stats;                     // draws x p
  std::vector<CountNetwork> final_networks;  // one per chain
  std::vector<std::size_t> chain_starts;     // first row of each chain in stats
  double acceptance_rate = 0.0;
  SamplerControl control;

  const CountNetwork& final_network() const { return final_networks.back(); }
  std::size_t size() const { return static_cast<std::size_t>(stats.rows()); }
};

/// Probability that a Poisson(y + 1/2) draw conditioned on being != y equals y_star.
double proposal_pmf(Count y_star, Count y);
double log_proposal_pmf(Count y_star, Count y);

/// Draws the proposal for a dyad currently at y (jump to 0 with probability
/// pi0 when y != 0, otherwise the truncated Poisson kernel).
Count propose(Count y, double pi0, Rng& rng);

/// log of the Hastings factor q(y -> y_star) for the mixed kernel.
double log_hastings(Count y, Count y_star, double pi0);

/// One Metropolis-Hastings update of a uniformly chosen dyad, applied in place.
/// On acceptance the change statistic is written to delta (size p) and true is returned.
bool mh_step(const Model& model, std::span<const double> theta, CountNetwork& y, double pi0, Rng& rng,
             std::span<double> delta);

/// Runs control.chains chains from y0 and retains control.draws statistic vectors.
/// Deterministic for a given control (thread count does not change the output).
SampleBatch sample(const Model& model, std::span<const double> theta, const CountNetwork& y0,
                   const SamplerControl& control);

/// Same, with one starting network per chain.
SampleBatch sample(const Model& model, std::span<const double> theta, const std::vector<CountNetwork>& starts,
                   const SamplerControl& control);

/// Per-chain seed derived from the control seed.
std::uint64_t chain_seed(std::uint64_t seed, std::size_t chain);

}  // namespace countergm

#endif
