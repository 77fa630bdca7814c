#ifndef COUNTERGM_INFERENCE_HPP
#define COUNTERGM_INFERENCE_HPP

#include <Eigen/Dense>
#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "countergm/sampler.hpp"

namespace countergm {

// ---------------------------------------------------------------------------
// Diagnostics

/// Geyer's initial positive sequence estimate for a single chain.
double effective_sample_size(const Eigen::Ref<const Eigen::VectorXd>& x);

/// ESS of one column summed over the chains of a batch.
double effective_sample_size(const SampleBatch& batch, Eigen::Index column);

struct BimodalityCheck {
  bool bimodal = false;
  int modes = 1;               // significant modes in the smoothed density
  double valley_ratio = 1.0;   // antimode density / smaller adjacent peak
  double minor_mass = 0.0;     // sample fraction on the smaller side of the antimode
  double bandwidth = 0.0;
};

/// Kernel-density mode check. A split counts when the antimode density is below
/// half the smaller neighbouring peak and each side holds at least 5% of the
/// sample. ess (if > 0) replaces the sample size in the bandwidth rule.
BimodalityCheck check_bimodality(std::vector<double> x, double ess = 0.0);

struct StatDiagnostics {
  std::string label;
  double observed = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  double ess = 0.0;
  double mcse = 0.0;  // sd / sqrt(ess)
  double z = 0.0;     // (mean - observed) / mcse
  std::array<double, 5> quantiles{};  // 5%, 25%, 50%, 75%, 95%
  BimodalityCheck bimodality;
};

struct Diagnostics {
  std::vector<StatDiagnostics> stats;
  double acceptance_rate = 0.0;
  std::size_t draws = 0;
  bool bimodal = false;
  double max_abs_z = 0.0;
};

Diagnostics diagnostics(const SampleBatch& batch, std::span<const double> observed);

/// Covariance of the sample mean via non-overlapping batch means within chains.
Eigen::MatrixXd batch_means_covariance(const SampleBatch& batch);

// ---------------------------------------------------------------------------
// Likelihood machinery

struct NormconstRatio {
  double log_ratio = 0.0;
  double ess = 0.0;  // importance-weight effective sample size
  bool reliable = true;
};

/// log kappa(theta') / kappa(theta) from a sample drawn at theta.
NormconstRatio log_normconst_ratio(const SampleBatch& batch, std::span<const double> theta,
                                   std::span<const double> theta_prime);

enum class FitStatus { converged, boundary, not_converged, degenerate };
const char* to_string(FitStatus status);

struct FitControl {
  SamplerControl sampler;            // per iteration; chains continue across iterations
  std::size_t max_iterations = 60;
  double trust_radius = 2.0;         // Mahalanobis, in units of the sample covariance
  double tolerance = 0.1;            // max |mean - observed| / sd over statistics
  std::size_t final_draws = 0;       // > sampler.draws: fresh, larger sample at the estimate
  bool abort_on_degeneracy = true;
  std::size_t degeneracy_patience = 2;  // consecutive flagged iterations before aborting

  // Robbins-Monro
  double mom_gain = 0.5;
  double mom_offset = 10.0;
  double mom_exponent = 0.75;
  std::size_t mom_iterations = 5000;
  std::size_t mom_pilot_draws = 500;
  std::size_t mom_steps = 0;  // MH steps per update; 0 uses sampler.interval

  std::string validate() const;
};

struct IterationRecord {
  std::vector<double> theta;
  double discrepancy = 0.0;
  bool projected = false;
  bool bimodal = false;
};

struct FitResult {
  std::vector<std::string> labels;
  Eigen::VectorXd theta;
  Eigen::MatrixXd vcov;     // inverse information plus the Monte Carlo component
  Eigen::MatrixXd mc_vcov;  // Monte Carlo component alone
  Eigen::VectorXd std_errors;
  Eigen::VectorXd observed;
  std::size_t iterations = 0;
  bool converged = false;
  FitStatus status = FitStatus::not_converged;
  std::string message;
  double discrepancy = 0.0;       // final max standardized moment discrepancy
  double loglik_ratio = 0.0;      // estimated l(theta_hat) - l(theta0)
  SampleBatch sample;             // draws at the final parameter
  std::vector<IterationRecord> history;
  std::string method;

  Eigen::VectorXd mc_std_errors() const { return mc_vcov.diagonal().cwiseMax(0.0).cwiseSqrt(); }
};

/// Sum coefficient from the mean value, NonzeroCount through the zero-modified
/// Poisson closed form, everything else 0.
std::vector<double> default_theta0(const Model& model, const CountNetwork& y);

FitResult mcmc_mle(const Model& model, const CountNetwork& y_obs, std::span<const double> theta0,
                   const FitControl& control);

FitResult mom_fit(const Model& model, const CountNetwork& y_obs, std::span<const double> theta0,
                  const FitControl& control);

struct McTestResult {
  std::string label;
  double observed = 0.0;
  double p_value = 1.0;
  std::size_t nsim = 0;
  std::size_t at_least = 0;  // simulated values >= observed
  std::array<double, 5> quantiles{};
};

/// One-sided Monte Carlo p-value of stat_term under the null model at theta_null.
McTestResult monte_carlo_test(const Model& null_model, std::span<const double> theta_null,
                              const TermSpec& stat_term, const NodeAttributes& attrs, const CountNetwork& y_obs,
                              const SamplerControl& control);

/// Same, refusing null fits that did not converge.
McTestResult monte_carlo_test(const Model& null_model, const FitResult& null_fit, const TermSpec& stat_term,
                              const NodeAttributes& attrs, const CountNetwork& y_obs, const SamplerControl& control);

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace countergm

#endif
