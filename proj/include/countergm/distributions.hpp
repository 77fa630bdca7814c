#ifndef COUNTERGM_DISTRIBUTIONS_HPP
#define COUNTERGM_DISTRIBUTIONS_HPP

#include <functional>
#include <stdexcept>

#include "countergm/network.hpp"

namespace countergm {

class DistributionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double poisson_pmf(double mu, Count x);
/// P(X = x) = p (1 - p)^x on {0, 1, ...}; mean (1 - p) / p.
double geometric_pmf(double p, Count x);

/// Sum/NonzeroCount single-dyad law: Poisson(e^theta1) with the mass at 0
/// reweighted so that P(0) = 1 / (1 + e^theta2 (exp(e^theta1) - 1)).
double zmp_pmf(double theta1, double theta2, Count x);

/// Summation of a nonnegative series given by its log terms, x = 0, 1, ...
struct SeriesResult {
  double log_sum = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  Count terms = 0;
};

/// Stops once term/partial_sum < 1e-16 for 50 consecutive terms that are also
/// decreasing; throws after max_terms. min_terms forces at least that many.
SeriesResult sum_log_series(const std::function<double(Count)>& log_term, Count min_terms = 0,
                            Count max_terms = 1000000);

/// exp(theta1 x + theta2 log x!) / c(theta).
struct CmpParams {
  double theta1 = 0.0;
  double theta2 = -1.0;
};

bool cmp_in_natural_space(const CmpParams& p);
double cmp_log_normalizer(const CmpParams& p);
double cmp_pmf(const CmpParams& p, Count x);
SeriesResult cmp_moments(const CmpParams& p);

/// One-dyad law proportional to exp(theta1 sqrt(y) + theta2 y) / y!.
double sqrt_model_pmf(double theta1, double theta2, Count y);
SeriesResult sqrt_model_moments(double theta1, double theta2);

/// theta2 giving the sqrt model a mean of target_mean (bisection, |error| < 1e-10).
double sqrt_model_tune(double theta1, double target_mean);

}  // namespace countergm

#endif
