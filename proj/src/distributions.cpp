#include "countergm/distributions.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "countergm/terms.hpp"

namespace countergm {

double poisson_pmf(double mu, Count x) {
  if (mu < 0) throw DistributionError("Poisson mean must be nonnegative");
  if (mu == 0) return x == 0 ? 1.0 : 0.0;
  return std::exp(static_cast<double>(x) * std::log(mu) - mu - log_factorial(x));
}

double geometric_pmf(double p, Count x) {
  if (!(p > 0 && p <= 1)) throw DistributionError("geometric success probability must be in (0, 1]");
  if (p == 1) return x == 0 ? 1.0 : 0.0;
  return p * std::exp(static_cast<double>(x) * std::log1p(-p));
}

double zmp_pmf(double theta1, double theta2, Count x) {
  const double mu = std::exp(theta1);
  // e^theta2 (e^mu - 1), kept in log space for large mu
  const double log_a = theta2 + mu + std::log(-std::expm1(-mu));
  const double p0 = 1.0 / (1.0 + std::exp(log_a));
  if (x == 0) return p0;
  // nonzero values follow Poisson(mu) conditioned on x > 0
  const double log_cond = static_cast<double>(x) * theta1 - log_factorial(x) - mu - std::log(-std::expm1(-mu));
  return (1.0 - p0) * std::exp(log_cond);
}

SeriesResult sum_log_series(const std::function<double(Count)>& log_term, Count min_terms, Count max_terms) {
  // Running sums are kept relative to exp(shift), rescaled when a larger term appears.
  double shift = -std::numeric_limits<double>::infinity();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  int quiet = 0;
  for (Count x = 0; x < max_terms; ++x) {
    const double lt = log_term(x);
    if (std::isnan(lt)) throw DistributionError("series term is NaN at x = " + std::to_string(x));
    if (lt > shift) {
      if (std::isfinite(shift)) {
        const double r = std::exp(shift - lt);
        s0 *= r;
        s1 *= r;
        s2 *= r;
      }
      shift = lt;
    }
    const double xd = static_cast<double>(x);
    const double w = std::isfinite(lt) ? std::exp(lt - shift) : 0.0;
    s0 += w;
    s1 += w * xd;
    s2 += w * xd * xd;

    const bool decreasing = lt < prev;
    prev = lt;
    if (decreasing && s0 > 0 && w / s0 < 1e-16)
      ++quiet;
    else
      quiet = 0;
    if (quiet >= 50 && x + 1 >= min_terms) {
      SeriesResult r;
      r.log_sum = shift + std::log(s0);
      r.mean = s1 / s0;
      r.variance = std::max(0.0, s2 / s0 - r.mean * r.mean);
      r.terms = x + 1;
      return r;
    }
  }
  throw DistributionError("series did not converge within " + std::to_string(max_terms) + " terms");
}

bool cmp_in_natural_space(const CmpParams& p) {
  return p.theta2 < 0 || (p.theta2 == 0 && p.theta1 < 0);
}

namespace {

void require_cmp(const CmpParams& p) {
  if (!cmp_in_natural_space(p))
    throw DistributionError("CMP parameters (" + std::to_string(p.theta1) + ", " + std::to_string(p.theta2) +
                            ") are outside the natural parameter space");
}

double cmp_log_term(const CmpParams& p, Count x) {
  return p.theta1 * static_cast<double>(x) + p.theta2 * log_factorial(x);
}

}  // namespace

double cmp_log_normalizer(const CmpParams& p) {
  require_cmp(p);
  if (p.theta2 == 0) return -std::log(-std::expm1(p.theta1));  // geometric series
  return sum_log_series([&](Count x) { return cmp_log_term(p, x); }).log_sum;
}

double cmp_pmf(const CmpParams& p, Count x) { return std::exp(cmp_log_term(p, x) - cmp_log_normalizer(p)); }

SeriesResult cmp_moments(const CmpParams& p) {
  require_cmp(p);
  if (p.theta2 == 0) {
    const double q = std::exp(p.theta1);  // failure probability of the geometric law
    SeriesResult r;
    r.log_sum = -std::log(-std::expm1(p.theta1));
    r.mean = q / (1 - q);
    r.variance = q / ((1 - q) * (1 - q));
    return r;
  }
  return sum_log_series([&](Count x) { return cmp_log_term(p, x); });
}

namespace {

double sqrt_log_term(double theta1, double theta2, Count y) {
  return theta1 * std::sqrt(static_cast<double>(y)) + theta2 * static_cast<double>(y) - log_factorial(y);
}

}  // namespace

double sqrt_model_pmf(double theta1, double theta2, Count y) {
  const auto s = sqrt_model_moments(theta1, theta2);
  return std::exp(sqrt_log_term(theta1, theta2, y) - s.log_sum);
}

SeriesResult sqrt_model_moments(double theta1, double theta2) {
  return sum_log_series([&](Count y) { return sqrt_log_term(theta1, theta2, y); });
}

double sqrt_model_tune(double theta1, double target_mean) {
  if (!(target_mean > 0)) throw DistributionError("target mean must be positive");
  auto mean = [&](double t2) { return sqrt_model_moments(theta1, t2).mean; };
  double lo = -1.0, hi = 1.0;
  for (int k = 0; mean(lo) > target_mean; ++k) {
    if (k > 60) throw DistributionError("sqrt_model_tune: cannot bracket the target mean from below");
    hi = lo;
    lo *= 2;
  }
  for (int k = 0; mean(hi) < target_mean; ++k) {
    if (k > 6) throw DistributionError("sqrt_model_tune: cannot bracket the target mean from above");
    lo = hi;
    hi *= 2;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double m = mean(mid);
    if (std::abs(m - target_mean) < 1e-12 * std::max(1.0, target_mean)) return mid;
    (m < target_mean ? lo : hi) = mid;
    if (hi - lo < 1e-15) break;
  }
  const double mid = 0.5 * (lo + hi);
  if (std::abs(mean(mid) - target_mean) >= 1e-10)
    throw DistributionError("sqrt_model_tune: bisection did not reach the target mean");
  return mid;
}

}  // namespace countergm
