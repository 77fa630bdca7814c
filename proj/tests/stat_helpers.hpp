// Goodness-of-fit helpers for comparing sampled counts against exact pmfs.
#pragma once

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

namespace fit {

struct GofResult {
  double tv = 0.0;         // total-variation distance
  double chi2 = 0.0;
  int df = 0;
  double p_value = 1.0;
};

/// counts[x] = number of draws equal to x. The pmf support is taken up to the
/// point where its cumulative mass reaches 1 - 1e-9; cells with expected count
/// below 5 are pooled into the upper tail cell.
inline GofResult goodness_of_fit(const std::map<long, long>& counts, const std::function<double(long)>& pmf) {
  long total = 0;
  for (auto& [x, c] : counts) total += c;
  GofResult r;

  long top = 0;
  double cum = 0;
  while (cum < 1 - 1e-9 && top < 100000) cum += pmf(top++);
  long max_seen = counts.empty() ? 0 : counts.rbegin()->first;
  const long limit = std::max(top, max_seen + 1);

  double tv = 0, mass = 0;
  for (long x = 0; x < limit; ++x) {
    const double p = pmf(x);
    mass += p;
    auto it = counts.find(x);
    const double f = it == counts.end() ? 0.0 : static_cast<double>(it->second) / total;
    tv += std::abs(f - p);
  }
  tv += std::max(0.0, 1 - mass);  // unobserved tail beyond limit
  r.tv = 0.5 * tv;

  // pooled chi-square: cells x = 0..k-1 each with expectation >= 5, plus tail cell x >= k
  std::vector<double> expected, observed;
  double tail_p = 1.0;
  long x = 0;
  for (; x < limit; ++x) {
    const double e = pmf(x) * total;
    if (e < 5 || (tail_p - pmf(x)) * total < 5) break;
    expected.push_back(e);
    auto it = counts.find(x);
    observed.push_back(it == counts.end() ? 0.0 : static_cast<double>(it->second));
    tail_p -= pmf(x);
  }
  double tail_obs = 0;
  for (auto& [v, c] : counts)
    if (v >= x) tail_obs += c;
  expected.push_back(std::max(tail_p, 0.0) * total);
  observed.push_back(tail_obs);

  for (std::size_t k = 0; k < expected.size(); ++k)
    if (expected[k] > 0) r.chi2 += (observed[k] - expected[k]) * (observed[k] - expected[k]) / expected[k];
  r.df = static_cast<int>(expected.size()) - 1;
  r.p_value = r.df > 0 ? boost::math::gamma_q(r.df / 2.0, r.chi2 / 2.0) : 1.0;
  return r;
}

}  // namespace fit
