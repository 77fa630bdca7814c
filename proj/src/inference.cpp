#include "countergm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace countergm {

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::array<double, 5> five_quantiles(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return {quantile_sorted(v, 0.05), quantile_sorted(v, 0.25), quantile_sorted(v, 0.5), quantile_sorted(v, 0.75),
          quantile_sorted(v, 0.95)};
}

/// Inverse of a symmetric PSD matrix with tiny eigenvalues treated as zero.
Eigen::MatrixXd pinv_sym(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double cutoff = std::max(ev.cwiseAbs().maxCoeff(), 1e-300) * 1e-12;
  Eigen::VectorXd inv(ev.size());
  for (Eigen::Index k = 0; k < ev.size(); ++k) inv[k] = ev[k] > cutoff ? 1.0 / ev[k] : 0.0;
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& g) {
  const Eigen::RowVectorXd mu = g.colwise().mean();
  const Eigen::MatrixXd c = g.rowwise() - mu;
  const double denom = std::max<double>(1.0, static_cast<double>(g.rows()) - 1.0);
  return (c.transpose() * c) / denom;
}

/// Batch-means covariance of the mean for rows grouped into contiguous chains.
Eigen::MatrixXd batch_means(const Eigen::MatrixXd& g, const std::vector<std::size_t>& starts) {
  const auto p = g.cols();
  const auto total = static_cast<std::size_t>(g.rows());
  std::vector<Eigen::RowVectorXd> means;
  std::size_t used = 0, batch_size_sum = 0;
  for (std::size_t c = 0; c < starts.size(); ++c) {
    const std::size_t begin = starts[c];
    const std::size_t end = c + 1 < starts.size() ? starts[c + 1] : total;
    const std::size_t len = end - begin;
    if (len == 0) continue;
    const std::size_t b = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(len))));
    const std::size_t nb = len / b;
    for (std::size_t k = 0; k < nb; ++k) {
      means.push_back(g.middleRows(static_cast<Eigen::Index>(begin + k * b), static_cast<Eigen::Index>(b))
                          .colwise()
                          .mean());
      used += b;
      batch_size_sum += b;
    }
  }
  if (means.size() < 2) return sample_covariance(g) / static_cast<double>(std::max<std::size_t>(total, 1));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(means.size()), p);
  for (std::size_t k = 0; k < means.size(); ++k) m.row(static_cast<Eigen::Index>(k)) = means[k];
  const double b = static_cast<double>(batch_size_sum) / static_cast<double>(means.size());
  return sample_covariance(m) * b / static_cast<double>(used);
}

}  // namespace

// ---------------------------------------------------------------------------

double effective_sample_size(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto n = x.size();
  if (n < 4) return static_cast<double>(n);
  const Eigen::VectorXd c = x.array() - x.mean();
  auto gamma = [&](Eigen::Index lag) {
    return c.head(n - lag).dot(c.tail(n - lag)) / static_cast<double>(n);
  };
  const double g0 = gamma(0);
  if (!(g0 > 0)) return static_cast<double>(n);
  // initial positive (and monotone) sequence of paired autocovariances
  double sum = 0.0, prev = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; 2 * m + 1 < n; ++m) {
    double pair = gamma(2 * m) + gamma(2 * m + 1);
    if (pair <= 0) break;
    pair = std::min(pair, prev);
    prev = pair;
    sum += pair;
  }
  const double tau = (-g0 + 2.0 * sum) / g0;
  return static_cast<double>(n) / std::max(tau, 1e-12);
}

double effective_sample_size(const SampleBatch& batch, Eigen::Index column) {
  double ess = 0.0;
  const auto total = static_cast<std::size_t>(batch.stats.rows());
  for (std::size_t c = 0; c < batch.chain_starts.size(); ++c) {
    const std::size_t begin = batch.chain_starts[c];
    const std::size_t end = c + 1 < batch.chain_starts.size() ? batch.chain_starts[c + 1] : total;
    if (end > begin)
      ess += effective_sample_size(batch.stats.col(column).segment(static_cast<Eigen::Index>(begin),
                                                                   static_cast<Eigen::Index>(end - begin)));
  }
  return ess;
}

BimodalityCheck check_bimodality(std::vector<double> x, double ess) {
  BimodalityCheck r;
  const std::size_t n = x.size();
  if (n < 10) return r;
  std::sort(x.begin(), x.end());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0)) return r;
  const double iqr = quantile_sorted(x, 0.75) - quantile_sorted(x, 0.25);
  const double spread = iqr > 0 ? std::min(sd, iqr / 1.34) : sd;
  const double neff = ess > 0 ? std::min(ess, static_cast<double>(n)) : static_cast<double>(n);
  double h = 0.9 * spread * std::pow(std::max(neff, 2.0), -0.2);

  // Lattice-valued statistics: never smooth below the typical gap between values.
  std::vector<double> gaps;
  for (std::size_t k = 1; k < n; ++k)
    if (x[k] > x[k - 1]) gaps.push_back(x[k] - x[k - 1]);
  if (!gaps.empty()) {
    std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
    h = std::max(h, gaps[gaps.size() / 2]);
  }
  r.bandwidth = h;

  constexpr int G = 512;
  const double lo = x.front() - 3 * h, hi = x.back() + 3 * h;
  const double step = (hi - lo) / (G - 1);
  std::vector<double> grid(G), f(G, 0.0);
  for (int k = 0; k < G; ++k) {
    const double t = lo + step * k;
    grid[k] = t;
    auto first = std::lower_bound(x.begin(), x.end(), t - 6 * h);
    auto last = std::upper_bound(x.begin(), x.end(), t + 6 * h);
    double s = 0.0;
    for (auto it = first; it != last; ++it) {
      const double u = (t - *it) / h;
      s += std::exp(-0.5 * u * u);
    }
    f[k] = s;
  }
  std::vector<double> left(G), right(G);
  left[0] = f[0];
  for (int k = 1; k < G; ++k) left[k] = std::max(left[k - 1], f[k]);
  right[G - 1] = f[G - 1];
  for (int k = G - 2; k >= 0; --k) right[k] = std::max(right[k + 1], f[k]);

  // Count separated modes by walking valleys that satisfy both criteria.
  int splits = 0;
  bool in_valley = false;
  for (int k = 1; k < G - 1; ++k) {
    const double peak = std::min(left[k], right[k]);
    if (!(peak > 0)) continue;
    const double ratio = f[k] / peak;
    const double below =
        static_cast<double>(std::lower_bound(x.begin(), x.end(), grid[k]) - x.begin()) / static_cast<double>(n);
    const double minor = std::min(below, 1.0 - below);
    const bool qualifies = ratio < 0.5 && minor >= 0.05;
    if (qualifies && ratio < r.valley_ratio) {
      r.valley_ratio = ratio;
      r.minor_mass = minor;
    }
    if (qualifies && !in_valley) ++splits;
    // a valley ends once the density climbs back above half the adjacent peak
    if (!qualifies && ratio >= 0.5) in_valley = false;
    if (qualifies) in_valley = true;
  }
  r.modes = 1 + splits;
  r.bimodal = splits > 0;
  if (!r.bimodal) {
    r.valley_ratio = 1.0;
    r.minor_mass = 0.0;
  }
  return r;
}

Eigen::MatrixXd batch_means_covariance(const SampleBatch& batch) { return batch_means(batch.stats, batch.chain_starts); }

Diagnostics diagnostics(const SampleBatch& batch, std::span<const double> observed) {
  Diagnostics d;
  d.acceptance_rate = batch.acceptance_rate;
  d.draws = batch.size();
  const auto p = batch.stats.cols();
  if (static_cast<Eigen::Index>(observed.size()) != p) throw std::invalid_argument("observed has the wrong size");
  for (Eigen::Index k = 0; k < p; ++k) {
    StatDiagnostics s;
    s.label = k < static_cast<Eigen::Index>(batch.labels.size()) ? batch.labels[k] : "stat" + std::to_string(k);
    s.observed = observed[k];
    const Eigen::VectorXd col = batch.stats.col(k);
    s.mean = col.mean();
    s.sd = col.size() > 1 ? std::sqrt((col.array() - s.mean).square().sum() / static_cast<double>(col.size() - 1))
                          : 0.0;
    s.ess = effective_sample_size(batch, k);
    s.mcse = s.ess > 0 ? s.sd / std::sqrt(s.ess) : 0.0;
    if (s.mcse > 0)
      s.z = (s.mean - s.observed) / s.mcse;
    else
      s.z = s.mean == s.observed ? 0.0 : std::numeric_limits<double>::infinity();
    std::vector<double> v(col.data(), col.data() + col.size());
    s.quantiles = five_quantiles(v);
    s.bimodality = check_bimodality(std::move(v), s.ess);
    d.bimodal = d.bimodal || s.bimodality.bimodal;
    d.max_abs_z = std::max(d.max_abs_z, std::abs(s.z));
    d.stats.push_back(std::move(s));
  }
  return d;
}

NormconstRatio log_normconst_ratio(const SampleBatch& batch, std::span<const double> theta,
                                   std::span<const double> theta_prime) {
  const auto p = batch.stats.cols();
  if (batch.stats.rows() == 0) throw std::invalid_argument("log_normconst_ratio: empty sample");
  if (static_cast<Eigen::Index>(theta.size()) != p || static_cast<Eigen::Index>(theta_prime.size()) != p)
    throw std::invalid_argument("log_normconst_ratio: dimension mismatch");
  Eigen::VectorXd d(p);
  bool same = true;
  for (Eigen::Index k = 0; k < p; ++k) {
    d[k] = theta_prime[k] - theta[k];
    same = same && d[k] == 0.0;
  }
  NormconstRatio r;
  const auto S = static_cast<double>(batch.stats.rows());
  if (same) {
    r.ess = S;
    return r;
  }
  const Eigen::VectorXd a = batch.stats * d;
  const double amax = a.maxCoeff();
  const Eigen::ArrayXd w = (a.array() - amax).exp();
  const double sw = w.sum();
  r.log_ratio = amax + std::log(sw / S);
  r.ess = sw * sw / w.square().sum();
  r.reliable = r.ess >= 5.0;
  return r;
}

const char* to_string(FitStatus status) {
  switch (status) {
    case FitStatus::converged: return "converged";
    case FitStatus::boundary: return "boundary";
    case FitStatus::not_converged: return "not_converged";
    case FitStatus::degenerate: return "degenerate";
  }
  return "?";
}

std::string FitControl::validate() const {
  if (auto s = sampler.validate(); !s.empty()) return s;
  if (!(tolerance > 0)) return "tolerance must be positive";
  if (!(trust_radius > 0)) return "trust radius must be positive";
  if (max_iterations < 1) return "max_iterations must be >= 1";
  if (!(mom_exponent > 0.5 && mom_exponent <= 1.0)) return "gain exponent must lie in (0.5, 1]";
  if (mom_gain < 0) return "gain must be nonnegative";
  if (!(mom_offset >= 0)) return "gain offset must be nonnegative";
  return {};
}

std::vector<double> default_theta0(const Model& model, const CountNetwork& y) {
  const auto& terms = model.spec().terms;
  std::vector<double> theta(terms.size(), 0.0);
  const double m = static_cast<double>(y.dyad_count());
  const double mean = static_cast<double>(y.total()) / m;
  const bool geometric = model.reference() == Reference::geometric;
  const bool has_nonzero =
      std::any_of(terms.begin(), terms.end(), [](const TermSpec& t) { return t.kind == TermKind::nonzero; });
  constexpr double eps = 1e-3;

  double sum_coef = geometric ? std::log((mean + eps) / (1.0 + mean + eps)) : std::log(mean + eps);
  double nonzero_coef = 0.0;
  if (has_nonzero && !geometric) {
    const double nz = static_cast<double>(y.nonzero());
    const double p0 = std::clamp((m - nz) / m, 0.5 / m, 1.0 - 0.5 / m);
    const double mean_nz = nz > 0 ? static_cast<double>(y.total()) / nz : 1.0;
    // solve lambda / (1 - exp(-lambda)) = mean of the nonzero values
    double lambda = 0.01;
    if (mean_nz > 1.0 + 1e-9) {
      double lo = 1e-9, hi = std::max(1.0, mean_nz);
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mid / -std::expm1(-mid) < mean_nz ? lo : hi) = mid;
      }
      lambda = 0.5 * (lo + hi);
    }
    sum_coef = std::log(lambda);
    nonzero_coef = std::log((1.0 / p0 - 1.0) / std::expm1(lambda));
  }
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (terms[k].kind == TermKind::sum) theta[k] = sum_coef;
    if (terms[k].kind == TermKind::nonzero && !geometric) theta[k] = nonzero_coef;
  }
  project_to_constraints(model.spec(), theta);
  return theta;
}

// ---------------------------------------------------------------------------
// MCMC MLE

namespace {

struct IsStep {
  Eigen::VectorXd delta;
  bool hit_radius = false;
};

/// Maximizes (theta' - theta).obs - log mean exp((theta' - theta).g_s) by
/// Newton steps, keeping the move inside the Mahalanobis trust region.
IsStep importance_newton(const Eigen::MatrixXd& g, const Eigen::VectorXd& obs, const Eigen::MatrixXd& sigma,
                         double radius) {
  const auto p = g.cols();
  const Eigen::RowVectorXd mu = g.colwise().mean();
  const Eigen::MatrixXd c = g.rowwise() - mu;
  const Eigen::VectorXd target = obs - mu.transpose();
  IsStep r{Eigen::VectorXd::Zero(p), false};
  auto maha = [&](const Eigen::VectorXd& d) { return std::sqrt(std::max(0.0, d.dot(sigma * d))); };

  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd a = c * r.delta;
    const Eigen::ArrayXd w0 = (a.array() - a.maxCoeff()).exp();
    const Eigen::VectorXd w = (w0 / w0.sum()).matrix();
    const Eigen::VectorXd mw = c.transpose() * w;
    const Eigen::MatrixXd cw = c.rowwise() - mw.transpose();
    const Eigen::MatrixXd cov = cw.transpose() * w.asDiagonal() * cw;
    const Eigen::VectorXd grad = target - mw;
    const Eigen::VectorXd step = pinv_sym(cov) * grad;
    Eigen::VectorXd next = r.delta + step;
    const double norm = maha(next);
    if (norm > radius) {
      r.delta = next * (radius / norm);
      r.hit_radius = true;
      break;
    }
    r.delta = next;
    if (maha(step) < 1e-10) break;
  }
  return r;
}

/// IS-reweighted covariance of g at theta + delta.
Eigen::MatrixXd weighted_covariance(const Eigen::MatrixXd& g, const Eigen::VectorXd& delta) {
  const Eigen::RowVectorXd mu = g.colwise().mean();
  const Eigen::MatrixXd c = g.rowwise() - mu;
  const Eigen::VectorXd a = c * delta;
  const Eigen::ArrayXd w0 = (a.array() - a.maxCoeff()).exp();
  const Eigen::VectorXd w = (w0 / w0.sum()).matrix();
  const Eigen::VectorXd mw = c.transpose() * w;
  const Eigen::MatrixXd cw = c.rowwise() - mw.transpose();
  return cw.transpose() * w.asDiagonal() * cw;
}

double discrepancy(const Eigen::MatrixXd& g, const Eigen::VectorXd& obs) {
  const Eigen::RowVectorXd mu = g.colwise().mean();
  const Eigen::MatrixXd sigma = sample_covariance(g);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < g.cols(); ++k) {
    const double diff = std::abs(mu[k] - obs[k]);
    const double sd = std::sqrt(sigma(k, k));
    if (sd > 0)
      worst = std::max(worst, diff / sd);
    else if (diff > 0)
      worst = std::numeric_limits<double>::infinity();
  }
  return worst;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void fill_vcov(FitResult& r, const Eigen::MatrixXd& information, const Eigen::MatrixXd& mean_cov) {
  const Eigen::MatrixXd inv = pinv_sym(information);
  r.mc_vcov = inv * mean_cov * inv;
  r.mc_vcov = 0.5 * (r.mc_vcov + r.mc_vcov.transpose());
  r.vcov = inv + r.mc_vcov;
  r.vcov = 0.5 * (r.vcov + r.vcov.transpose());
  r.std_errors = r.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
}

std::string bimodal_labels(const Diagnostics& d) {
  std::string s;
  for (const auto& st : d.stats)
    if (st.bimodality.bimodal) s += (s.empty() ? "" : ", ") + st.label;
  return s;
}

SamplerControl iteration_control(const SamplerControl& base, std::size_t iteration) {
  SamplerControl c = base;
  c.seed = chain_seed(base.seed, 1000 + iteration);
  return c;
}

}  // namespace

FitResult mcmc_mle(const Model& model, const CountNetwork& y_obs, std::span<const double> theta0,
                   const FitControl& control) {
  if (auto msg = control.validate(); !msg.empty()) throw std::invalid_argument(msg);
  if (theta0.size() != model.dimension()) throw ModelError("theta0 has the wrong dimension");
  if (auto msg = check_constraints(model.spec(), theta0); !msg.empty()) throw ModelError(msg);

  const auto p = static_cast<Eigen::Index>(model.dimension());
  FitResult r;
  r.method = "mcmc_mle";
  r.labels = model.labels();
  const auto obs_stats = eval_stats(model, y_obs);
  r.observed = Eigen::Map<const Eigen::VectorXd>(obs_stats.values.data(), p);
  for (Eigen::Index k = 0; k < p; ++k)
    if (!std::isfinite(r.observed[k])) throw ModelError("observed statistic '" + r.labels[k] + "' is not finite");

  Eigen::VectorXd theta = Eigen::Map<const Eigen::VectorXd>(theta0.data(), p);
  std::vector<CountNetwork> starts(control.sampler.chains, y_obs);
  std::size_t flagged = 0, projected_run = 0;

  for (std::size_t it = 0; it < control.max_iterations; ++it) {
    const auto th = to_std(theta);
    SampleBatch batch = sample(model, th, starts, iteration_control(control.sampler, it));
    starts = batch.final_networks;
    r.iterations = it + 1;

    IterationRecord rec;
    rec.theta = th;
    rec.discrepancy = discrepancy(batch.stats, r.observed);
    const Diagnostics diag = diagnostics(batch, obs_stats.values);
    rec.bimodal = diag.bimodal;
    flagged = diag.bimodal ? flagged + 1 : 0;
    r.discrepancy = rec.discrepancy;

    if (control.abort_on_degeneracy && flagged >= control.degeneracy_patience) {
      r.history.push_back(rec);
      r.theta = theta;
      r.status = FitStatus::degenerate;
      r.message = "bimodal simulated statistics (" + bimodal_labels(diag) + ") for " + std::to_string(flagged) +
                  " consecutive iterations";
      fill_vcov(r, sample_covariance(batch.stats), batch_means_covariance(batch));
      r.sample = std::move(batch);
      return r;
    }

    if (rec.discrepancy < control.tolerance) {
      r.history.push_back(rec);
      if (control.final_draws > control.sampler.draws) {
        SamplerControl fc = iteration_control(control.sampler, 100000);
        fc.draws = control.final_draws;
        batch = sample(model, th, starts, fc);
      }
      // Final correction from the converged sample.
      const Eigen::MatrixXd sigma = sample_covariance(batch.stats);
      const IsStep step = importance_newton(batch.stats, r.observed, sigma, control.trust_radius);
      Eigen::VectorXd theta_hat = theta + step.delta;
      std::vector<double> hat = to_std(theta_hat);
      const bool moved = project_to_constraints(model.spec(), hat);
      theta_hat = Eigen::Map<const Eigen::VectorXd>(hat.data(), p);
      const Eigen::VectorXd delta = theta_hat - theta;
      const auto lr = log_normconst_ratio(batch, th, hat);
      r.loglik_ratio += delta.dot(r.observed) - lr.log_ratio;
      r.theta = theta_hat;
      r.discrepancy = discrepancy(batch.stats, r.observed);
      fill_vcov(r, weighted_covariance(batch.stats, delta), batch_means_covariance(batch));
      r.sample = std::move(batch);
      if (moved || projected_run > 0) {
        r.status = FitStatus::boundary;
        r.message = "estimate lies on the parameter-space boundary; likelihood properties are not guaranteed";
      } else {
        r.status = FitStatus::converged;
        r.converged = true;
      }
      return r;
    }

    const Eigen::MatrixXd sigma = sample_covariance(batch.stats);
    const IsStep step = importance_newton(batch.stats, r.observed, sigma, control.trust_radius);
    std::vector<double> next = to_std(theta + step.delta);
    rec.projected = project_to_constraints(model.spec(), next);
    const auto lr = log_normconst_ratio(batch, th, next);
    const Eigen::VectorXd next_v = Eigen::Map<const Eigen::VectorXd>(next.data(), p);
    r.loglik_ratio += (next_v - theta).dot(r.observed) - lr.log_ratio;
    r.history.push_back(rec);

    projected_run = rec.projected ? projected_run + 1 : 0;
    if (projected_run >= 2) {
      r.theta = next_v;
      r.status = FitStatus::boundary;
      std::ostringstream os;
      os << "constraint projection active for " << projected_run
         << " consecutive iterations; the likelihood appears to increase toward the boundary";
      r.message = os.str();
      fill_vcov(r, sigma, batch_means_covariance(batch));
      r.sample = std::move(batch);
      return r;
    }
    theta = next_v;
    if (it + 1 == control.max_iterations) {
      r.theta = theta;
      r.status = FitStatus::not_converged;
      r.message = "no convergence after " + std::to_string(control.max_iterations) + " iterations";
      fill_vcov(r, sigma, batch_means_covariance(batch));
      r.sample = std::move(batch);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Method of moments by stochastic approximation

FitResult mom_fit(const Model& model, const CountNetwork& y_obs, std::span<const double> theta0,
                  const FitControl& control) {
  if (auto msg = control.validate(); !msg.empty()) throw std::invalid_argument(msg);
  if (theta0.size() != model.dimension()) throw ModelError("theta0 has the wrong dimension");
  if (auto msg = check_constraints(model.spec(), theta0); !msg.empty()) throw ModelError(msg);

  const auto p = static_cast<Eigen::Index>(model.dimension());
  FitResult r;
  r.method = "mom";
  r.labels = model.labels();
  const auto obs_stats = eval_stats(model, y_obs);
  r.observed = Eigen::Map<const Eigen::VectorXd>(obs_stats.values.data(), p);
  r.theta = Eigen::Map<const Eigen::VectorXd>(theta0.data(), p);
  r.vcov = r.mc_vcov = Eigen::MatrixXd::Zero(p, p);
  r.std_errors = Eigen::VectorXd::Zero(p);
  if (control.mom_gain == 0.0) {
    r.status = FitStatus::not_converged;
    r.message = "zero gain: parameters left at their starting values";
    return r;
  }

  // Pilot sample for the diagonal scaling.
  SamplerControl pilot = iteration_control(control.sampler, 0);
  pilot.draws = std::max<std::size_t>(control.mom_pilot_draws, pilot.chains);
  const SampleBatch pb = sample(model, to_std(r.theta), y_obs, pilot);
  Eigen::VectorXd scale = sample_covariance(pb.stats).diagonal();
  for (Eigen::Index k = 0; k < p; ++k)
    if (!(scale[k] > 0)) scale[k] = 1.0;

  CountNetwork y = pb.final_network();
  Rng rng(chain_seed(control.sampler.seed, 2));
  const std::size_t steps = control.mom_steps ? control.mom_steps : control.sampler.interval;
  const std::size_t T = control.mom_iterations;
  const std::size_t avg_from = T / 2;
  std::vector<double> theta = to_std(r.theta), delta(static_cast<std::size_t>(p)), g(static_cast<std::size_t>(p));
  Eigen::VectorXd theta_sum = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd path(static_cast<Eigen::Index>(T - avg_from), p);
  std::size_t boundary_hits = 0;

  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t s = 0; s < steps; ++s) mh_step(model, theta, y, control.sampler.pi0, rng, delta);
    model.evaluate(y, g);
    const double gain = control.mom_gain / std::pow(static_cast<double>(t) + control.mom_offset, control.mom_exponent);
    for (Eigen::Index k = 0; k < p; ++k) theta[k] -= gain * (g[k] - r.observed[k]) / scale[k];
    if (project_to_constraints(model.spec(), theta)) ++boundary_hits;
    if (t >= avg_from) {
      theta_sum += Eigen::Map<const Eigen::VectorXd>(theta.data(), p);
      path.row(static_cast<Eigen::Index>(t - avg_from)) = Eigen::Map<const Eigen::RowVectorXd>(g.data(), p);
    }
  }
  r.iterations = T;
  r.theta = theta_sum / static_cast<double>(T - avg_from);
  std::vector<double> hat = to_std(r.theta);
  const bool on_boundary = project_to_constraints(model.spec(), hat);
  r.theta = Eigen::Map<const Eigen::VectorXd>(hat.data(), p);

  // Moment check on a fresh sample at the averaged estimate.
  SampleBatch check = sample(model, hat, std::vector<CountNetwork>(control.sampler.chains, y),
                             iteration_control(control.sampler, 1));
  r.discrepancy = discrepancy(check.stats, r.observed);
  IterationRecord rec{hat, r.discrepancy, on_boundary, false};
  r.history.push_back(rec);
  fill_vcov(r, sample_covariance(check.stats), batch_means(path, {0}));
  r.sample = std::move(check);

  if (on_boundary || boundary_hits > T / 2) {
    r.status = FitStatus::boundary;
    r.message = "stochastic approximation settled on the parameter-space boundary";
  } else if (r.discrepancy < control.tolerance) {
    r.status = FitStatus::converged;
    r.converged = true;
  } else {
    r.status = FitStatus::not_converged;
    std::ostringstream os;
    os << "moment discrepancy " << r.discrepancy << " exceeds tolerance " << control.tolerance;
    r.message = os.str();
  }
  return r;
}

// ---------------------------------------------------------------------------

McTestResult monte_carlo_test(const Model& null_model, std::span<const double> theta_null,
                              const TermSpec& stat_term, const NodeAttributes& attrs, const CountNetwork& y_obs,
                              const SamplerControl& control) {
  for (const auto& t : null_model.spec().terms)
    if (same_statistic(t, stat_term))
      throw FitError("test statistic '" + stat_term.display_label() + "' is already in the null model");
  if (theta_null.size() != null_model.dimension()) throw ModelError("null theta has the wrong dimension");

  ModelSpec ext = null_model.spec();
  ext.terms.push_back(stat_term);
  const Model model(ext, attrs, y_obs.size(), y_obs.directed());
  std::vector<double> theta(theta_null.begin(), theta_null.end());
  theta.push_back(0.0);

  const auto col = static_cast<Eigen::Index>(null_model.dimension());
  const SampleBatch batch = sample(model, theta, y_obs, control);
  McTestResult r;
  r.label = stat_term.display_label();
  r.observed = eval_stats(model, y_obs).values.back();
  r.nsim = batch.size();
  const double slack = 1e-9 * std::max(1.0, std::abs(r.observed));
  std::vector<double> sims(r.nsim);
  for (std::size_t s = 0; s < r.nsim; ++s) {
    sims[s] = batch.stats(static_cast<Eigen::Index>(s), col);
    if (sims[s] >= r.observed - slack) ++r.at_least;
  }
  r.p_value = (1.0 + static_cast<double>(r.at_least)) / (static_cast<double>(r.nsim) + 1.0);
  r.quantiles = five_quantiles(std::move(sims));
  return r;
}

McTestResult monte_carlo_test(const Model& null_model, const FitResult& null_fit, const TermSpec& stat_term,
                              const NodeAttributes& attrs, const CountNetwork& y_obs, const SamplerControl& control) {
  if (!null_fit.converged)
    throw FitError("null model fit did not converge (" + std::string(to_string(null_fit.status)) + ")");
  std::vector<double> theta = to_std(null_fit.theta);
  return monte_carlo_test(null_model, theta, stat_term, attrs, y_obs, control);
}

}  // namespace countergm
