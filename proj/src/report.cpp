#include "countergm/report.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace countergm {

using nlohmann::json;
using nlohmann::ordered_json;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool wald_significant(double estimate, double std_error) {
  // two-sided normal critical value at 0.05
  return std::isfinite(std_error) && std_error > 0 && std::abs(estimate / std_error) > 1.959963984540054;
}

namespace {

void meta_comment(std::ostream& out, const RunMeta& m) {
  out << "# command=" << m.command << " config_hash=" << hex64(m.config_hash) << " seed=" << m.seed << "\n";
}

ordered_json meta_json(const RunMeta& m) {
  return {{"command", m.command}, {"config_hash", hex64(m.config_hash)}, {"seed", m.seed}};
}

// JSON has no NaN/inf; emit null instead.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string fmt(double v, int prec = 4) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(prec) << v;
  return ss.str();
}

}  // namespace

void write_fit_table(std::ostream& out, const FitResult& fit, const RunMeta& meta) {
  meta_comment(out, meta);
  out << "# method=" << fit.method << " status=" << to_string(fit.status) << " iterations=" << fit.iterations
      << " discrepancy=" << fmt(fit.discrepancy, 3) << "\n";
  if (!fit.message.empty()) out << "# " << fit.message << "\n";
  std::size_t w = 4;
  for (const auto& l : fit.labels) w = std::max(w, l.size());
  out << std::left << std::setw(static_cast<int>(w) + 2) << "term" << std::right << std::setw(11) << "estimate"
      << std::setw(10) << "se" << std::setw(10) << "mc_se" << "\n";
  const Eigen::VectorXd mcse = fit.mc_std_errors();
  for (std::size_t k = 0; k < fit.labels.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    out << std::left << std::setw(static_cast<int>(w) + 2) << fit.labels[k] << std::right << std::setw(11)
        << fmt(fit.theta(i)) << std::setw(10) << fmt(fit.std_errors(i)) << std::setw(10) << fmt(mcse(i))
        << (wald_significant(fit.theta(i), fit.std_errors(i)) ? " *" : "") << "\n";
  }
  out << "# * Wald test significant at alpha = 0.05\n";
}

void write_fit_csv(std::ostream& out, const FitResult& fit, const RunMeta& meta) {
  meta_comment(out, meta);
  out << "term,estimate,se,mc_se,significant\n";
  const Eigen::VectorXd mcse = fit.mc_std_errors();
  out << std::setprecision(10);
  for (std::size_t k = 0; k < fit.labels.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    out << fit.labels[k] << ',' << fit.theta(i) << ',' << fit.std_errors(i) << ',' << mcse(i) << ','
        << (wald_significant(fit.theta(i), fit.std_errors(i)) ? 1 : 0) << "\n";
  }
}

void write_fit_json(std::ostream& out, const FitResult& fit, const RunMeta& meta) {
  ordered_json j;
  j["meta"] = meta_json(meta);
  j["method"] = fit.method;
  j["status"] = to_string(fit.status);
  j["converged"] = fit.converged;
  j["message"] = fit.message;
  j["iterations"] = fit.iterations;
  j["discrepancy"] = num(fit.discrepancy);
  j["loglik_ratio"] = num(fit.loglik_ratio);
  const Eigen::VectorXd mcse = fit.mc_std_errors();
  ordered_json terms = ordered_json::array();
  for (std::size_t k = 0; k < fit.labels.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    ordered_json t;
    t["label"] = fit.labels[k];
    t["estimate"] = num(fit.theta(i));
    t["se"] = num(fit.std_errors(i));
    t["mc_se"] = num(mcse(i));
    t["observed"] = num(fit.observed(i));
    t["significant"] = wald_significant(fit.theta(i), fit.std_errors(i));
    terms.push_back(std::move(t));
  }
  j["terms"] = terms;
  json vc = json::array();
  for (Eigen::Index r = 0; r < fit.vcov.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < fit.vcov.cols(); ++c) row.push_back(num(fit.vcov(r, c)));
    vc.push_back(row);
  }
  j["vcov"] = vc;
  json hist = json::array();
  for (const auto& h : fit.history)
    hist.push_back({{"theta", h.theta}, {"discrepancy", num(h.discrepancy)}, {"projected", h.projected},
                    {"bimodal", h.bimodal}});
  j["history"] = hist;
  out << j.dump(2) << "\n";
}

void write_diagnostics_table(std::ostream& out, const Diagnostics& d, const RunMeta& meta) {
  meta_comment(out, meta);
  out << "# draws=" << d.draws << " acceptance=" << fmt(d.acceptance_rate, 3) << " max|z|=" << fmt(d.max_abs_z, 2)
      << (d.bimodal ? " BIMODAL" : "") << "\n";
  out << std::left << std::setw(28) << "statistic" << std::right << std::setw(12) << "observed" << std::setw(12)
      << "mean" << std::setw(11) << "sd" << std::setw(9) << "ess" << std::setw(8) << "z" << "  modes\n";
  for (const auto& s : d.stats)
    out << std::left << std::setw(28) << s.label << std::right << std::setw(12) << fmt(s.observed, 3)
        << std::setw(12) << fmt(s.mean, 3) << std::setw(11) << fmt(s.sd, 3) << std::setw(9) << fmt(s.ess, 0)
        << std::setw(8) << fmt(s.z, 2) << "  " << s.bimodality.modes << (s.bimodality.bimodal ? " bimodal" : "")
        << "\n";
}

void write_diagnostics_csv(std::ostream& out, const Diagnostics& d, const RunMeta& meta) {
  meta_comment(out, meta);
  out << "statistic,observed,mean,sd,ess,mcse,z,q05,q25,q50,q75,q95,modes,bimodal\n" << std::setprecision(10);
  for (const auto& s : d.stats) {
    out << s.label << ',' << s.observed << ',' << s.mean << ',' << s.sd << ',' << s.ess << ',' << s.mcse << ','
        << s.z;
    for (double q : s.quantiles) out << ',' << q;
    out << ',' << s.bimodality.modes << ',' << (s.bimodality.bimodal ? 1 : 0) << "\n";
  }
}

void write_diagnostics_json(std::ostream& out, const Diagnostics& d, const RunMeta& meta) {
  ordered_json j;
  j["meta"] = meta_json(meta);
  j["draws"] = d.draws;
  j["acceptance_rate"] = num(d.acceptance_rate);
  j["bimodal"] = d.bimodal;
  j["max_abs_z"] = num(d.max_abs_z);
  ordered_json stats = ordered_json::array();
  for (const auto& s : d.stats) {
    ordered_json t;
    t["label"] = s.label;
    t["observed"] = num(s.observed);
    t["mean"] = num(s.mean);
    t["sd"] = num(s.sd);
    t["ess"] = num(s.ess);
    t["mcse"] = num(s.mcse);
    t["z"] = num(s.z);
    t["quantiles"] = s.quantiles;
    t["modes"] = s.bimodality.modes;
    t["bimodal"] = s.bimodality.bimodal;
    t["valley_ratio"] = num(s.bimodality.valley_ratio);
    stats.push_back(std::move(t));
  }
  j["stats"] = stats;
  out << j.dump(2) << "\n";
}

void write_stats_csv(std::ostream& out, const SampleBatch& batch, const RunMeta& meta) {
  meta_comment(out, meta);
  for (std::size_t k = 0; k < batch.labels.size(); ++k) out << (k ? "," : "") << batch.labels[k];
  out << "\n" << std::setprecision(17);
  for (Eigen::Index r = 0; r < batch.stats.rows(); ++r) {
    for (Eigen::Index c = 0; c < batch.stats.cols(); ++c) out << (c ? "," : "") << batch.stats(r, c);
    out << "\n";
  }
}

void write_test_table(std::ostream& out, const McTestResult& r, const RunMeta& meta) {
  meta_comment(out, meta);
  out << "statistic   " << r.label << "\n"
      << "observed    " << r.observed << "\n"
      << "nsim        " << r.nsim << "\n"
      << "sims>=obs   " << r.at_least << "\n"
      << "p_value     " << fmt(r.p_value, 4) << "\n"
      << "quantiles   5%=" << r.quantiles[0] << " 25%=" << r.quantiles[1] << " 50%=" << r.quantiles[2]
      << " 75%=" << r.quantiles[3] << " 95%=" << r.quantiles[4] << "\n";
}

void write_test_csv(std::ostream& out, const McTestResult& r, const RunMeta& meta) {
  meta_comment(out, meta);
  out << "statistic,observed,nsim,at_least,p_value,q05,q25,q50,q75,q95\n" << std::setprecision(10);
  out << r.label << ',' << r.observed << ',' << r.nsim << ',' << r.at_least << ',' << r.p_value;
  for (double q : r.quantiles) out << ',' << q;
  out << "\n";
}

void write_test_json(std::ostream& out, const McTestResult& r, const RunMeta& meta) {
  ordered_json j;
  j["meta"] = meta_json(meta);
  j["statistic"] = r.label;
  j["observed"] = num(r.observed);
  j["nsim"] = r.nsim;
  j["at_least"] = r.at_least;
  j["p_value"] = num(r.p_value);
  j["quantiles"] = r.quantiles;
  out << j.dump(2) << "\n";
}

}  // namespace countergm
