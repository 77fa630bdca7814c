// Batch front-end: fit, simulate, test, diagnose, dist, summary.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "countergm/config.hpp"
#include "countergm/distributions.hpp"
#include "countergm/report.hpp"

namespace fs = std::filesystem;
using namespace countergm;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kError = 1;         // usage, parse, I/O, constraint errors
constexpr int kNotConverged = 2;
constexpr int kBoundary = 3;
constexpr int kDegenerate = 4;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::string output_dir;
  std::string format = "table";
};

struct Loaded {
  RunConfig cfg;
  RunMeta meta;
};

Loaded load(const Common& c, const std::string& command) {
  if (c.config.empty()) throw ConfigError("--config is required");
  Loaded l{load_config(c.config), {}};
  if (c.seed) l.cfg.fit.sampler.seed = *c.seed;
  l.cfg.fit.sampler.threads = c.threads;
  l.meta = {l.cfg.hash, l.cfg.fit.sampler.seed, command};
  return l;
}

void warn_constrained_terms(const ModelSpec& spec) {
  for (const auto& t : spec.terms)
    if (t.kind == TermKind::mutual_product)
      std::cerr << "warning: term '" << t.display_label()
                << "' is constrained (coefficient <= 0); positive values make the model non-normalizable\n";
}

// Writes via `emit` to stdout, and to output_dir/<stem>.<ext> when set.
template <class F>
void emit(const Common& c, const std::string& stem, F&& write) {
  write(std::cout);
  if (c.output_dir.empty()) return;
  fs::create_directories(c.output_dir);
  const std::string ext = c.format == "json" ? ".json" : c.format == "csv" ? ".csv" : ".txt";
  const fs::path p = fs::path(c.output_dir) / (stem + ext);
  std::ofstream f(p);
  if (!f) throw ConfigError("cannot write '" + p.string() + "'");
  write(f);
}

void emit_fit(const Common& c, const FitResult& fit, const RunMeta& meta) {
  emit(c, "fit", [&](std::ostream& o) {
    if (c.format == "json")
      write_fit_json(o, fit, meta);
    else if (c.format == "csv")
      write_fit_csv(o, fit, meta);
    else
      write_fit_table(o, fit, meta);
  });
}

void emit_diag(const Common& c, const Diagnostics& d, const RunMeta& meta, bool to_stdout) {
  auto write = [&](std::ostream& o) {
    if (c.format == "json")
      write_diagnostics_json(o, d, meta);
    else if (c.format == "csv")
      write_diagnostics_csv(o, d, meta);
    else
      write_diagnostics_table(o, d, meta);
  };
  if (to_stdout) {
    emit(c, "diagnostics", write);
  } else if (!c.output_dir.empty()) {
    fs::create_directories(c.output_dir);
    const std::string ext = c.format == "json" ? ".json" : c.format == "csv" ? ".csv" : ".txt";
    std::ofstream f(fs::path(c.output_dir) / ("diagnostics" + ext));
    write(f);
  }
}

int exit_code(FitStatus s) {
  switch (s) {
    case FitStatus::converged:
      return kOk;
    case FitStatus::boundary:
      return kBoundary;
    case FitStatus::degenerate:
      return kDegenerate;
    case FitStatus::not_converged:
      return kNotConverged;
  }
  return kError;
}

FitResult run_fit(const Model& model, const CountNetwork& y, const RunConfig& cfg) {
  const std::vector<double> theta0 = cfg.theta0 ? *cfg.theta0 : default_theta0(model, y);
  return cfg.method == "mom" ? mom_fit(model, y, theta0, cfg.fit) : mcmc_mle(model, y, theta0, cfg.fit);
}

int cmd_fit(const Common& c) {
  auto [cfg, meta] = load(c, "fit");
  warn_constrained_terms(cfg.model);
  const LoadedData data = load_data(cfg.network);
  const Model model(cfg.model, data.attributes, cfg.network.n, cfg.network.directed);
  const FitResult fit = run_fit(model, data.network, cfg);
  emit_fit(c, fit, meta);
  if (fit.sample.size() > 0) {
    std::vector<double> obs(fit.observed.data(), fit.observed.data() + fit.observed.size());
    emit_diag(c, diagnostics(fit.sample, obs), meta, false);
  }
  if (fit.status != FitStatus::converged)
    std::cerr << "fit did not converge: " << to_string(fit.status) << (fit.message.empty() ? "" : ": ")
              << fit.message << "\n";
  return exit_code(fit.status);
}

std::vector<double> parse_vector(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + tok + "'");
    }
  }
  return v;
}

std::vector<double> pick_theta(const RunConfig& cfg, const std::string& override_theta) {
  std::vector<double> theta;
  if (!override_theta.empty())
    theta = parse_vector(override_theta);
  else if (cfg.theta)
    theta = *cfg.theta;
  else if (cfg.theta0)
    theta = *cfg.theta0;
  else
    throw ConfigError("no parameter given: set 'theta' in the config or pass --theta");
  if (theta.size() != cfg.model.dimension())
    throw ConfigError("theta has " + std::to_string(theta.size()) + " entries for " +
                      std::to_string(cfg.model.dimension()) + " terms");
  return theta;
}

int cmd_simulate(const Common& c, const std::string& theta_arg, std::optional<std::size_t> draws,
                 bool write_networks) {
  auto [cfg, meta] = load(c, "simulate");
  warn_constrained_terms(cfg.model);
  if (draws) cfg.fit.sampler.draws = *draws;
  const auto theta = pick_theta(cfg, theta_arg);
  const NodeAttributes attrs = load_attributes(cfg.network);
  const Model model(cfg.model, attrs, cfg.network.n, cfg.network.directed);
  const CountNetwork start = cfg.network.edges.empty()
                                 ? CountNetwork(cfg.network.n, cfg.network.directed)
                                 : read_edge_list(cfg.network.edges.string(), cfg.network.n, cfg.network.directed);
  const SampleBatch batch = sample(model, theta, start, cfg.fit.sampler);

  std::cout << std::setprecision(17);
  write_stats_csv(std::cout, batch, meta);
  if (!c.output_dir.empty()) {
    fs::create_directories(c.output_dir);
    std::ofstream f(fs::path(c.output_dir) / "stats.csv");
    write_stats_csv(f, batch, meta);
    if (write_networks) {
      for (std::size_t k = 0; k < batch.final_networks.size(); ++k) {
        std::ofstream e(fs::path(c.output_dir) / ("network_" + std::to_string(k + 1) + ".edges"));
        e << "# command=simulate config_hash=" << hex64(meta.config_hash) << " seed=" << meta.seed
          << " chain=" << k + 1 << "\n";
        write_edge_list(e, batch.final_networks[k]);
      }
    }
  } else if (write_networks) {
    throw ConfigError("--networks needs --output-dir");
  }
  return kOk;
}

int cmd_test(const Common& c, std::optional<std::size_t> nsim) {
  auto [cfg, meta] = load(c, "test");
  if (!cfg.test.term) throw ConfigError("test.term: missing the statistic to test");
  if (nsim) cfg.test.nsim = *nsim;
  const LoadedData data = load_data(cfg.network);
  const Model model(cfg.model, data.attributes, cfg.network.n, cfg.network.directed);
  SamplerControl sc = cfg.fit.sampler;
  sc.draws = cfg.test.nsim;

  McTestResult r;
  if (cfg.test.theta_null) {
    r = monte_carlo_test(model, *cfg.test.theta_null, *cfg.test.term, data.attributes, data.network, sc);
  } else {
    for (const auto& t : cfg.model.terms)
      if (same_statistic(t, *cfg.test.term))
        throw FitError("statistic '" + cfg.test.term->display_label() + "' is already in the null model");
    const FitResult null_fit = run_fit(model, data.network, cfg);
    emit_fit(c, null_fit, meta);
    r = monte_carlo_test(model, null_fit, *cfg.test.term, data.attributes, data.network, sc);
  }
  emit(c, "test", [&](std::ostream& o) {
    if (c.format == "json")
      write_test_json(o, r, meta);
    else if (c.format == "csv")
      write_test_csv(o, r, meta);
    else
      write_test_table(o, r, meta);
  });
  return kOk;
}

int cmd_diagnose(const Common& c, const std::string& theta_arg) {
  auto [cfg, meta] = load(c, "diagnose");
  const auto theta = pick_theta(cfg, theta_arg);
  const LoadedData data = load_data(cfg.network);
  const Model model(cfg.model, data.attributes, cfg.network.n, cfg.network.directed);
  const SampleBatch batch = sample(model, theta, data.network, cfg.fit.sampler);
  const StatVector obs = eval_stats(model, data.network);
  emit_diag(c, diagnostics(batch, obs.values), meta, true);
  return kOk;
}

// ---------------------------------------------------------------------------
// dist

struct Column {
  std::string name;
  std::function<double(Count)> pmf;
  double mean = 0.0;
  double variance = 0.0;
};

std::map<std::string, double> parse_params(const std::string& spec, const std::string& text) {
  std::map<std::string, double> m;
  std::stringstream ss(text);
  std::string kv;
  while (std::getline(ss, kv, ',')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("column '" + spec + "': expected key=value, got '" + kv + "'");
    const auto v = parse_vector(kv.substr(eq + 1));
    if (v.size() != 1) throw ConfigError("column '" + spec + "': bad value in '" + kv + "'");
    m[kv.substr(0, eq)] = v[0];
  }
  return m;
}

Column make_column(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string family = spec.substr(0, colon);
  auto params = parse_params(spec, colon == std::string::npos ? "" : spec.substr(colon + 1));
  auto take = [&](const char* key) -> std::optional<double> {
    auto it = params.find(key);
    if (it == params.end()) return std::nullopt;
    const double v = it->second;
    params.erase(it);
    return v;
  };
  auto need = [&](const char* key) {
    auto v = take(key);
    if (!v) throw ConfigError("column '" + spec + "': missing parameter '" + key + "'");
    return *v;
  };
  // Moments from the full series of whichever log-pmf the column uses.
  auto with_moments = [&](std::function<double(Count)> pmf) {
    Column col{spec, pmf};
    const SeriesResult s = sum_log_series([&](Count x) { return std::log(pmf(x)); });
    col.mean = s.mean;
    col.variance = s.variance;
    return col;
  };

  Column col;
  if (family == "poisson") {
    const double mu = params.count("theta") ? std::exp(need("theta")) : need("mu");
    col = {spec, [mu](Count x) { return poisson_pmf(mu, x); }, mu, mu};
  } else if (family == "geometric") {
    const double p = params.count("p") ? need("p") : 1.0 / (1.0 + need("mean"));
    if (!(p > 0 && p <= 1)) throw ConfigError("column '" + spec + "': need 0 < p <= 1");
    col = {spec, [p](Count x) { return geometric_pmf(p, x); }, (1 - p) / p, (1 - p) / (p * p)};
  } else if (family == "zmp") {
    const double t1 = need("theta1"), t2 = need("theta2");
    col = with_moments([t1, t2](Count x) { return zmp_pmf(t1, t2, x); });
  } else if (family == "cmp") {
    const CmpParams p{need("theta1"), need("theta2")};
    if (!cmp_in_natural_space(p))
      throw DistributionError("column '" + spec + "': parameters outside the natural parameter space");
    const SeriesResult s = cmp_moments(p);
    col = {spec, [p](Count x) { return cmp_pmf(p, x); }, s.mean, s.variance};
  } else if (family == "sqrt") {
    const double t1 = need("theta1");
    const double t2 = params.count("mean") ? sqrt_model_tune(t1, need("mean")) : need("theta2");
    const SeriesResult s = sqrt_model_moments(t1, t2);
    col = {spec, [t1, t2](Count x) { return sqrt_model_pmf(t1, t2, x); }, s.mean, s.variance};
  } else {
    throw ConfigError("unknown distribution family '" + family + "' (expected poisson, geometric, zmp, cmp, sqrt)");
  }
  if (!params.empty())
    throw ConfigError("column '" + spec + "': unknown parameter '" + params.begin()->first + "'");
  return col;
}

int cmd_dist(const Common& c, const std::vector<std::string>& specs, Count max_y) {
  if (specs.empty()) throw ConfigError("dist needs at least one --column");
  std::vector<Column> cols;
  std::string joined;
  for (const auto& s : specs) {
    cols.push_back(make_column(s));
    joined += s + ";";
  }
  const RunMeta meta{fnv1a64(joined), 0, "dist"};
  emit(c, "dist", [&](std::ostream& o) {
    o << "# command=dist config_hash=" << hex64(meta.config_hash) << " seed=0\n";
    o << std::setprecision(12);
    if (c.format == "json") {
      o << "{\"columns\": [";
      for (std::size_t k = 0; k < cols.size(); ++k) {
        o << (k ? ", " : "") << "{\"name\": \"" << cols[k].name << "\", \"mean\": " << cols[k].mean
          << ", \"variance\": " << cols[k].variance << ", \"pmf\": [";
        for (Count y = 0; y <= max_y; ++y) o << (y ? ", " : "") << cols[k].pmf(y);
        o << "]}";
      }
      o << "]}\n";
      return;
    }
    o << "# mean";
    for (const auto& col : cols) o << ' ' << col.mean;
    o << "\n# variance";
    for (const auto& col : cols) o << ' ' << col.variance;
    o << "\ny";
    for (const auto& col : cols) o << ",\"" << col.name << '"';
    o << "\n";
    for (Count y = 0; y <= max_y; ++y) {
      o << y;
      for (const auto& col : cols) o << ',' << col.pmf(y);
      o << "\n";
    }
  });
  return kOk;
}

int cmd_summary(const Common& c) {
  auto [cfg, meta] = load(c, "summary");
  const LoadedData data = load_data(cfg.network);
  const NetworkSummary s = summarize(data.network);
  const Model model(cfg.model, data.attributes, cfg.network.n, cfg.network.directed);
  const StatVector stats = eval_stats(model, data.network);
  emit(c, "summary", [&](std::ostream& o) {
    o << "# command=summary config_hash=" << hex64(meta.config_hash) << " seed=" << meta.seed << "\n";
    o << std::setprecision(10);
    const char* sep = c.format == "csv" ? "," : " ";
    if (c.format == "csv") o << "quantity,value\n";
    o << "actors" << sep << data.network.size() << "\n"
      << "dyads" << sep << data.network.dyad_count() << "\n"
      << "directed" << sep << (data.network.directed() ? 1 : 0) << "\n"
      << "mean_value" << sep << s.mean_value << "\n"
      << "sd_value" << sep << s.sd_value << "\n"
      << "nonzero_density" << sep << s.nonzero_density << "\n"
      << "within_actor_sd" << sep << s.within_actor_sd << "\n";
    for (std::size_t k = 0; k < stats.size(); ++k) o << "stat:" << stats.labels[k] << sep << stats[k] << "\n";
  });
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Count-valued exponential random graph models"};
  app.require_subcommand(1);
  Common common;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", common.config, "JSON run configuration");
    if (needs_config) opt->required();
    sub->add_option("--seed", common.seed, "override the sampler seed");
    sub->add_option("--threads", common.threads, "worker threads for chains")->check(CLI::PositiveNumber);
    sub->add_option("--output-dir", common.output_dir, "also write artifacts here");
    sub->add_option("--format", common.format, "output format")
        ->check(CLI::IsMember({"csv", "json", "table"}));
  };

  auto* fit = app.add_subcommand("fit", "fit the configured model to the observed network");
  add_common(fit, true);

  auto* sim = app.add_subcommand("simulate", "draw networks from the configured model");
  add_common(sim, true);
  std::string theta_arg;
  std::optional<std::size_t> draws;
  bool write_networks = false;
  sim->add_option("--theta", theta_arg, "comma-separated parameter, overrides the config");
  sim->add_option("--draws", draws, "retained draws");
  sim->add_flag("--networks", write_networks, "write each chain's final network to the output directory");

  auto* test = app.add_subcommand("test", "Monte Carlo test of an extra statistic under the configured null");
  add_common(test, true);
  std::optional<std::size_t> nsim;
  test->add_option("--nsim", nsim, "simulated networks");

  auto* diag = app.add_subcommand("diagnose", "sampler diagnostics at a given parameter");
  add_common(diag, true);
  diag->add_option("--theta", theta_arg, "comma-separated parameter, overrides the config");

  auto* dist = app.add_subcommand("dist", "tabulate single-dyad pmfs as CSV");
  add_common(dist, false);
  std::vector<std::string> columns;
  Count max_y = 20;
  dist->add_option("--column", columns,
                   "family:key=value,... e.g. poisson:mu=2, geometric:mean=2, zmp:theta1=..,theta2=.., "
                   "cmp:theta1=..,theta2=.., sqrt:theta1=..,mean=1")
      ->required();
  dist->add_option("--max", max_y, "largest value tabulated");

  auto* summary = app.add_subcommand("summary", "descriptive summary and observed statistics");
  add_common(summary, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) return cmd_fit(common);
    if (*sim) return cmd_simulate(common, theta_arg, draws, write_networks);
    if (*test) return cmd_test(common, nsim);
    if (*diag) return cmd_diagnose(common, theta_arg);
    if (*dist) return cmd_dist(common, columns, max_y);
    if (*summary) return cmd_summary(common);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}
