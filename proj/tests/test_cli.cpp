// End-to-end checks of the command-line tool. CLI_PATH and SOURCE_DIR come from CMake.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "countergm/network.hpp"
#include "countergm/terms.hpp"
#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("countergm_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run run(const std::string& args) {
  const fs::path err = scratch() / "stderr.txt";
  const std::string cmd = std::string(CLI_PATH) + " " + args + " 2>" + err.string();
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

// Data rows of a CSV with one leading comment line and a header.
std::vector<std::vector<double>> csv_rows(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  int skipped = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (skipped++ == 0) continue;  // header
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

const std::string kSumConfig = R"({
  "network": {"n": 20},
  "model": {"terms": [{"kind": "sum"}]},
  "theta": [0.6931471805599453],
  "sampler": {"burnin": 2000, "interval": 100, "draws": 2000},
  "seed": 11
})";

}  // namespace

TEST_CASE("malformed term kind is a parse error naming the entry") {
  const auto cfg = write_config("bad.json", R"({"network": {"n": 5},
    "model": {"terms": [{"kind": "sum"}, {"kind": "transitivty"}]}, "theta": [0, 0]})");
  const Run r = run("simulate --config " + cfg.string());
  CHECK(r.code == 1);
  CHECK(r.err.find("model.terms[1]") != std::string::npos);
  CHECK(r.err.find("'transitivty'") != std::string::npos);
}

TEST_CASE("simulate: Poisson mean, determinism and seed recording") {
  const auto cfg = write_config("sum.json", kSumConfig);
  const Run a = run("simulate --config " + cfg.string());
  const Run b = run("simulate --config " + cfg.string());
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("seed=11") != std::string::npos);
  CHECK(a.out.find("config_hash=") != std::string::npos);

  const Run c = run("simulate --seed 12 --config " + cfg.string());
  CHECK(c.out != a.out);
  CHECK(c.out.find("seed=12") != std::string::npos);

  // 190 dyads at mean 2: the sum is Poisson(380).
  const auto rows = csv_rows(a.out);
  REQUIRE(rows.size() == 2000);
  double m = 0;
  for (const auto& r : rows) m += r[0];
  m /= static_cast<double>(rows.size());
  const double se = std::sqrt(380.0 / 2000.0) * 2.0;  // allow for mild autocorrelation
  CHECK(std::abs(m - 380.0) < 4 * se);
}

TEST_CASE("simulate refuses a CMP coefficient above 1") {
  const auto cfg = write_config("cmp.json", R"({"network": {"n": 6},
    "model": {"terms": [{"kind": "sum"}, {"kind": "cmp"}]}, "theta": [0, 1.5]})");
  const Run r = run("simulate --config " + cfg.string());
  CHECK(r.code == 1);
  CHECK(r.err.find("<= 1") != std::string::npos);
  CHECK(r.out.empty());
}

TEST_CASE("mutual product triggers a warning") {
  const auto cfg = write_config("mp.json", R"({"network": {"n": 5, "directed": true},
    "model": {"terms": [{"kind": "sum"}, {"kind": "mutual_product"}]}, "theta": [0, -0.5],
    "sampler": {"burnin": 10, "interval": 1, "draws": 5}})");
  const Run r = run("simulate --config " + cfg.string());
  CHECK(r.code == 0);
  CHECK(r.err.find("warning") != std::string::npos);
}

TEST_CASE("simulated networks round-trip through the edge list format") {
  const auto cfg = write_config("rt.json", R"({"network": {"n": 12},
    "model": {"terms": [{"kind": "sum"}, {"kind": "sqrt_sum"}, {"kind": "transitive_minmax"},
                        {"kind": "actor_covariance", "direction": "undirected"}]},
    "theta": [0.5, -0.5, 0.05, 0.2],
    "sampler": {"burnin": 500, "interval": 20, "draws": 30, "chains": 3}, "seed": 5})");
  const fs::path out = scratch() / "rt";
  const Run r = run("simulate --networks --output-dir " + out.string() + " --config " + cfg.string());
  REQUIRE(r.code == 0);
  CHECK(slurp(out / "stats.csv") == r.out);

  using namespace countergm;
  ModelSpec spec{{TermSpec::of(TermKind::sum), TermSpec::of(TermKind::sqrt_sum),
                  TermSpec::of(TermKind::transitive_minmax),
                  TermSpec::within_actor_covariance(ActorDirection::undirected)},
                 Reference::poisson};
  const Model model(spec, NodeAttributes(12), 12, false);
  const auto rows = csv_rows(r.out);
  REQUIRE(rows.size() == 30);
  // chains get 10 draws each; each chain's last row belongs to its final network
  for (std::size_t k = 0; k < 3; ++k) {
    const CountNetwork y = read_edge_list((out / ("network_" + std::to_string(k + 1) + ".edges")).string(), 12, false);
    const StatVector s = eval_stats(model, y);
    const auto& row = rows[10 * k + 9];
    for (std::size_t t = 0; t < s.size(); ++t) CHECK(s[t] == doctest::Approx(row[t]).epsilon(1e-12));
  }
}

TEST_CASE("test subcommand rejects a statistic already in the null model") {
  const auto cfg = write_config("t.json", std::string(R"({"network": {"edges": ")") + SOURCE_DIR +
                                              R"(/data/karate/karate.edges", "n": 34},
    "model": {"terms": [{"kind": "sum"}, {"kind": "transitive_minmax"}]},
    "test": {"term": {"kind": "transitive_minmax"}, "theta_null": [0, 0]}})");
  const Run r = run("test --config " + cfg.string());
  CHECK(r.code == 1);
  CHECK(r.err.find("already in the null model") != std::string::npos);
}

TEST_CASE("fit exits nonzero without convergence") {
  const auto cfg = write_config("nc.json", std::string(R"({"network": {"edges": ")") + SOURCE_DIR +
                                               R"(/data/karate/karate.edges", "n": 34},
    "model": {"terms": [{"kind": "sum"}, {"kind": "transitive_minmax"}]},
    "theta0": [-3, 0],
    "sampler": {"burnin": 100, "interval": 5, "draws": 50},
    "fit": {"max_iterations": 1}})");
  const Run r = run("fit --config " + cfg.string());
  CHECK(r.code == 2);
  CHECK(r.out.find("status=not_converged") != std::string::npos);
}

TEST_CASE("fit of the sum model on the karate counts") {
  const auto cfg = write_config("ks.json", std::string(R"({"network": {"edges": ")") + SOURCE_DIR +
                                               R"(/data/karate/karate.edges", "n": 34},
    "model": {"terms": [{"kind": "sum"}]},
    "sampler": {"burnin": 1000, "interval": 50, "draws": 2000}})");
  const Run r = run("fit --format csv --config " + cfg.string());
  REQUIRE(r.code == 0);
  // closed form: log(231 / 561)
  const auto pos = r.out.find("sum,");
  REQUIRE(pos != std::string::npos);
  const double est = std::stod(r.out.substr(pos + 4));
  CHECK(est == doctest::Approx(std::log(231.0 / 561.0)).epsilon(0.02));
}

TEST_CASE("summary of the karate counts") {
  const Run r = run(std::string("summary --config ") + SOURCE_DIR + "/configs/karate/full.json");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("mean_value 0.4117647059") != std::string::npos);
  CHECK(r.out.find("nonzero_density 0.1390374332") != std::string::npos);
  CHECK(r.out.find("stat:Transitivity 172") != std::string::npos);
}

TEST_CASE("dist tabulation") {
  const Run r = run(
      "dist --max 60 --column poisson:mu=2 --column geometric:mean=2 --column zmp:theta1=0.6931471805599453,theta2=0 "
      "--column sqrt:theta1=-1,mean=1 --column sqrt:theta1=0,mean=1 --column sqrt:theta1=1,mean=1");
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(r.out);
  REQUIRE(rows.size() == 61);
  std::vector<double> mean(6, 0), sq(6, 0);
  for (const auto& row : rows) {
    CHECK(row[3] == doctest::Approx(row[1]).epsilon(1e-12));  // ZMP with theta2 = 0 is Poisson
    for (std::size_t c = 0; c < 6; ++c) {
      mean[c] += row[0] * row[c + 1];
      sq[c] += row[0] * row[0] * row[c + 1];
    }
  }
  CHECK(mean[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(mean[1] == doctest::Approx(2.0).epsilon(1e-6));
  std::vector<double> var(6);
  for (std::size_t c = 0; c < 6; ++c) var[c] = sq[c] - mean[c] * mean[c];
  CHECK(var[3] > var[4]);
  CHECK(var[4] > var[5]);
  CHECK(var[4] == doctest::Approx(1.0).epsilon(1e-6));

  const Run bad = run("dist --column cmp:theta1=0.5,theta2=0.5");
  CHECK(bad.code == 1);
  CHECK(bad.err.find("natural parameter space") != std::string::npos);
}

TEST_CASE("karate faction model through the CLI") {
  const fs::path out = scratch() / "faction";
  const Run r = run(std::string("fit --format csv --output-dir ") + out.string() + " --config " + SOURCE_DIR +
                    "/configs/karate/faction.json");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(out / "fit.csv"));
  CHECK(fs::exists(out / "diagnostics.csv"));
  const auto pos = r.out.find("Faction,");
  REQUIRE(pos != std::string::npos);
  const double est = std::stod(r.out.substr(pos + 8));
  // reference estimate 0.27, standard error 0.04
  CHECK(std::abs(est - 0.27) <= 2 * 0.04);
}
