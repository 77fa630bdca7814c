#include "countergm/config.hpp"

#include <fstream>
#include "json.hpp"
#include <sstream>

namespace countergm {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

template <class E>
E enum_value(const json& j, const std::string& where, const std::vector<std::pair<std::string, E>>& names) {
  if (!j.is_string()) throw ConfigError(where + ": expected a string");
  const auto s = j.get<std::string>();
  for (const auto& [name, value] : names)
    if (name == s) return value;
  std::string allowed;
  for (const auto& [name, value] : names) allowed += (allowed.empty() ? "" : ", ") + name;
  throw ConfigError(where + ": unknown value '" + s + "' (expected one of: " + allowed + ")");
}

const std::vector<std::pair<std::string, TermKind>> kTermKinds{
    {"sum", TermKind::sum},
    {"nonzero", TermKind::nonzero},
    {"cmp", TermKind::cmp},
    {"sqrt_sum", TermKind::sqrt_sum},
    {"dyad_covariate", TermKind::dyad_covariate},
    {"actor_sum", TermKind::actor_sum},
    {"mutual_min", TermKind::mutual_min},
    {"mutual_neg_abs_diff", TermKind::mutual_neg_abs_diff},
    {"mutual_geomean", TermKind::mutual_geomean},
    {"mutual_product", TermKind::mutual_product},
    {"actor_covariance", TermKind::actor_covariance},
    {"transitive_minmax", TermKind::transitive_minmax},
    {"transitive_general", TermKind::transitive_general},
};

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

TermSpec term_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": a term must be an object");
  check_keys(j, where,
             {"kind", "label", "attribute", "transform", "matrix", "actors", "direction", "centered", "two_path",
              "combine", "affect"});
  if (!j.contains("kind")) throw ConfigError(where + ": missing 'kind'");
  TermSpec t;
  t.kind = enum_value(j.at("kind"), where + ".kind", kTermKinds);
  try {
    if (j.contains("label")) t.label = j.at("label").get<std::string>();
    if (j.contains("attribute")) t.attribute = j.at("attribute").get<std::string>();
    if (j.contains("transform"))
      t.transform = enum_value<CovariateTransform>(j.at("transform"), where + ".transform",
                                                   {{"neg_absdiff", CovariateTransform::neg_absdiff},
                                                    {"absdiff", CovariateTransform::absdiff},
                                                    {"match", CovariateTransform::match},
                                                    {"product", CovariateTransform::product},
                                                    {"sum", CovariateTransform::sum}});
    if (j.contains("matrix")) {
      for (const auto& row : j.at("matrix"))
        for (const auto& v : row) t.matrix.push_back(v.get<double>());
    }
    if (j.contains("actors")) {
      for (const auto& a : j.at("actors")) {
        const auto v = a.get<long long>();
        if (v < 1) throw ConfigError(where + ".actors: actor indices are 1-based");
        t.actors.push_back(static_cast<std::size_t>(v - 1));
      }
    }
    if (j.contains("direction"))
      t.direction = enum_value<ActorDirection>(
          j.at("direction"), where + ".direction",
          {{"out", ActorDirection::out}, {"in", ActorDirection::in}, {"undirected", ActorDirection::undirected}});
    if (j.contains("centered")) t.centered = j.at("centered").get<bool>();
    if (j.contains("two_path"))
      t.two_path = enum_value<TwoPathValue>(j.at("two_path"), where + ".two_path",
                                            {{"min", TwoPathValue::min}, {"geomean", TwoPathValue::geomean}});
    if (j.contains("combine"))
      t.combine =
          enum_value<Combine>(j.at("combine"), where + ".combine", {{"max", Combine::max}, {"sum", Combine::sum}});
    if (j.contains("affect"))
      t.affect =
          enum_value<Affect>(j.at("affect"), where + ".affect", {{"min", Affect::min}, {"geomean", Affect::geomean}});
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return t;
}

std::vector<double> vector_of(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> v;
  for (const auto& x : j) {
    if (!x.is_number()) throw ConfigError(where + ": expected numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

void read_sampler(const json& j, SamplerControl& c, const std::string& where) {
  check_keys(j, where, {"burnin", "interval", "draws", "pi0", "chains", "seed"});
  try {
    if (j.contains("burnin")) c.burnin = j.at("burnin").get<std::size_t>();
    if (j.contains("interval")) c.interval = j.at("interval").get<std::size_t>();
    if (j.contains("draws")) c.draws = j.at("draws").get<std::size_t>();
    if (j.contains("pi0")) c.pi0 = j.at("pi0").get<double>();
    if (j.contains("chains")) c.chains = j.at("chains").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  if (auto msg = c.validate(); !msg.empty()) throw ConfigError(where + ": " + msg);
}

void read_fit(const json& j, RunConfig& cfg) {
  check_keys(j, "fit",
             {"method", "max_iterations", "tolerance", "trust_radius", "final_draws", "abort_on_degeneracy",
              "degeneracy_patience", "mom_gain", "mom_offset", "mom_exponent", "mom_iterations", "mom_pilot_draws",
              "mom_steps"});
  auto& f = cfg.fit;
  try {
    if (j.contains("method")) {
      cfg.method = j.at("method").get<std::string>();
      if (cfg.method != "mcmle" && cfg.method != "mom")
        throw ConfigError("fit.method: unknown value '" + cfg.method + "' (expected mcmle or mom)");
    }
    if (j.contains("max_iterations")) f.max_iterations = j.at("max_iterations").get<std::size_t>();
    if (j.contains("tolerance")) f.tolerance = j.at("tolerance").get<double>();
    if (j.contains("trust_radius")) f.trust_radius = j.at("trust_radius").get<double>();
    if (j.contains("final_draws")) f.final_draws = j.at("final_draws").get<std::size_t>();
    if (j.contains("abort_on_degeneracy")) f.abort_on_degeneracy = j.at("abort_on_degeneracy").get<bool>();
    if (j.contains("degeneracy_patience")) f.degeneracy_patience = j.at("degeneracy_patience").get<std::size_t>();
    if (j.contains("mom_gain")) f.mom_gain = j.at("mom_gain").get<double>();
    if (j.contains("mom_offset")) f.mom_offset = j.at("mom_offset").get<double>();
    if (j.contains("mom_exponent")) f.mom_exponent = j.at("mom_exponent").get<double>();
    if (j.contains("mom_iterations")) f.mom_iterations = j.at("mom_iterations").get<std::size_t>();
    if (j.contains("mom_pilot_draws")) f.mom_pilot_draws = j.at("mom_pilot_draws").get<std::size_t>();
    if (j.contains("mom_steps")) f.mom_steps = j.at("mom_steps").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("fit: ") + e.what());
  }
}

}  // namespace

TermSpec parse_term(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("term: ") + e.what());
  }
  return term_from_json(j, "term");
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  check_keys(doc, "config", {"description", "network", "model", "theta0", "theta", "sampler", "fit", "test", "seed"});

  RunConfig cfg;
  cfg.hash = fnv1a64(text);
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };

  if (!doc.contains("network")) throw ConfigError("config: missing 'network'");
  const auto& net = doc.at("network");
  check_keys(net, "network", {"edges", "attributes", "n", "directed"});
  try {
    if (net.contains("edges")) cfg.network.edges = resolve(net.at("edges").get<std::string>());
    if (net.contains("attributes")) cfg.network.attributes = resolve(net.at("attributes").get<std::string>());
    cfg.network.n = net.at("n").get<std::size_t>();
    cfg.network.directed = net.value("directed", false);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("network: ") + e.what());
  }

  if (!doc.contains("model")) throw ConfigError("config: missing 'model'");
  const auto& model = doc.at("model");
  check_keys(model, "model", {"reference", "terms"});
  if (model.contains("reference"))
    cfg.model.reference = enum_value<Reference>(model.at("reference"), "model.reference",
                                                {{"poisson", Reference::poisson}, {"geometric", Reference::geometric}});
  if (!model.contains("terms") || !model.at("terms").is_array() || model.at("terms").empty())
    throw ConfigError("model.terms: expected a non-empty array");
  for (std::size_t k = 0; k < model.at("terms").size(); ++k)
    cfg.model.terms.push_back(term_from_json(model.at("terms")[k], "model.terms[" + std::to_string(k) + "]"));

  auto check_dim = [&](const std::vector<double>& v, const std::string& where) {
    if (v.size() != cfg.model.dimension())
      throw ConfigError(where + ": has " + std::to_string(v.size()) + " entries for " +
                        std::to_string(cfg.model.dimension()) + " terms");
  };
  if (doc.contains("theta0")) {
    cfg.theta0 = vector_of(doc.at("theta0"), "theta0");
    check_dim(*cfg.theta0, "theta0");
  }
  if (doc.contains("theta")) {
    cfg.theta = vector_of(doc.at("theta"), "theta");
    check_dim(*cfg.theta, "theta");
  }
  if (doc.contains("sampler")) read_sampler(doc.at("sampler"), cfg.fit.sampler, "sampler");
  if (doc.contains("seed")) cfg.fit.sampler.seed = doc.at("seed").get<std::uint64_t>();
  if (doc.contains("fit")) read_fit(doc.at("fit"), cfg);
  if (auto msg = cfg.fit.validate(); !msg.empty()) throw ConfigError("fit: " + msg);

  if (doc.contains("test")) {
    const auto& t = doc.at("test");
    check_keys(t, "test", {"term", "theta_null", "nsim"});
    if (t.contains("term")) cfg.test.term = term_from_json(t.at("term"), "test.term");
    if (t.contains("theta_null")) {
      cfg.test.theta_null = vector_of(t.at("theta_null"), "test.theta_null");
      check_dim(*cfg.test.theta_null, "test.theta_null");
    }
    if (t.contains("nsim")) cfg.test.nsim = t.at("nsim").get<std::size_t>();
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_config(ss.str(), path.parent_path());
  cfg.source = path;
  return cfg;
}

NodeAttributes load_attributes(const NetworkSource& source) {
  if (source.attributes.empty()) return NodeAttributes(source.n);
  NodeAttributes a = read_attributes(source.attributes.string());
  if (a.size() != source.n)
    throw ConfigError("attribute file '" + source.attributes.string() + "' has " + std::to_string(a.size()) +
                      " rows for " + std::to_string(source.n) + " actors");
  return a;
}

LoadedData load_data(const NetworkSource& source) {
  if (source.edges.empty()) throw ConfigError("network.edges is required for this command");
  LoadedData d{read_edge_list(source.edges.string(), source.n, source.directed), NodeAttributes(source.n)};
  d.attributes = load_attributes(source);
  return d;
}

}  // namespace countergm
