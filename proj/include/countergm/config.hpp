#ifndef COUNTERGM_CONFIG_HPP
#define COUNTERGM_CONFIG_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "countergm/inference.hpp"

namespace countergm {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NetworkSource {
  std::filesystem::path edges;       // may be empty for simulate
  std::filesystem::path attributes;  // may be empty
  std::size_t n = 0;
  bool directed = false;
};

struct TestOptions {
  std::optional<TermSpec> term;
  std::optional<std::vector<double>> theta_null;  // skip the null fit when given
  std::size_t nsim = 1000;
};

/// Everything a CLI run needs, parsed from one JSON document.
struct RunConfig {
  std::filesystem::path source;  // the config file itself, if read from disk
  std::uint64_t hash = 0;        // FNV-1a of the document text
  NetworkSource network;
  ModelSpec model;
  std::optional<std::vector<double>> theta0;
  std::optional<std::vector<double>> theta;  // for simulate / diagnose
  std::string method = "mcmle";              // or "mom"
  FitControl fit;
  TestOptions test;
};

std::uint64_t fnv1a64(std::string_view text);

/// Parses a config document. Relative paths resolve against base_dir.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Parses one term entry, e.g. {"kind": "actor_sum", "actors": [1]}; actors are 1-based.
TermSpec parse_term(const std::string& json_text);

struct LoadedData {
  CountNetwork network;
  NodeAttributes attributes;
};

/// Edges and attributes; throws ConfigError when edges are not configured.
LoadedData load_data(const NetworkSource& source);
NodeAttributes load_attributes(const NetworkSource& source);

}  // namespace countergm

#endif
