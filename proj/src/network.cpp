#include "countergm/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace countergm {

CountNetwork::CountNetwork(std::size_t n, bool directed)
    : n_(n), directed_(directed), values_(n * n, 0), out_sum_(n, 0), in_sum_(n, 0), out_sqrt_(n, 0.0),
      in_sqrt_(n, 0.0) {
  if (n < 2) throw NetworkError("a network needs at least 2 actors");
  dyads_.reserve(dyad_count());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = directed ? 0 : i + 1; j < n; ++j)
      if (i != j) dyads_.push_back({i, j});
}

void CountNetwork::check_dyad(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_)
    throw NetworkError("actor index out of range: (" + std::to_string(i) + ", " + std::to_string(j) + ")");
  if (i == j) throw NetworkError("self-loop (" + std::to_string(i) + ", " + std::to_string(j) + ") is not a dyad");
}

Count CountNetwork::value(std::size_t i, std::size_t j) const {
  check_dyad(i, j);
  return at(i, j);
}

Dyad CountNetwork::canonical(std::size_t i, std::size_t j) const {
  if (!directed_ && j < i) return {j, i};
  return {i, j};
}

void CountNetwork::set_value(std::size_t i, std::size_t j, Count k) {
  check_dyad(i, j);
  const Count old = at(i, j);
  if (old == k) return;
  const double ds = std::sqrt(static_cast<double>(k)) - std::sqrt(static_cast<double>(old));
  values_[i * n_ + j] = k;
  if (!directed_) values_[j * n_ + i] = k;

  total_ = total_ - old + k;
  if (old == 0) ++nonzero_;
  if (k == 0) --nonzero_;
  sqrt_total_ += ds;

  out_sum_[i] = out_sum_[i] - old + k;
  in_sum_[j] = in_sum_[j] - old + k;
  out_sqrt_[i] += ds;
  in_sqrt_[j] += ds;
  if (!directed_) {
    out_sum_[j] = out_sum_[j] - old + k;
    in_sum_[i] = in_sum_[i] - old + k;
    out_sqrt_[j] += ds;
    in_sqrt_[i] += ds;
  }
}

void CountNetwork::refresh_aggregates() {
  total_ = 0;
  nonzero_ = 0;
  sqrt_total_ = 0.0;
  std::fill(out_sum_.begin(), out_sum_.end(), 0);
  std::fill(in_sum_.begin(), in_sum_.end(), 0);
  std::fill(out_sqrt_.begin(), out_sqrt_.end(), 0.0);
  std::fill(in_sqrt_.begin(), in_sqrt_.end(), 0.0);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) {
      if (i == j) continue;
      const Count v = at(i, j);
      const double s = std::sqrt(static_cast<double>(v));
      out_sum_[i] += v;
      in_sum_[j] += v;
      out_sqrt_[i] += s;
      in_sqrt_[j] += s;
      if (directed_ || i < j) {
        total_ += v;
        sqrt_total_ += s;
        if (v != 0) ++nonzero_;
      }
    }
}

CountNetwork from_weighted_edge_list(const std::vector<WeightedEdge>& rows, std::size_t n, bool directed) {
  CountNetwork y(n, directed);
  std::vector<bool> seen(n * n, false);
  for (const auto& r : rows) {
    if (r.tail < 0 || r.head < 0 || static_cast<std::size_t>(r.tail) >= n || static_cast<std::size_t>(r.head) >= n)
      throw NetworkError("actor index out of range in edge (" + std::to_string(r.tail) + ", " +
                         std::to_string(r.head) + ")");
    const auto i = static_cast<std::size_t>(r.tail);
    const auto j = static_cast<std::size_t>(r.head);
    if (i == j) throw NetworkError("self-loop on actor " + std::to_string(i));
    if (r.value < 0) throw NetworkError("negative dyad value " + std::to_string(r.value));
    const Dyad d = y.canonical(i, j);
    const std::size_t key = d.tail * n + d.head;
    if (seen[key])
      throw NetworkError("duplicate dyad (" + std::to_string(d.tail) + ", " + std::to_string(d.head) + ")");
    seen[key] = true;
    y.set_value(i, j, static_cast<Count>(r.value));
  }
  return y;
}

void NodeAttributes::add(const std::string& name, std::vector<double> values) {
  if (values.size() != n_)
    throw NetworkError("attribute '" + name + "' has " + std::to_string(values.size()) + " values, expected " +
                       std::to_string(n_));
  if (!has(name)) order_.push_back(name);
  columns_[name] = std::move(values);
}

const std::vector<double>& NodeAttributes::get(const std::string& name) const {
  auto it = columns_.find(name);
  if (it == columns_.end()) throw NetworkError("unknown node attribute '" + name + "'");
  return it->second;
}

NetworkSummary summarize(const CountNetwork& y) {
  NetworkSummary s;
  const double m = static_cast<double>(y.dyad_count());
  double sum = 0.0, sq = 0.0;
  std::size_t nz = 0;
  for (const Dyad& d : y.dyads()) {
    const double v = static_cast<double>(y.at(d.tail, d.head));
    sum += v;
    sq += v * v;
    if (v > 0) ++nz;
  }
  s.mean_value = sum / m;
  s.nonzero_density = static_cast<double>(nz) / m;
  s.sd_value = m > 1 ? std::sqrt(std::max(0.0, (sq - sum * sum / m) / (m - 1))) : 0.0;

  // Pooled over each actor's outgoing values (all incident values when undirected).
  const std::size_t n = y.size();
  double within = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double rs = 0.0, rq = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = static_cast<double>(y.at(i, j));
      rs += v;
      rq += v * v;
    }
    within += rq - rs * rs / static_cast<double>(n - 1);
  }
  const double dof = static_cast<double>(n) * static_cast<double>(n - 2);
  s.within_actor_sd = dof > 0 ? std::sqrt(std::max(0.0, within / dof)) : 0.0;
  return s;
}

namespace {

std::string strip_comment(const std::string& line) {
  const auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

}  // namespace

std::vector<WeightedEdge> parse_edge_list(std::istream& in) {
  std::vector<WeightedEdge> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(strip_comment(line));
    std::int64_t i = 0, j = 0, v = 0;
    if (!(ss >> i)) continue;
    std::string extra;
    if (!(ss >> j >> v) || (ss >> extra))
      throw NetworkError("edge list line " + std::to_string(lineno) + ": expected 'i j value'");
    if (i < 1 || j < 1)
      throw NetworkError("edge list line " + std::to_string(lineno) + ": actor indices are 1-based");
    rows.push_back({i - 1, j - 1, v});
  }
  return rows;
}

CountNetwork read_edge_list(const std::string& path, std::size_t n, bool directed) {
  std::ifstream in(path);
  if (!in) throw NetworkError("cannot open edge list '" + path + "'");
  return from_weighted_edge_list(parse_edge_list(in), n, directed);
}

void write_edge_list(std::ostream& out, const CountNetwork& y) {
  out << "# n=" << y.size() << " directed=" << (y.directed() ? 1 : 0) << "\n";
  for (const Dyad& d : y.dyads()) {
    const Count v = y.at(d.tail, d.head);
    if (v != 0) out << d.tail + 1 << ' ' << d.head + 1 << ' ' << v << '\n';
  }
}

NodeAttributes parse_attributes(std::istream& in) {
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(strip_comment(line));
    if (names.empty()) {
      std::string name;
      while (ss >> name) names.push_back(name);
      cols.resize(names.size());
      continue;
    }
    std::vector<double> row;
    double v = 0.0;
    while (ss >> v) row.push_back(v);
    if (!ss.eof()) throw NetworkError("attribute file line " + std::to_string(lineno) + ": non-numeric value");
    if (row.empty()) continue;
    if (row.size() != names.size())
      throw NetworkError("attribute file line " + std::to_string(lineno) + ": expected " +
                         std::to_string(names.size()) + " columns");
    for (std::size_t c = 0; c < row.size(); ++c) cols[c].push_back(row[c]);
  }
  if (names.empty()) throw NetworkError("attribute file has no header");
  NodeAttributes attrs(cols.front().size());
  for (std::size_t c = 0; c < names.size(); ++c) attrs.add(names[c], std::move(cols[c]));
  return attrs;
}

NodeAttributes read_attributes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NetworkError("cannot open attribute file '" + path + "'");
  return parse_attributes(in);
}

}  // namespace countergm
