#ifndef COUNTERGM_NETWORK_HPP
#define COUNTERGM_NETWORK_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace countergm {

using Count = std::uint64_t;

/// An ordered pair of actors, 0-based. Undirected dyads are canonical (tail < head).
struct Dyad {
  std::size_t tail = 0;
  std::size_t head = 0;
  friend bool operator==(const Dyad&, const Dyad&) = default;
};

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WeightedEdge {
  std::int64_t tail;
  std::int64_t head;
  std::int64_t value;
};

/// Count-valued network over the dyad set of all pairs i != j (ordered when
/// directed, unordered otherwise). Every dyad has a value in N0; unset dyads
/// are 0. Storage is dense; undirected values are mirrored so that
/// value(i, j) == value(j, i).
///
/// Alongside the values the network keeps per-actor aggregates (row/column
/// sums of values and of their square roots) so that statistics depending on
/// actor totals can be updated in O(1) per dyad change.
class CountNetwork {
 public:
  CountNetwork(std::size_t n, bool directed);

  std::size_t size() const { return n_; }
  bool directed() const { return directed_; }
  std::size_t dyad_count() const { return directed_ ? n_ * (n_ - 1) : n_ * (n_ - 1) / 2; }

  /// Checked access; throws NetworkError for self-loops or out-of-range actors.
  Count value(std::size_t i, std::size_t j) const;
  void set_value(std::size_t i, std::size_t j, Count k);

  /// Unchecked access for hot loops. at(i, i) is 0.
  Count at(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }

  bool is_dyad(std::size_t i, std::size_t j) const { return i < n_ && j < n_ && i != j; }
  Dyad canonical(std::size_t i, std::size_t j) const;

  /// Dyads in the fixed iteration order: row-major over ordered pairs when
  /// directed, (i < j) pairs row-major when undirected.
  const std::vector<Dyad>& dyads() const { return dyads_; }

  // Aggregates. For undirected networks "out" and "in" coincide.
  Count total() const { return total_; }
  std::size_t nonzero() const { return nonzero_; }
  double sqrt_total() const { return sqrt_total_; }
  Count out_sum(std::size_t i) const { return out_sum_[i]; }
  Count in_sum(std::size_t j) const { return in_sum_[j]; }
  double out_sqrt_sum(std::size_t i) const { return out_sqrt_[i]; }
  double in_sqrt_sum(std::size_t j) const { return in_sqrt_[j]; }

  /// Recomputes all cached aggregates from the stored values.
  void refresh_aggregates();

  friend bool operator==(const CountNetwork& a, const CountNetwork& b) {
    return a.n_ == b.n_ && a.directed_ == b.directed_ && a.values_ == b.values_;
  }

 private:
  void check_dyad(std::size_t i, std::size_t j) const;

  std::size_t n_;
  bool directed_;
  std::vector<Count> values_;
  std::vector<Dyad> dyads_;
  Count total_ = 0;
  std::size_t nonzero_ = 0;
  double sqrt_total_ = 0.0;
  std::vector<Count> out_sum_, in_sum_;
  std::vector<double> out_sqrt_, in_sqrt_;
};

/// Rows are 0-based (tail, head, value). Zero values are accepted and stored
/// as 0; duplicates (including (j, i) after (i, j) on an undirected network)
/// are an error.
CountNetwork from_weighted_edge_list(const std::vector<WeightedEdge>& rows, std::size_t n, bool directed);

/// Per-actor numeric attributes, each of length n.
class NodeAttributes {
 public:
  NodeAttributes() = default;
  explicit NodeAttributes(std::size_t n) : n_(n) {}

  std::size_t size() const { return n_; }
  void add(const std::string& name, std::vector<double> values);
  bool has(const std::string& name) const { return columns_.count(name) != 0; }
  const std::vector<double>& get(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }

 private:
  std::size_t n_ = 0;
  std::map<std::string, std::vector<double>> columns_;
  std::vector<std::string> order_;
};

struct NetworkSummary {
  double mean_value = 0.0;
  double nonzero_density = 0.0;
  double sd_value = 0.0;
  /// Square root of the pooled within-actor variance of each actor's dyad values.
  double within_actor_sd = 0.0;
};

NetworkSummary summarize(const CountNetwork& y);

// Text formats. Edge lists hold one "i j value" triple per line with 1-based
// actor indices; '#' starts a comment. Attribute files have a header line of
// names followed by one whitespace-separated row per actor.
std::vector<WeightedEdge> parse_edge_list(std::istream& in);
CountNetwork read_edge_list(const std::string& path, std::size_t n, bool directed);
void write_edge_list(std::ostream& out, const CountNetwork& y);
NodeAttributes parse_attributes(std::istream& in);
NodeAttributes read_attributes(const std::string& path);

}  // namespace countergm

#endif
