#ifndef COUNTERGM_TERMS_HPP
#define COUNTERGM_TERMS_HPP

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "countergm/network.hpp"

namespace countergm {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Reference { poisson, geometric };

enum class TermKind {
  sum,                  // sum of dyad values
  nonzero,              // number of dyads with a nonzero value
  cmp,                  // sum of log(y!)
  sqrt_sum,             // sum of sqrt(y)
  dyad_covariate,       // sum of y_ij * x_ij
  actor_sum,            // sum of values on dyads incident on a set of actors
  mutual_min,           // directed only: sum_{i<j} min(y_ij, y_ji)
  mutual_neg_abs_diff,  // directed only: sum_{i<j} -|y_ij - y_ji|
  mutual_geomean,       // directed only: sum_{i<j} sqrt(y_ij * y_ji)
  mutual_product,       // directed only: sum_{i<j} y_ij * y_ji; coefficient must be <= 0
  actor_covariance,     // pooled within-actor covariance of sqrt(y)
  transitive_minmax,    // sum_ij min(y_ij, max_k min(y_ik, y_kj))
  transitive_general,   // sum_ij affect(y_ij, combine_k two_path(y_ik, y_kj))
};

/// How a dyadic covariate is derived from a node attribute m.
enum class CovariateTransform { neg_absdiff, absdiff, match, product, sum };
enum class ActorDirection { out, in, undirected };
enum class TwoPathValue { min, geomean };
enum class Combine { max, sum };
enum class Affect { min, geomean };

struct TermSpec {
  TermKind kind = TermKind::sum;
  std::string label;  // empty means default_label()

  // dyad_covariate: an explicit n*n row-major matrix, or an attribute + transform.
  std::string attribute;
  CovariateTransform transform = CovariateTransform::neg_absdiff;
  std::vector<double> matrix;

  // actor_sum: 0-based actors; when empty, `attribute` names an indicator column.
  std::vector<std::size_t> actors;

  // actor_covariance
  ActorDirection direction = ActorDirection::out;
  bool centered = true;

  // transitive_general
  TwoPathValue two_path = TwoPathValue::min;
  Combine combine = Combine::max;
  Affect affect = Affect::min;

  std::string default_label() const;
  std::string display_label() const { return label.empty() ? default_label() : label; }

  static TermSpec of(TermKind kind);
  static TermSpec covariate(std::string attribute, CovariateTransform transform);
  static TermSpec covariate_matrix(std::vector<double> matrix, std::string label);
  static TermSpec actor_intensity(std::vector<std::size_t> actors, std::string label = {});
  static TermSpec within_actor_covariance(ActorDirection direction, bool centered = true);
  static TermSpec transitive(TwoPathValue two_path, Combine combine, Affect affect);
};

/// True if the two specs define the same statistic (labels ignored).
bool same_statistic(const TermSpec& a, const TermSpec& b);

struct ModelSpec {
  std::vector<TermSpec> terms;
  Reference reference = Reference::poisson;

  std::size_t dimension() const { return terms.size(); }
  std::vector<std::string> labels() const;
};

struct StatVector {
  std::vector<std::string> labels;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t k) const { return values[k]; }
};

/// theta[term] <= bound (or < bound when strict).
struct ParamConstraint {
  std::size_t term = 0;
  std::string label;
  double bound = 0.0;
  bool strict = false;
  std::string reason;
};

/// One model statistic bound to a network shape and its covariates.
class Term {
 public:
  virtual ~Term() = default;
  virtual double evaluate(const CountNetwork& y) const = 0;
  /// g(y with d = to) - g(y with d = from); the stored value of d is ignored.
  virtual double change(const CountNetwork& y, Dyad d, Count from, Count to) const = 0;
  virtual bool dyad_independent() const { return false; }
};

/// A ModelSpec compiled against node attributes for networks of a given shape.
class Model {
 public:
  Model(ModelSpec spec, const NodeAttributes& attrs, std::size_t n, bool directed);

  const ModelSpec& spec() const { return spec_; }
  Reference reference() const { return spec_.reference; }
  std::size_t dimension() const { return terms_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t network_size() const { return n_; }
  bool directed() const { return directed_; }
  bool dyad_independent() const;

  void evaluate(const CountNetwork& y, std::span<double> out) const;
  void change(const CountNetwork& y, Dyad d, Count from, Count to, std::span<double> out) const;

 private:
  void check_shape(const CountNetwork& y) const;

  ModelSpec spec_;
  std::vector<std::shared_ptr<const Term>> terms_;
  std::vector<std::string> labels_;
  std::size_t n_;
  bool directed_;
};

/// log(k!), summed exactly for k <= 20 and via lgamma above.
double log_factorial(Count k);

/// log(h(to) / h(from)) for a single dyad under the given reference measure.
double log_reference_ratio(Reference reference, Count from, Count to);

StatVector eval_stats(const Model& model, const CountNetwork& y);

/// Discrete change statistic for dyad (i, j) going from k1 to k2. The network
/// is not modified.
StatVector discrete_change(const Model& model, const CountNetwork& y, std::size_t i, std::size_t j, Count k1,
                           Count k2);

/// log[ P(Y_ij = k2 | rest) / P(Y_ij = k1 | rest) ].
double conditional_logratio(const Model& model, std::span<const double> theta, const CountNetwork& y, std::size_t i,
                            std::size_t j, Count k1, Count k2);

std::vector<ParamConstraint> theta_constraints(const ModelSpec& spec);

/// Empty when theta is admissible, otherwise a message naming the violated constraint.
std::string check_constraints(const ModelSpec& spec, std::span<const double> theta);

/// Clamps theta into the constraint box with an interior margin; returns true
/// if any coordinate was moved.
bool project_to_constraints(const ModelSpec& spec, std::span<double> theta, double margin = 1e-6);

const char* to_string(TermKind kind);
const char* to_string(Reference reference);

}  // namespace countergm

#endif
