#include "countergm/terms.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace countergm {

namespace {

const std::array<double, 21>& small_log_factorials() {
  static const std::array<double, 21> table = [] {
    std::array<double, 21> t{};
    double acc = 0.0;
    t[0] = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k) {
      acc += std::log(static_cast<double>(k));
      t[k] = acc;
    }
    return t;
  }();
  return table;
}

double sqrt_count(Count k) { return std::sqrt(static_cast<double>(k)); }

/// Reads the network with one dyad's value overridden.
struct FocusView {
  const CountNetwork& y;
  Dyad d;
  Count v;

  Count operator()(std::size_t i, std::size_t j) const {
    if (i == d.tail && j == d.head) return v;
    if (!y.directed() && i == d.head && j == d.tail) return v;
    return y.at(i, j);
  }
};

// ---------------------------------------------------------------------------
// Dyad-independent terms

class SumTerm final : public Term {
 public:
  double evaluate(const CountNetwork& y) const override {
    double s = 0.0;
    for (const Dyad& d : y.dyads()) s += static_cast<double>(y.at(d.tail, d.head));
    return s;
  }
  double change(const CountNetwork&, Dyad, Count from, Count to) const override {
    return static_cast<double>(to) - static_cast<double>(from);
  }
  bool dyad_independent() const override { return true; }
};

class NonzeroTerm final : public Term {
 public:
  double evaluate(const CountNetwork& y) const override {
    double s = 0.0;
    for (const Dyad& d : y.dyads()) s += y.at(d.tail, d.head) != 0 ? 1.0 : 0.0;
    return s;
  }
  double change(const CountNetwork&, Dyad, Count from, Count to) const override {
    return (to != 0 ? 1.0 : 0.0) - (from != 0 ? 1.0 : 0.0);
  }
  bool dyad_independent() const override { return true; }
};

class CmpTerm final : public Term {
 public:
  double evaluate(const CountNetwork& y) const override {
    double s = 0.0;
    for (const Dyad& d : y.dyads()) s += log_factorial(y.at(d.tail, d.head));
    return s;
  }
  double change(const CountNetwork&, Dyad, Count from, Count to) const override {
    if (from == to) return 0.0;
    // Sum of log(k) over (min, max] keeps small changes exact.
    const Count lo = std::min(from, to), hi = std::max(from, to);
    double s = 0.0;
    if (hi <= 20) {
      for (Count k = lo + 1; k <= hi; ++k) s += std::log(static_cast<double>(k));
    } else {
      s = log_factorial(hi) - log_factorial(lo);
    }
    return to > from ? s : -s;
  }
  bool dyad_independent() const override { return true; }
};

class SqrtSumTerm final : public Term {
 public:
  double evaluate(const CountNetwork& y) const override {
    double s = 0.0;
    for (const Dyad& d : y.dyads()) s += sqrt_count(y.at(d.tail, d.head));
    return s;
  }
  double change(const CountNetwork&, Dyad, Count from, Count to) const override {
    return sqrt_count(to) - sqrt_count(from);
  }
  bool dyad_independent() const override { return true; }
};

/// sum_ij y_ij x_ij; also backs actor-incident sums with an indicator x.
class CovariateTerm final : public Term {
 public:
  CovariateTerm(std::vector<double> x, std::size_t n) : x_(std::move(x)), n_(n) {}

  double evaluate(const CountNetwork& y) const override {
    double s = 0.0;
    for (const Dyad& d : y.dyads()) s += static_cast<double>(y.at(d.tail, d.head)) * x_[d.tail * n_ + d.head];
    return s;
  }
  double change(const CountNetwork&, Dyad d, Count from, Count to) const override {
    return (static_cast<double>(to) - static_cast<double>(from)) * x_[d.tail * n_ + d.head];
  }
  bool dyad_independent() const override { return true; }

 private:
  std::vector<double> x_;
  std::size_t n_;
};

// ---------------------------------------------------------------------------
// Mutuality

enum class MutualForm { min, neg_abs_diff, geomean, product };

class MutualTerm final : public Term {
 public:
  explicit MutualTerm(MutualForm form) : form_(form) {}

  double evaluate(const CountNetwork& y) const override {
    double s = 0.0;
    const std::size_t n = y.size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += pair(y.at(i, j), y.at(j, i));
    return s;
  }
  double change(const CountNetwork& y, Dyad d, Count from, Count to) const override {
    const Count back = y.at(d.head, d.tail);
    return pair(to, back) - pair(from, back);
  }

 private:
  double pair(Count a, Count b) const {
    switch (form_) {
      case MutualForm::min:
        return static_cast<double>(std::min(a, b));
      case MutualForm::neg_abs_diff:
        return -static_cast<double>(a > b ? a - b : b - a);
      case MutualForm::geomean:
        return std::sqrt(static_cast<double>(a) * static_cast<double>(b));
      case MutualForm::product:
        return static_cast<double>(a) * static_cast<double>(b);
    }
    return 0.0;
  }

  MutualForm form_;
};

// ---------------------------------------------------------------------------
// Within-actor covariance of sqrt(y)
//
// For an ego e with neighbour set of size d, row sqrt-sum S_e and row sum Q_e
// (= sum of squared sqrt values), the pairwise sum over j < k of
// (s_ej - m)(s_ek - m) equals ((S_e - d m)^2 - (Q_e - 2 m S_e + d m^2)) / 2,
// which lets the change statistic be computed from actor aggregates.

class ActorCovarianceTerm final : public Term {
 public:
  ActorCovarianceTerm(ActorDirection direction, bool centered) : direction_(direction), centered_(centered) {}

  double evaluate(const CountNetwork& y) const override { return evaluate_direct(y); }

  double change(const CountNetwork& y, Dyad d, Count from, Count to) const override {
    const std::size_t n = y.size();
    const double nd = static_cast<double>(n);
    const double deg = nd - 1.0;  // neighbours per ego
    const Count current = y.at(d.tail, d.head);
    const double s_cur = sqrt_count(current), s_from = sqrt_count(from), s_to = sqrt_count(to);
    const double delta = s_to - s_from;
    const double dy = static_cast<double>(to) - static_cast<double>(from);

    // Sqrt-sums of touched egos with the focus dyad at `from`.
    double touched_sq_change = 0.0;
    double k = 1.0;  // number of egos whose rows contain the focus dyad
    auto touch = [&](double row_sqrt_sum) {
      const double before = row_sqrt_sum - s_cur + s_from;
      touched_sq_change += delta * (2.0 * before + delta);
    };
    if (direction_ == ActorDirection::out) {
      touch(y.out_sqrt_sum(d.tail));
    } else if (direction_ == ActorDirection::in) {
      touch(y.in_sqrt_sum(d.head));
    } else {
      touch(y.out_sqrt_sum(d.tail));
      touch(y.out_sqrt_sum(d.head));
      k = 2.0;
    }

    double result = touched_sq_change - k * dy;
    if (centered_) {
      const double ndyads = static_cast<double>(y.dyad_count());
      const double total_before = y.sqrt_total() - s_cur + s_from;
      const double m_before = total_before / ndyads;
      const double m_after = (total_before + delta) / ndyads;
      const double sum_s_after = k * (total_before + delta);
      // Change of (1 - d) * 2 m sum_S and of n d (d - 1) m^2, written as differences.
      const double d_m_sum = (delta / ndyads) * sum_s_after + m_before * k * delta;
      result += 2.0 * (1.0 - deg) * d_m_sum;
      result += nd * deg * (deg - 1.0) * (delta / ndyads) * (m_after + m_before);
    }
    return 0.5 * result / (nd - 2.0);
  }

 private:
  double evaluate_direct(const CountNetwork& y) const {
    const std::size_t n = y.size();
    double m = 0.0;
    if (centered_) {
      for (const Dyad& d : y.dyads()) m += sqrt_count(y.at(d.tail, d.head));
      m /= static_cast<double>(y.dyad_count());
    }
    double total = 0.0;
    for (std::size_t e = 0; e < n; ++e) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == e) continue;
        const double cj = value(y, e, j) - m;
        for (std::size_t k = j + 1; k < n; ++k) {
          if (k == e) continue;
          s += cj * (value(y, e, k) - m);
        }
      }
      total += s;
    }
    return total / static_cast<double>(n - 2);
  }

  double value(const CountNetwork& y, std::size_t ego, std::size_t alter) const {
    return direction_ == ActorDirection::in ? sqrt_count(y.at(alter, ego)) : sqrt_count(y.at(ego, alter));
  }

  ActorDirection direction_;
  bool centered_;
};

// ---------------------------------------------------------------------------
// Transitive ties: sum_ij affect(y_ij, combine_{k != i,j} two_path(y_ik, y_kj))

class TransitiveTerm final : public Term {
 public:
  TransitiveTerm(TwoPathValue two_path, Combine combine, Affect affect)
      : two_path_(two_path), combine_(combine), affect_(affect) {}

  double evaluate(const CountNetwork& y) const override {
    double s = 0.0;
    const std::size_t n = y.size();
    for (const Dyad& d : y.dyads()) {
      const Count v = y.at(d.tail, d.head);
      if (v == 0) continue;
      double c = initial();
      for (std::size_t k = 0; k < n; ++k) {
        if (k == d.tail || k == d.head) continue;
        c = fold(c, path(y.at(d.tail, k), y.at(k, d.head)));
      }
      s += effect(v, c);
    }
    return s;
  }

  double change(const CountNetwork& y, Dyad d, Count from, Count to) const override {
    if (from == to) return 0.0;
    const std::size_t n = y.size();
    const std::size_t a = d.tail, b = d.head;
    FocusView before{y, d, from};

    // The focus dyad's own summand; its two-paths avoid the focus dyad.
    double c_own = initial();
    for (std::size_t k = 0; k < n; ++k) {
      if (k == a || k == b) continue;
      c_own = fold(c_own, path(y.at(a, k), y.at(k, b)));
    }
    double result = effect(to, c_own) - effect(from, c_own);

    // Summand for dyad (i, j) whose two-path through the focus has the given
    // old/new values; all its other two-paths are read with the focus at `from`.
    auto affected = [&](std::size_t i, std::size_t j, std::size_t via, double old_path, double new_path) {
      const Count v = before(i, j);
      if (v == 0 || old_path == new_path) return;
      double c = initial();
      for (std::size_t k = 0; k < n; ++k) {
        if (k == i || k == j || k == via) continue;
        c = fold(c, path(before(i, k), before(k, j)));
      }
      result += effect(v, fold(c, new_path)) - effect(v, fold(c, old_path));
    };

    if (y.directed()) {
      // a -> b -> j: the focus is the first leg of two-paths for (a, j).
      for (std::size_t j = 0; j < n; ++j) {
        if (j == a || j == b) continue;
        const Count leg = y.at(b, j);
        affected(a, j, b, path(from, leg), path(to, leg));
      }
      // i -> a -> b: the focus is the second leg of two-paths for (i, b).
      for (std::size_t i = 0; i < n; ++i) {
        if (i == a || i == b) continue;
        const Count leg = y.at(i, a);
        affected(i, b, a, path(leg, from), path(leg, to));
      }
    } else {
      // a - b - k is a two-path for {a, k}; b - a - k for {b, k}.
      for (std::size_t k = 0; k < n; ++k) {
        if (k == a || k == b) continue;
        const Count leg_b = y.at(b, k);
        affected(a, k, b, path(from, leg_b), path(to, leg_b));
        const Count leg_a = y.at(a, k);
        affected(b, k, a, path(from, leg_a), path(to, leg_a));
      }
    }
    return result;
  }

 private:
  double path(Count x1, Count x2) const {
    if (two_path_ == TwoPathValue::min) return static_cast<double>(std::min(x1, x2));
    return std::sqrt(static_cast<double>(x1) * static_cast<double>(x2));
  }
  double initial() const { return 0.0; }
  double fold(double acc, double v) const { return combine_ == Combine::max ? std::max(acc, v) : acc + v; }
  double effect(Count v, double pressure) const {
    if (affect_ == Affect::min) return std::min(static_cast<double>(v), pressure);
    return std::sqrt(static_cast<double>(v) * pressure);
  }

  TwoPathValue two_path_;
  Combine combine_;
  Affect affect_;
};

std::vector<double> covariate_matrix(const TermSpec& t, const NodeAttributes& attrs, std::size_t n) {
  if (!t.matrix.empty()) {
    if (t.matrix.size() != n * n)
      throw ModelError("covariate matrix for '" + t.display_label() + "' has " + std::to_string(t.matrix.size()) +
                       " entries, expected " + std::to_string(n * n));
    return t.matrix;
  }
  if (t.attribute.empty()) throw ModelError("dyad_covariate term needs an attribute or a matrix");
  if (!attrs.has(t.attribute)) throw ModelError("dyad_covariate: unknown attribute '" + t.attribute + "'");
  const auto& m = attrs.get(t.attribute);
  if (m.size() != n)
    throw ModelError("dyad_covariate: attribute '" + t.attribute + "' has " + std::to_string(m.size()) +
                     " values for " + std::to_string(n) + " actors");
  std::vector<double> x(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double v = 0.0;
      switch (t.transform) {
        case CovariateTransform::neg_absdiff: v = -std::abs(m[i] - m[j]); break;
        case CovariateTransform::absdiff: v = std::abs(m[i] - m[j]); break;
        case CovariateTransform::match: v = m[i] == m[j] ? 1.0 : 0.0; break;
        case CovariateTransform::product: v = m[i] * m[j]; break;
        case CovariateTransform::sum: v = m[i] + m[j]; break;
      }
      x[i * n + j] = v;
    }
  return x;
}

std::vector<double> incidence_matrix(const TermSpec& t, const NodeAttributes& attrs, std::size_t n) {
  std::vector<bool> member(n, false);
  if (!t.actors.empty()) {
    for (auto a : t.actors) {
      if (a >= n) throw ModelError("actor_sum: actor " + std::to_string(a + 1) + " out of range");
      member[a] = true;
    }
  } else {
    if (t.attribute.empty()) throw ModelError("actor_sum term needs actors or an indicator attribute");
    if (!attrs.has(t.attribute)) throw ModelError("actor_sum: unknown attribute '" + t.attribute + "'");
    const auto& m = attrs.get(t.attribute);
    if (m.size() != n) throw ModelError("actor_sum: attribute '" + t.attribute + "' has wrong length");
    for (std::size_t i = 0; i < n; ++i) member[i] = m[i] != 0.0;
  }
  std::vector<double> x(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && (member[i] || member[j])) x[i * n + j] = 1.0;
  return x;
}

bool is_mutual(TermKind k) {
  return k == TermKind::mutual_min || k == TermKind::mutual_neg_abs_diff || k == TermKind::mutual_geomean ||
         k == TermKind::mutual_product;
}

std::shared_ptr<const Term> compile(const TermSpec& t, const NodeAttributes& attrs, std::size_t n, bool directed) {
  if (is_mutual(t.kind) && !directed)
    throw ModelError("mutuality term '" + t.display_label() + "' requires a directed network");
  switch (t.kind) {
    case TermKind::sum: return std::make_shared<SumTerm>();
    case TermKind::nonzero: return std::make_shared<NonzeroTerm>();
    case TermKind::cmp: return std::make_shared<CmpTerm>();
    case TermKind::sqrt_sum: return std::make_shared<SqrtSumTerm>();
    case TermKind::dyad_covariate: return std::make_shared<CovariateTerm>(covariate_matrix(t, attrs, n), n);
    case TermKind::actor_sum: return std::make_shared<CovariateTerm>(incidence_matrix(t, attrs, n), n);
    case TermKind::mutual_min: return std::make_shared<MutualTerm>(MutualForm::min);
    case TermKind::mutual_neg_abs_diff: return std::make_shared<MutualTerm>(MutualForm::neg_abs_diff);
    case TermKind::mutual_geomean: return std::make_shared<MutualTerm>(MutualForm::geomean);
    case TermKind::mutual_product: return std::make_shared<MutualTerm>(MutualForm::product);
    case TermKind::actor_covariance:
      if (directed == (t.direction == ActorDirection::undirected))
        throw ModelError("actor_covariance: direction '" +
                         std::string(t.direction == ActorDirection::undirected ? "undirected" : "out/in") +
                         "' does not match a " + (directed ? "directed" : "undirected") + " network");
      if (n < 3) throw ModelError("actor_covariance needs at least 3 actors");
      return std::make_shared<ActorCovarianceTerm>(t.direction, t.centered);
    case TermKind::transitive_minmax:
      return std::make_shared<TransitiveTerm>(TwoPathValue::min, Combine::max, Affect::min);
    case TermKind::transitive_general: return std::make_shared<TransitiveTerm>(t.two_path, t.combine, t.affect);
  }
  throw ModelError("unknown term kind");
}

}  // namespace

// ---------------------------------------------------------------------------

const char* to_string(TermKind kind) {
  switch (kind) {
    case TermKind::sum: return "sum";
    case TermKind::nonzero: return "nonzero";
    case TermKind::cmp: return "cmp";
    case TermKind::sqrt_sum: return "sqrt_sum";
    case TermKind::dyad_covariate: return "dyad_covariate";
    case TermKind::actor_sum: return "actor_sum";
    case TermKind::mutual_min: return "mutual_min";
    case TermKind::mutual_neg_abs_diff: return "mutual_neg_abs_diff";
    case TermKind::mutual_geomean: return "mutual_geomean";
    case TermKind::mutual_product: return "mutual_product";
    case TermKind::actor_covariance: return "actor_covariance";
    case TermKind::transitive_minmax: return "transitive_minmax";
    case TermKind::transitive_general: return "transitive_general";
  }
  return "?";
}

const char* to_string(Reference reference) { return reference == Reference::poisson ? "poisson" : "geometric"; }

std::string TermSpec::default_label() const {
  std::ostringstream os;
  switch (kind) {
    case TermKind::dyad_covariate:
      if (!matrix.empty()) return "dyadcov";
      os << "dyadcov." << attribute;
      return os.str();
    case TermKind::actor_sum:
      if (actors.empty()) return "actor_sum." + attribute;
      os << "actor_sum";
      for (auto a : actors) os << '.' << a + 1;
      return os.str();
    case TermKind::actor_covariance:
      os << (centered ? "actor_cov." : "actor_cov_uncentered.")
         << (direction == ActorDirection::out ? "out" : direction == ActorDirection::in ? "in" : "undirected");
      return os.str();
    case TermKind::transitive_general:
      os << "transitive." << (two_path == TwoPathValue::min ? "min" : "geomean") << '.'
         << (combine == Combine::max ? "max" : "sum") << '.' << (affect == Affect::min ? "min" : "geomean");
      return os.str();
    default: return to_string(kind);
  }
}

TermSpec TermSpec::of(TermKind kind) {
  TermSpec t;
  t.kind = kind;
  return t;
}

TermSpec TermSpec::covariate(std::string attribute, CovariateTransform transform) {
  TermSpec t = of(TermKind::dyad_covariate);
  t.attribute = std::move(attribute);
  t.transform = transform;
  return t;
}

TermSpec TermSpec::covariate_matrix(std::vector<double> matrix, std::string label) {
  TermSpec t = of(TermKind::dyad_covariate);
  t.matrix = std::move(matrix);
  t.label = std::move(label);
  return t;
}

TermSpec TermSpec::actor_intensity(std::vector<std::size_t> actors, std::string label) {
  TermSpec t = of(TermKind::actor_sum);
  t.actors = std::move(actors);
  t.label = std::move(label);
  return t;
}

TermSpec TermSpec::within_actor_covariance(ActorDirection direction, bool centered) {
  TermSpec t = of(TermKind::actor_covariance);
  t.direction = direction;
  t.centered = centered;
  return t;
}

TermSpec TermSpec::transitive(TwoPathValue two_path, Combine combine, Affect affect) {
  TermSpec t = of(TermKind::transitive_general);
  t.two_path = two_path;
  t.combine = combine;
  t.affect = affect;
  return t;
}

bool same_statistic(const TermSpec& a, const TermSpec& b) {
  auto normalized = [](const TermSpec& t) {
    TermSpec u = t;
    u.label.clear();
    if (u.kind == TermKind::transitive_minmax) {
      u.kind = TermKind::transitive_general;
      u.two_path = TwoPathValue::min;
      u.combine = Combine::max;
      u.affect = Affect::min;
    }
    return u;
  };
  const TermSpec x = normalized(a), y = normalized(b);
  if (x.kind != y.kind) return false;
  switch (x.kind) {
    case TermKind::dyad_covariate:
      return x.matrix == y.matrix && (x.matrix.empty() ? x.attribute == y.attribute && x.transform == y.transform
                                                       : true);
    case TermKind::actor_sum: return x.actors == y.actors && x.attribute == y.attribute;
    case TermKind::actor_covariance: return x.direction == y.direction && x.centered == y.centered;
    case TermKind::transitive_general:
      return x.two_path == y.two_path && x.combine == y.combine && x.affect == y.affect;
    default: return true;
  }
}

std::vector<std::string> ModelSpec::labels() const {
  std::vector<std::string> out;
  out.reserve(terms.size());
  for (const auto& t : terms) out.push_back(t.display_label());
  return out;
}

// ---------------------------------------------------------------------------

Model::Model(ModelSpec spec, const NodeAttributes& attrs, std::size_t n, bool directed)
    : spec_(std::move(spec)), n_(n), directed_(directed) {
  if (spec_.terms.empty()) throw ModelError("model has no terms");
  for (const auto& t : spec_.terms) {
    terms_.push_back(compile(t, attrs, n, directed));
    labels_.push_back(t.display_label());
  }
}

bool Model::dyad_independent() const {
  return std::all_of(terms_.begin(), terms_.end(), [](const auto& t) { return t->dyad_independent(); });
}

void Model::check_shape(const CountNetwork& y) const {
  if (y.size() != n_ || y.directed() != directed_)
    throw ModelError("network shape (n=" + std::to_string(y.size()) + (y.directed() ? ", directed" : ", undirected") +
                     ") does not match the model (n=" + std::to_string(n_) +
                     (directed_ ? ", directed)" : ", undirected)"));
}

void Model::evaluate(const CountNetwork& y, std::span<double> out) const {
  check_shape(y);
  for (std::size_t k = 0; k < terms_.size(); ++k) out[k] = terms_[k]->evaluate(y);
}

void Model::change(const CountNetwork& y, Dyad d, Count from, Count to, std::span<double> out) const {
  for (std::size_t k = 0; k < terms_.size(); ++k) out[k] = terms_[k]->change(y, d, from, to);
}

double log_factorial(Count k) {
  if (k <= 20) return small_log_factorials()[k];
  return std::lgamma(static_cast<double>(k) + 1.0);
}

double log_reference_ratio(Reference reference, Count from, Count to) {
  if (reference == Reference::geometric || from == to) return 0.0;
  return log_factorial(from) - log_factorial(to);
}

StatVector eval_stats(const Model& model, const CountNetwork& y) {
  StatVector s{model.labels(), std::vector<double>(model.dimension())};
  model.evaluate(y, s.values);
  return s;
}

StatVector discrete_change(const Model& model, const CountNetwork& y, std::size_t i, std::size_t j, Count k1,
                           Count k2) {
  if (!y.is_dyad(i, j))
    throw NetworkError("(" + std::to_string(i) + ", " + std::to_string(j) + ") is not a dyad of the network");
  if (y.size() != model.network_size() || y.directed() != model.directed())
    throw ModelError("network shape does not match the model");
  StatVector s{model.labels(), std::vector<double>(model.dimension())};
  model.change(y, y.canonical(i, j), k1, k2, s.values);
  return s;
}

double conditional_logratio(const Model& model, std::span<const double> theta, const CountNetwork& y, std::size_t i,
                            std::size_t j, Count k1, Count k2) {
  if (theta.size() != model.dimension()) throw ModelError("theta has the wrong dimension");
  const StatVector delta = discrete_change(model, y, i, j, k1, k2);
  double r = log_reference_ratio(model.reference(), k1, k2);
  for (std::size_t k = 0; k < theta.size(); ++k) r += theta[k] * delta.values[k];
  return r;
}

std::vector<ParamConstraint> theta_constraints(const ModelSpec& spec) {
  std::vector<ParamConstraint> out;
  bool has_cmp = false;
  for (std::size_t k = 0; k < spec.terms.size(); ++k) {
    const auto& t = spec.terms[k];
    if (t.kind == TermKind::cmp) {
      has_cmp = true;
      // log(y!) enters with total coefficient theta - 1 (Poisson) or theta (geometric).
      const double bound = spec.reference == Reference::poisson ? 1.0 : 0.0;
      out.push_back({k, t.display_label(), bound, false, "CMP coefficient beyond the geometric boundary diverges"});
    } else if (t.kind == TermKind::mutual_product) {
      out.push_back({k, t.display_label(), 0.0, false, "positive product mutuality is not normalizable"});
    }
  }
  if (spec.reference == Reference::geometric && !has_cmp) {
    for (std::size_t k = 0; k < spec.terms.size(); ++k)
      if (spec.terms[k].kind == TermKind::sum) {
        out.push_back({k, spec.terms[k].display_label(), 0.0, true,
                       "geometric reference requires a negative dyad-sum coefficient"});
        break;
      }
  }
  return out;
}

std::string check_constraints(const ModelSpec& spec, std::span<const double> theta) {
  if (theta.size() != spec.dimension()) return "theta has the wrong dimension";
  for (const auto& c : theta_constraints(spec)) {
    const double v = theta[c.term];
    if (!std::isfinite(v) || v > c.bound || (c.strict && v >= c.bound)) {
      std::ostringstream os;
      os << "coefficient on '" << c.label << "' = " << v << " violates " << (c.strict ? "< " : "<= ") << c.bound
         << " (" << c.reason << ")";
      return os.str();
    }
  }
  for (double v : theta)
    if (!std::isfinite(v)) return "theta contains a non-finite value";
  return {};
}

bool project_to_constraints(const ModelSpec& spec, std::span<double> theta, double margin) {
  bool moved = false;
  for (const auto& c : theta_constraints(spec)) {
    const double limit = c.bound - margin;
    if (theta[c.term] > limit) {
      theta[c.term] = limit;
      moved = true;
    }
  }
  return moved;
}

}  // namespace countergm
