#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "recap/histories.hpp"
#include "recap/model_spec.hpp"
#include "recap/partitions.hpp"

namespace recap {

inline double expit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// Probabilities are clamped to this band when a boundary or runaway
// estimate would otherwise push the Bernoulli log-likelihood to
// -infinity; |logit| > kSeparationLogit marks the fit as separated.
inline constexpr double kProbClamp = 1e-12;
inline constexpr double kSeparationLogit = 30.0;

enum class DesignKind { Constant, Linear, Factor, TimeFactor };

// How each Bernoulli trial enters the linear predictor: a constant, a
// linear term in a quantified covariate, a categorical factor over
// partition classes, or a per-occasion factor.
class Design {
 public:
  static Design constant(int t) { return Design(DesignKind::Constant, t, {}, {}); }
  static Design linear(const Quantifier& q, int t) {
    if (q.kind() == QuantifierKind::Gaug && q.order() + t - 1 >= kMaxOccasions)
      throw std::invalid_argument("gaug order too large for t (augmented history exceeds 62 bits)");
    return Design(DesignKind::Linear, t, q.needs_t() ? q.with_t(t) : q, {});
  }
  static Design factor(const Partition& p) {
    return Design(DesignKind::Factor, p.t(), {}, p);
  }
  static Design time_factor(int t) { return Design(DesignKind::TimeFactor, t, {}, {}); }

  DesignKind kind() const { return kind_; }
  int t() const { return t_; }
  const Quantifier& quantifier() const { return *quant_; }
  const Partition& partition() const { return *part_; }

  int param_count() const {
    switch (kind_) {
      case DesignKind::Constant: return 1;
      case DesignKind::Linear: return 2;
      case DesignKind::Factor: return part_->num_classes();
      case DesignKind::TimeFactor: return t_;
    }
    return 0;
  }

 private:
  Design(DesignKind kind, int t, std::optional<Quantifier> q, std::optional<Partition> p)
      : kind_(kind), t_(t), quant_(std::move(q)), part_(std::move(p)) {
    if (t_ < 1 || t_ > kMaxOccasions) throw std::invalid_argument("design t out of range");
  }
  DesignKind kind_;
  int t_;
  std::optional<Quantifier> quant_;
  std::optional<Partition> part_;
};

// Resolves a fittable ModelSpec against the experiment length.
inline Design build_design(const ModelSpec& spec, int t) {
  switch (spec.kind) {
    case ModelSpec::Kind::M0: return Design::constant(t);
    case ModelSpec::Kind::Mt: return Design::time_factor(t);
    case ModelSpec::Kind::Mb: return Design::factor(named_partition(NamedModel::Mb, t));
    case ModelSpec::Kind::Mc:
      return Design::factor(named_partition(NamedModel::Mc, t, spec.order));
    case ModelSpec::Kind::Mcb:
      return Design::factor(named_partition(NamedModel::Mcb, t, spec.order));
    case ModelSpec::Kind::ML2: return Design::factor(named_partition(NamedModel::ML2, t));
    case ModelSpec::Kind::Mcount:
      return Design::factor(named_partition(NamedModel::Mcount, t));
    case ModelSpec::Kind::Linear: return Design::linear(*spec.quant, t);
    case ModelSpec::Kind::Cut:
      return Design::factor(cut_partition(CutRecipe{*spec.quant, spec.cuts}, t));
    case ModelSpec::Kind::CutSearch:
      throw std::invalid_argument("cutsearch specs are resolved by cut_search, not fitted directly");
  }
  throw std::logic_error("unreachable");
}

// One grouped cell: all Bernoulli trials sharing a design value. For
// linear designs the key is the exact covariate; for factor designs
// the 1-based class (occasion for time factors). `unobserved_weight`
// is the number of trials the cell gains per unit never captured, so
// the same grouping serves every candidate population size.
struct GroupedCell {
  Rational key_exact;
  double z = 0.0;
  int cls = 0;
  std::int64_t successes = 0;
  std::int64_t trials_observed = 0;
  int unobserved_weight = 0;
};

struct GroupedData {
  DesignKind kind = DesignKind::Constant;
  int d = 1;
  int t = 0;
  std::int64_t m = 0;
  std::int64_t n_total = 0;
  std::vector<GroupedCell> cells;

  std::int64_t trials(size_t c) const {
    return cells[c].trials_observed + std::int64_t(cells[c].unobserved_weight) * (n_total - m);
  }
  std::int64_t total_trials() const {
    std::int64_t s = 0;
    for (size_t c = 0; c < cells.size(); ++c) s += trials(c);
    return s;
  }
};

// Groups every Bernoulli trial x_ij, i = 1..n_total, j = 1..t (all
// zero beyond the observed M rows) by its design value. The sum of
// trials over cells is n_total * t.
inline GroupedData build_grouped(const CaptureMatrix& data, const Design& design,
                                 std::int64_t n_total) {
  if (n_total < data.m())
    throw std::invalid_argument("population size below number of observed units");
  if (design.t() != data.t()) throw std::invalid_argument("design built for a different t");

  GroupedData g;
  g.kind = design.kind();
  g.d = design.param_count();
  g.t = data.t();
  g.m = data.m();
  g.n_total = n_total;

  const int t = data.t();
  if (design.kind() == DesignKind::Linear) {
    const Quantifier& q = design.quantifier();
    std::map<Rational, GroupedCell> cells;
    for (std::int64_t i = 0; i < data.m(); ++i) {
      for (int j = 1; j <= t; ++j) {
        const Rational z = q(data.prefix(i, j));
        auto& cell = cells[z];
        cell.key_exact = z;
        cell.trials_observed += 1;
        cell.successes += data.entry(i, j) ? 1 : 0;
      }
    }
    // every zero-covariate trial of an unobserved unit
    for (int j = 1; j <= t; ++j) {
      const Rational z = q(PartialHistory::zeros(j - 1));
      auto& cell = cells[z];
      cell.key_exact = z;
      cell.unobserved_weight += 1;
    }
    g.cells.reserve(cells.size());
    for (auto& [key, cell] : cells) {
      cell.z = key.to_double();
      g.cells.push_back(cell);
    }
    return g;
  }

  const int classes = design.param_count();
  std::vector<GroupedCell> cells(static_cast<size_t>(classes));
  for (int b = 1; b <= classes; ++b) cells[static_cast<size_t>(b - 1)].cls = b;
  auto class_at = [&](const PartialHistory& h, int j) -> int {
    switch (design.kind()) {
      case DesignKind::Constant: return 1;
      case DesignKind::TimeFactor: return j;
      case DesignKind::Factor: return design.partition().class_of(h);
      case DesignKind::Linear: break;
    }
    throw std::logic_error("unreachable");
  };
  for (std::int64_t i = 0; i < data.m(); ++i) {
    for (int j = 1; j <= t; ++j) {
      auto& cell = cells[static_cast<size_t>(class_at(data.prefix(i, j), j) - 1)];
      cell.trials_observed += 1;
      cell.successes += data.entry(i, j) ? 1 : 0;
    }
  }
  for (int j = 1; j <= t; ++j) {
    auto& cell = cells[static_cast<size_t>(class_at(PartialHistory::zeros(j - 1), j) - 1)];
    cell.unobserved_weight += 1;
  }
  g.cells = std::move(cells);
  return g;
}

struct GlmFit {
  std::vector<double> coefficients;  // logit scale, length d
  double loglik = 0.0;               // Bernoulli sum, no binomial constants
  bool converged = true;
  bool separation = false;
  int iterations = 0;
  // per-class fitted probabilities for factor-like designs (NaN where
  // a class has no trials at all)
  std::vector<double> class_probs;
};

namespace detail {

inline double bernoulli_term(std::int64_t s, std::int64_t n, double p) {
  // exact limit at the boundary: 0 * log 0 = 0
  double v = 0.0;
  if (s > 0) v += double(s) * std::log(p);
  if (n - s > 0) v += double(n - s) * std::log1p(-p);
  return v;
}

inline GlmFit fit_cellwise(const GroupedData& g) {
  GlmFit fit;
  fit.class_probs.assign(static_cast<size_t>(g.d), std::numeric_limits<double>::quiet_NaN());
  fit.coefficients.assign(static_cast<size_t>(g.d), std::numeric_limits<double>::quiet_NaN());
  double ll = 0.0;
  for (size_t c = 0; c < g.cells.size(); ++c) {
    const std::int64_t n = g.trials(c);
    if (n == 0) continue;  // class empty of observations: no contribution
    const std::int64_t s = g.cells[c].successes;
    const double p = double(s) / double(n);
    const int idx = (g.kind == DesignKind::Constant) ? 0 : g.cells[c].cls - 1;
    fit.class_probs[static_cast<size_t>(idx)] = p;
    const double pc = std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
    fit.coefficients[static_cast<size_t>(idx)] = logit(pc);
    if (s == 0 || s == n) fit.separation = true;
    ll += bernoulli_term(s, n, p);
  }
  fit.loglik = ll;
  fit.converged = true;
  return fit;
}

inline double linear_loglik(const GroupedData& g, double alpha, double beta) {
  double ll = 0.0;
  for (size_t c = 0; c < g.cells.size(); ++c) {
    const std::int64_t n = g.trials(c);
    if (n == 0) continue;
    double p = expit(alpha + beta * g.cells[c].z);
    p = std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
    ll += double(g.cells[c].successes) * std::log(p) +
          double(n - g.cells[c].successes) * std::log1p(-p);
  }
  return ll;
}

inline GlmFit fit_linear_irls(const GroupedData& g) {
  // need two distinct covariate values carrying trials
  int informative = 0;
  double first_z = 0.0;
  bool have_first = false;
  std::int64_t total_s = 0, total_n = 0;
  for (size_t c = 0; c < g.cells.size(); ++c) {
    const std::int64_t n = g.trials(c);
    if (n == 0) continue;
    total_s += g.cells[c].successes;
    total_n += n;
    if (!have_first) {
      first_z = g.cells[c].z;
      have_first = true;
      informative = 1;
    } else if (g.cells[c].z != first_z) {
      informative = 2;
    }
  }
  if (total_n == 0) throw std::invalid_argument("no trials to fit");
  if (informative < 2)
    throw std::invalid_argument("degenerate linear design: covariate has a single attained value");

  GlmFit fit;
  const double pbar =
      std::min(1.0 - kProbClamp, std::max(kProbClamp, double(total_s) / double(total_n)));
  double alpha = logit(pbar);
  double beta = 0.0;
  double ll = linear_loglik(g, alpha, beta);

  constexpr int kMaxIter = 100;
  constexpr int kMaxHalvings = 20;
  fit.converged = false;
  // the stopping rule must hold on two consecutive iterations; the
  // second (essentially free) Newton step leaves the gradient at the
  // quadratic-convergence noise floor
  bool at_tolerance = false;
  for (int iter = 1; iter <= kMaxIter; ++iter) {
    fit.iterations = iter;
    // gradient and negative Hessian of the Bernoulli log-likelihood
    double g0 = 0, g1 = 0, h00 = 0, h01 = 0, h11 = 0;
    for (size_t c = 0; c < g.cells.size(); ++c) {
      const std::int64_t n = g.trials(c);
      if (n == 0) continue;
      const double z = g.cells[c].z;
      const double p = expit(alpha + beta * z);
      const double r = double(g.cells[c].successes) - double(n) * p;
      const double w = double(n) * p * (1.0 - p);
      g0 += r;
      g1 += r * z;
      h00 += w;
      h01 += w * z;
      h11 += w * z * z;
    }
    double det = h00 * h11 - h01 * h01;
    if (!(det > 0) || !std::isfinite(det)) {
      // weights collapsed (runaway logit); keep the current point
      fit.separation = true;
      break;
    }
    double da = (h11 * g0 - h01 * g1) / det;
    double db = (h00 * g1 - h01 * g0) / det;

    double step = 1.0;
    double na = alpha + da, nb = beta + db;
    double nll = linear_loglik(g, na, nb);
    int halvings = 0;
    while (nll < ll && halvings < kMaxHalvings) {
      step *= 0.5;
      na = alpha + step * da;
      nb = beta + step * db;
      nll = linear_loglik(g, na, nb);
      ++halvings;
    }
    const double max_change = std::max(std::abs(na - alpha), std::abs(nb - beta));
    const double rel_ll = std::abs(nll - ll) / (std::abs(ll) + 1.0);
    alpha = na;
    beta = nb;
    ll = nll;
    if (std::abs(alpha) > kSeparationLogit || std::abs(beta) > kSeparationLogit)
      fit.separation = true;
    if (max_change < 1e-10 || rel_ll < 1e-12) {
      if (at_tolerance) {
        fit.converged = true;
        break;
      }
      at_tolerance = true;
    } else {
      at_tolerance = false;
    }
    if (fit.separation) break;
  }
  fit.coefficients = {alpha, beta};
  fit.loglik = linear_loglik(g, alpha, beta);
  return fit;
}

}  // namespace detail

// Maximizes the weighted Bernoulli log-likelihood for the grouped
// data. Factor-like designs use the saturated closed form p_b =
// s_b/n_b; linear designs run undamped Newton (IRLS) with step-halving
// on a log-likelihood decrease. Non-convergence is reported through
// the flag, never an exception; a degenerate (collinear) design is an
// error.
inline GlmFit irls_fit(const GroupedData& g) {
  switch (g.kind) {
    case DesignKind::Constant:
    case DesignKind::Factor:
    case DesignKind::TimeFactor:
      return detail::fit_cellwise(g);
    case DesignKind::Linear:
      return detail::fit_linear_irls(g);
  }
  throw std::logic_error("unreachable");
}

// Debugging dump of the grouped cells at the current n_total.
inline void write_grouped_csv(std::ostream& os, const GroupedData& g) {
  os << "key,class,successes,trials,unobserved_weight\n";
  for (size_t c = 0; c < g.cells.size(); ++c) {
    const auto& cell = g.cells[c];
    if (g.kind == DesignKind::Linear)
      os << cell.key_exact.to_string();
    else
      os << cell.cls;
    os << ',' << cell.cls << ',' << cell.successes << ',' << g.trials(c) << ','
       << cell.unobserved_weight << '\n';
  }
}

// Bernoulli-sum log-likelihood of a fit on (possibly different)
// grouped data; identical whether the trials are grouped or not.
inline double loglik(const GlmFit& fit, const GroupedData& g) {
  if (g.kind == DesignKind::Linear)
    return detail::linear_loglik(g, fit.coefficients[0], fit.coefficients[1]);
  double ll = 0.0;
  for (size_t c = 0; c < g.cells.size(); ++c) {
    const std::int64_t n = g.trials(c);
    if (n == 0) continue;
    const int idx = (g.kind == DesignKind::Constant) ? 0 : g.cells[c].cls - 1;
    ll += detail::bernoulli_term(g.cells[c].successes, n, fit.class_probs[static_cast<size_t>(idx)]);
  }
  return ll;
}

}  // namespace recap
