#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "recap/likelihood.hpp"
#include "recap/model_spec.hpp"

namespace recap {

struct RankingRow {
  ModelSpec spec;
  std::optional<FitResult> fit;
  std::string error;
};

// Candidate fits sorted by ascending AIC; ties go to fewer parameters,
// then label order. Failed likelihoods keep their edge-of-grid AIC and
// stay in the ranking flagged; hard errors sort last.
struct RankingReport {
  std::vector<RankingRow> rows;
};

enum class CutSearchStrategy { Auto, Full, Reduced, Greedy };

struct CutSearchResult {
  std::vector<Rational> cuts;  // canonical interior representatives
  FitResult fit;
};

CutSearchResult cut_search(const CaptureMatrix& data, const Quantifier& q, int n_cuts,
                           CutSearchStrategy strategy = CutSearchStrategy::Auto,
                           const FitOptions& opts = {});

inline RankingReport rank_models(const CaptureMatrix& data,
                                 const std::vector<ModelSpec>& candidates,
                                 const FitOptions& opts = {}) {
  if (candidates.empty()) throw std::invalid_argument("empty candidate list");
  RankingReport report;
  for (const auto& spec : candidates) {
    RankingRow row;
    row.spec = spec;
    try {
      if (spec.kind == ModelSpec::Kind::CutSearch) {
        auto res = cut_search(data, *spec.quant, spec.order, CutSearchStrategy::Auto, opts);
        row.fit = std::move(res.fit);
      } else {
        row.fit = fit_model(data, spec, opts);
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    report.rows.push_back(std::move(row));
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const RankingRow& a, const RankingRow& b) {
                     const bool ea = !a.error.empty(), eb = !b.error.empty();
                     if (ea != eb) return eb;
                     if (ea && eb) return a.spec.label() < b.spec.label();
                     if (a.fit->aic != b.fit->aic) return a.fit->aic < b.fit->aic;
                     if (a.fit->params != b.fit->params) return a.fit->params < b.fit->params;
                     return a.fit->model < b.fit->model;
                   });
  return report;
}

namespace detail {

// Distinct quantifier values attained by the observed conditioning
// histories, ascending. Always starts at 0 (the empty history).
inline std::vector<Rational> attained_values(const CaptureMatrix& data, const Quantifier& q) {
  std::set<Rational> vals;
  for (std::int64_t i = 0; i < data.m(); ++i)
    for (int j = 1; j <= data.t(); ++j) vals.insert(q(data.prefix(i, j)));
  return std::vector<Rational>(vals.begin(), vals.end());
}

// Canonical cut for the gap between consecutive attained values: the
// simplest rational inducing the same split. The zeros-only gap below
// the smallest positive value uses 1/2^t for the dyadic quantifiers
// (the classical Mb boundary); other quantifiers take the simplest
// rational strictly inside the gap.
inline Rational canonical_cut(const std::vector<Rational>& vals, size_t gap,
                              const Quantifier& q, int t) {
  const Rational& lo = vals[gap];
  const Rational& hi = vals[gap + 1];
  if (gap == 0 && lo.is_zero()) {
    if ((q.kind() == QuantifierKind::G || q.kind() == QuantifierKind::Gaug) && t <= 62)
      return Rational(1, std::int64_t{1} << t);
    return simplest_in_open(lo, hi);
  }
  return simplest_in_left_closed(lo, hi);
}

inline bool lex_less(const std::vector<Rational>& a, const std::vector<Rational>& b) {
  for (size_t i = 0; i < a.size() && i < b.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (b[i] < a[i]) return false;
  }
  return a.size() < b.size();
}

class CutScorer {
 public:
  CutScorer(const CaptureMatrix& data, const Quantifier& q, const FitOptions& opts,
            std::vector<Rational> reps)
      : data_(data), q_(q), reps_(std::move(reps)) {
    opts_ = opts;
    opts_.compute_ci = false;
  }

  double aic(const std::vector<size_t>& gaps) {
    return fit_model(data_, spec_for(gaps), opts_).aic;
  }

  ModelSpec spec_for(const std::vector<size_t>& gaps) const {
    std::vector<Rational> cuts;
    cuts.reserve(gaps.size());
    for (size_t gidx : gaps) cuts.push_back(reps_[gidx]);
    return ModelSpec::cut(q_, std::move(cuts));
  }

  std::vector<Rational> cuts_for(const std::vector<size_t>& gaps) const {
    std::vector<Rational> cuts;
    for (size_t gidx : gaps) cuts.push_back(reps_[gidx]);
    return cuts;
  }

  size_t gap_count() const { return reps_.size(); }

 private:
  const CaptureMatrix& data_;
  Quantifier q_;
  FitOptions opts_;
  std::vector<Rational> reps_;
};

struct SearchBest {
  double aic = std::numeric_limits<double>::infinity();
  std::vector<size_t> gaps;
  bool set = false;
};

inline void consider(SearchBest& best, CutScorer& scorer, const std::vector<size_t>& gaps) {
  const double a = scorer.aic(gaps);
  if (!best.set || a < best.aic ||
      (a == best.aic && lex_less(scorer.cuts_for(gaps), scorer.cuts_for(best.gaps)))) {
    best.aic = a;
    best.gaps = gaps;
    best.set = true;
  }
}

inline void exhaustive(SearchBest& best, CutScorer& scorer, const std::vector<size_t>& pool,
                       int n_cuts) {
  std::vector<size_t> pick(static_cast<size_t>(n_cuts));
  const size_t c = pool.size();
  std::function<void(size_t, int)> rec = [&](size_t start, int depth) {
    if (depth == n_cuts) {
      consider(best, scorer, pick);
      return;
    }
    for (size_t i = start; i + (n_cuts - depth - 1) < c; ++i) {
      pick[static_cast<size_t>(depth)] = pool[i];
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
}

inline std::vector<size_t> search_gaps(CutScorer& scorer, int n_cuts,
                                       CutSearchStrategy strategy) {
  if (strategy == CutSearchStrategy::Auto)
    strategy = n_cuts <= 2 ? CutSearchStrategy::Full : CutSearchStrategy::Greedy;

  std::vector<size_t> all(scorer.gap_count());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;

  SearchBest best;
  switch (strategy) {
    case CutSearchStrategy::Full:
      exhaustive(best, scorer, all, n_cuts);
      break;
    case CutSearchStrategy::Reduced: {
      const size_t step = (all.size() + 24) / 25;
      std::vector<size_t> pool;
      for (size_t i = 0; i < all.size(); i += step) pool.push_back(all[i]);
      if (pool.size() < static_cast<size_t>(n_cuts)) pool = all;
      exhaustive(best, scorer, pool, n_cuts);
      break;
    }
    case CutSearchStrategy::Greedy: {
      if (n_cuts <= 2) {
        exhaustive(best, scorer, all, n_cuts);
        break;
      }
      const std::vector<size_t> base = search_gaps(scorer, n_cuts - 1, CutSearchStrategy::Auto);
      for (size_t extra : all) {
        if (std::find(base.begin(), base.end(), extra) != base.end()) continue;
        std::vector<size_t> gaps = base;
        gaps.push_back(extra);
        std::sort(gaps.begin(), gaps.end());
        consider(best, scorer, gaps);
      }
      break;
    }
    case CutSearchStrategy::Auto:
      break;
  }
  if (!best.set) throw std::runtime_error("cut search found no feasible cut vector");
  return best.gaps;
}

}  // namespace detail

// Finite grid search for the AIC-optimal cutpoints on a quantifier's
// range. Candidate boundaries are the covariate values actually
// attained by observed histories; the returned cutpoints are the
// canonical (simplest) rationals inducing the optimal split. Ties
// resolve to the lexicographically smallest cut vector.
inline CutSearchResult cut_search(const CaptureMatrix& data, const Quantifier& q0, int n_cuts,
                                  CutSearchStrategy strategy, const FitOptions& opts) {
  if (n_cuts < 1) throw std::invalid_argument("cut search needs n_cuts >= 1");
  const Quantifier q = q0.needs_t() ? q0.with_t(data.t()) : q0;
  const auto vals = detail::attained_values(data, q);
  if (static_cast<int>(vals.size()) <= n_cuts)
    throw std::invalid_argument(
        "n_cuts must be below the number of distinct attained covariate values (" +
        std::to_string(vals.size()) + ")");

  std::vector<Rational> reps;
  reps.reserve(vals.size() - 1);
  for (size_t gidx = 0; gidx + 1 < vals.size(); ++gidx)
    reps.push_back(detail::canonical_cut(vals, gidx, q, data.t()));

  detail::CutScorer scorer(data, q, opts, std::move(reps));
  const auto gaps = detail::search_gaps(scorer, n_cuts, strategy);

  CutSearchResult result;
  result.cuts = scorer.cuts_for(gaps);
  result.fit = fit_model(data, scorer.spec_for(gaps), opts);
  return result;
}

}  // namespace recap
