#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "recap/likelihood.hpp"
#include "recap/selection.hpp"

namespace recap {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

// Pinned random source: std::mt19937_64 (bit-exact across platforms by
// the standard) seeded through one SplitMix64 scramble; uniforms take
// the top 53 bits. No library distributions, so streams are
// reproducible everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(detail::splitmix64(seed)) {}
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

// A data-generating model: a fittable design plus fixed logit-scale
// coefficients (alpha, beta for linear models; logit p_b per class for
// factor models).
struct GeneratorSpec {
  ModelSpec model;
  std::vector<double> coefficients;
  std::int64_t n_true = 0;
  int t = 0;
  std::uint64_t seed = 0;
};

namespace detail {

class ConditionalModel {
 public:
  ConditionalModel(const ModelSpec& spec, const std::vector<double>& coef, int t)
      : design_(build_design(spec, t)) {
    if (static_cast<int>(coef.size()) != design_.param_count())
      throw std::invalid_argument("generator needs " + std::to_string(design_.param_count()) +
                                  " coefficient(s), got " + std::to_string(coef.size()));
    for (double c : coef)
      if (!std::isfinite(c)) throw std::invalid_argument("generator coefficients must be finite");
    coef_ = coef;
  }

  double capture_prob(const PartialHistory& h, int j) const {
    switch (design_.kind()) {
      case DesignKind::Constant:
        return expit(coef_[0]);
      case DesignKind::Linear:
        return expit(coef_[0] + coef_[1] * design_.quantifier()(h).to_double());
      case DesignKind::TimeFactor:
        return expit(coef_[static_cast<size_t>(j - 1)]);
      case DesignKind::Factor:
        return expit(coef_[static_cast<size_t>(design_.partition().class_of(h) - 1)]);
    }
    throw std::logic_error("unreachable");
  }

  double never_captured_prob(int t) const {
    double p0 = 1.0;
    for (int j = 1; j <= t; ++j) p0 *= 1.0 - capture_prob(PartialHistory::zeros(j - 1), j);
    return p0;
  }

 private:
  Design design_;
  std::vector<double> coef_;
};

}  // namespace detail

// Sequentially samples each unit's t outcomes from its conditional
// capture probabilities and keeps the rows captured at least once.
// Every unit consumes exactly t uniforms, so the stream layout is
// independent of the outcomes.
inline CaptureMatrix generate(const GeneratorSpec& spec) {
  if (spec.n_true < 0) throw std::invalid_argument("n_true must be nonnegative");
  const detail::ConditionalModel model(spec.model, spec.coefficients, spec.t);
  Rng rng(spec.seed);
  std::vector<std::uint64_t> rows;
  for (std::int64_t i = 0; i < spec.n_true; ++i) {
    std::uint64_t bits = 0;
    int len = 0;
    for (int j = 1; j <= spec.t; ++j) {
      const double p = model.capture_prob(PartialHistory(bits, len), j);
      const bool captured = rng.uniform() < p;
      if (captured) bits |= std::uint64_t{1} << (j - 1);
      len = j;
    }
    if (bits != 0) rows.push_back(bits);
  }
  return CaptureMatrix(spec.t, std::move(rows), /*allow_zero_rows=*/true);
}

// E[M] = N (1 - P0).
inline double expected_m(const GeneratorSpec& spec) {
  const detail::ConditionalModel model(spec.model, spec.coefficients, spec.t);
  return double(spec.n_true) * (1.0 - model.never_captured_prob(spec.t));
}

struct CandidateStats {
  std::string model;
  // failure replicates are excluded from the point/interval summaries;
  // coverage counts every replicate
  double mean_nhat = std::numeric_limits<double>::quiet_NaN();
  double rmse = std::numeric_limits<double>::quiet_NaN();
  double coverage_pct = 0.0;
  double mean_ci_length = std::numeric_limits<double>::quiet_NaN();
  double pct_aic_best = 0.0;
  std::int64_t failures = 0;
  std::int64_t included = 0;
};

struct TrialReport {
  std::string generator;
  std::int64_t n_true = 0;
  int t = 0;
  int k = 0;
  std::uint64_t base_seed = 0;
  double expected_m = 0.0;
  std::vector<CandidateStats> candidates;
};

namespace detail {

struct ReplicateFit {
  bool error = true;
  bool failure = false;
  std::int64_t n_hat = 0;
  std::int64_t ci_lo = 0;
  std::optional<std::int64_t> ci_hi;
  double aic = std::numeric_limits<double>::infinity();
  int params = 0;
};

}  // namespace detail

// Replicated estimation study. Replicate r draws its data with seed
// base_seed XOR r and fits every candidate; results land in
// pre-assigned slots so the aggregation is identical for any thread
// count.
inline TrialReport run_trial(const GeneratorSpec& spec, const std::vector<ModelSpec>& candidates,
                             int k, std::uint64_t base_seed, const FitOptions& opts = {},
                             int threads = 1) {
  if (k < 1) throw std::invalid_argument("need at least one replicate");
  if (candidates.empty()) throw std::invalid_argument("empty candidate list");

  const size_t nc = candidates.size();
  std::vector<std::vector<detail::ReplicateFit>> slots(
      static_cast<size_t>(k), std::vector<detail::ReplicateFit>(nc));

  auto run_replicate = [&](int r) {
    GeneratorSpec draw = spec;
    draw.seed = base_seed ^ static_cast<std::uint64_t>(r);
    const CaptureMatrix data = generate(draw);
    for (size_t c = 0; c < nc; ++c) {
      detail::ReplicateFit& out = slots[static_cast<size_t>(r)][c];
      try {
        FitResult fit;
        if (candidates[c].kind == ModelSpec::Kind::CutSearch) {
          fit = cut_search(data, *candidates[c].quant, candidates[c].order,
                           CutSearchStrategy::Auto, opts)
                    .fit;
        } else {
          fit = fit_model(data, candidates[c], opts);
        }
        out.error = false;
        out.failure = fit.failure;
        out.n_hat = fit.n_hat;
        out.ci_lo = fit.ci_lo;
        out.ci_hi = fit.ci_hi;
        out.aic = fit.aic;
        out.params = fit.params;
      } catch (const std::exception&) {
        out.error = true;
      }
    }
  };

  const int workers = std::max(1, std::min(threads, k));
  if (workers == 1) {
    for (int r = 0; r < k; ++r) run_replicate(r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&]() {
        for (int r = next.fetch_add(1); r < k; r = next.fetch_add(1)) run_replicate(r);
      });
    for (auto& th : pool) th.join();
  }

  TrialReport report;
  report.generator = spec.model.label();
  report.n_true = spec.n_true;
  report.t = spec.t;
  report.k = k;
  report.base_seed = base_seed;
  report.expected_m = expected_m(spec);

  std::vector<std::int64_t> wins(nc, 0);
  for (int r = 0; r < k; ++r) {
    std::ptrdiff_t best = -1;
    for (size_t c = 0; c < nc; ++c) {
      const auto& f = slots[static_cast<size_t>(r)][c];
      if (f.error) continue;
      if (best < 0) {
        best = static_cast<std::ptrdiff_t>(c);
        continue;
      }
      const auto& bf = slots[static_cast<size_t>(r)][static_cast<size_t>(best)];
      if (f.aic < bf.aic ||
          (f.aic == bf.aic &&
           (f.params < bf.params ||
            (f.params == bf.params &&
             candidates[c].label() < candidates[static_cast<size_t>(best)].label()))))
        best = static_cast<std::ptrdiff_t>(c);
    }
    if (best >= 0) ++wins[static_cast<size_t>(best)];
  }

  for (size_t c = 0; c < nc; ++c) {
    CandidateStats s;
    s.model = candidates[c].label();
    double sum = 0, sumsq = 0, lensum = 0;
    std::int64_t covered = 0;
    for (int r = 0; r < k; ++r) {
      const auto& f = slots[static_cast<size_t>(r)][c];
      if (f.error) {
        ++s.failures;
        continue;
      }
      if (f.failure) {
        ++s.failures;
        if (f.ci_lo <= spec.n_true) ++covered;  // open upper endpoint
        continue;
      }
      ++s.included;
      sum += double(f.n_hat);
      sumsq += double(f.n_hat - spec.n_true) * double(f.n_hat - spec.n_true);
      lensum += double(*f.ci_hi - f.ci_lo);
      if (f.ci_lo <= spec.n_true && spec.n_true <= *f.ci_hi) ++covered;
    }
    if (s.included > 0) {
      s.mean_nhat = sum / double(s.included);
      s.rmse = std::sqrt(sumsq / double(s.included));
      s.mean_ci_length = lensum / double(s.included);
    }
    s.coverage_pct = 100.0 * double(covered) / double(k);
    s.pct_aic_best = 100.0 * double(wins[c]) / double(k);
    report.candidates.push_back(std::move(s));
  }
  return report;
}

}  // namespace recap
