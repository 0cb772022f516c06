#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "recap/glm.hpp"
#include "recap/model_spec.hpp"

namespace recap {

enum class GridStrategy { Full, CoarseFine };

struct FitOptions {
  std::optional<std::int64_t> n_upp;
  GridStrategy grid = GridStrategy::CoarseFine;
  double level = 0.95;
  bool compute_ci = true;
};

inline std::int64_t default_n_upp(std::int64_t m) { return std::max(2 * m + 100, 20 * m); }

// Hard-coded chi-square(1) quantiles for the profile likelihood ratio.
inline double chi2_quantile_1df(double level) {
  struct Entry { double level; double q; };
  static constexpr Entry table[] = {
      {0.80, 1.642}, {0.90, 2.706}, {0.95, 3.841}, {0.99, 6.635}};
  for (const auto& e : table)
    if (std::abs(level - e.level) < 1e-9) return e.q;
  throw std::invalid_argument("unsupported confidence level (use 0.80, 0.90, 0.95 or 0.99)");
}

// log C(n, m) through log-gamma.
inline double log_binom(std::int64_t n, std::int64_t m) {
  return std::lgamma(double(n) + 1.0) - std::lgamma(double(m) + 1.0) -
         std::lgamma(double(n - m) + 1.0);
}

struct ProfilePoint {
  std::int64_t n = 0;
  double loglik = -std::numeric_limits<double>::infinity();  // log C(n,M) + GLM loglik
  GlmFit fit;
  std::string error;  // per-point fit error, scan continues
};

struct FitResult {
  std::string model;
  std::int64_t n_hat = 0;
  std::vector<double> coefficients;
  std::vector<double> class_probs;  // factor designs: per-class p-hat
  double p0 = 0.0;
  double loglik = 0.0;  // maximized profile log-likelihood (includes log C(n,M))
  double aic = 0.0;
  std::int64_t ci_lo = 0;
  std::optional<std::int64_t> ci_hi;  // empty = open upper endpoint (likelihood failure)
  bool failure = false;
  int params = 0;  // design parameters + 1 for N
  std::int64_t m = 0;
  int t = 0;
  std::vector<std::string> warnings;
};

// Probability of never being captured, evaluated from the fitted model
// as the product over occasions of 1 - p_j(0,...,0). Reduces to
// (1 - expit(alpha))^t for every behavioural-covariate design.
inline double p0_from_fit(const GlmFit& fit, const Design& design, int t) {
  double p0 = 1.0;
  for (int j = 1; j <= t; ++j) {
    double pj = 0.0;
    switch (design.kind()) {
      case DesignKind::Constant:
        pj = fit.class_probs[0];
        break;
      case DesignKind::TimeFactor:
        pj = fit.class_probs[static_cast<size_t>(j - 1)];
        break;
      case DesignKind::Factor:
        pj = fit.class_probs[static_cast<size_t>(
            design.partition().class_of(PartialHistory::zeros(j - 1)) - 1)];
        break;
      case DesignKind::Linear:
        pj = expit(fit.coefficients[0]);
        break;
    }
    p0 *= (1.0 - pj);
  }
  return p0;
}

namespace detail {

// Evaluates profile points lazily: the observed grouping is built once
// and only the unobserved-trial augmentation changes with n.
class ProfileEvaluator {
 public:
  ProfileEvaluator(const CaptureMatrix& data, const Design& design)
      : grouped_(build_grouped(data, design, data.m())), m_(data.m()) {
    if (m_ < 1) throw std::invalid_argument("fitting requires at least one observed unit");
  }

  const ProfilePoint& eval(std::int64_t n) {
    auto it = memo_.find(n);
    if (it != memo_.end()) return it->second;
    ProfilePoint p;
    p.n = n;
    grouped_.n_total = n;
    try {
      p.fit = irls_fit(grouped_);
      p.loglik = log_binom(n, m_) + p.fit.loglik;
    } catch (const std::exception& e) {
      p.error = e.what();
      p.loglik = -std::numeric_limits<double>::infinity();
    }
    return memo_.emplace(n, std::move(p)).first->second;
  }

  std::vector<ProfilePoint> sorted_points() const {
    std::vector<ProfilePoint> out;
    out.reserve(memo_.size());
    for (const auto& [n, p] : memo_) out.push_back(p);
    return out;
  }

  const GroupedData& grouped() const { return grouped_; }
  std::int64_t m() const { return m_; }

 private:
  GroupedData grouped_;
  std::int64_t m_;
  std::map<std::int64_t, ProfilePoint> memo_;
};

inline std::int64_t coarse_stride(std::int64_t m, std::int64_t n_upp) {
  return std::max<std::int64_t>(1, (n_upp - m + 199) / 200);
}

inline void evaluate_grid(ProfileEvaluator& ev, std::int64_t m, std::int64_t n_upp,
                          GridStrategy grid) {
  if (grid == GridStrategy::Full) {
    for (std::int64_t n = m; n <= n_upp; ++n) ev.eval(n);
    return;
  }
  const std::int64_t stride = coarse_stride(m, n_upp);
  std::int64_t best_n = m;
  double best = -std::numeric_limits<double>::infinity();
  for (std::int64_t n = m;; n += stride) {
    if (n > n_upp) n = n_upp;
    const auto& p = ev.eval(n);
    if (p.loglik > best) {
      best = p.loglik;
      best_n = n;
    }
    if (n == n_upp) break;
  }
  const std::int64_t lo = std::max(m, best_n - 2 * stride);
  const std::int64_t hi = std::min(n_upp, best_n + 2 * stride);
  for (std::int64_t n = lo; n <= hi; ++n) ev.eval(n);
}

}  // namespace detail

// Profile log-likelihood over the integer grid of candidate population
// sizes: log C(n, M) plus the inner GLM maximum at each n.
inline std::vector<ProfilePoint> profile(const CaptureMatrix& data, const Design& design,
                                         std::int64_t n_upp,
                                         GridStrategy grid = GridStrategy::Full) {
  if (n_upp < data.m()) throw std::invalid_argument("n_upp below the number of observed units");
  detail::ProfileEvaluator ev(data, design);
  detail::evaluate_grid(ev, data.m(), n_upp, grid);
  return ev.sorted_points();
}

// Argmax over the evaluated profile; exact ties resolve to the
// smallest n. Likelihood failure is declared when the maximum sits on
// the upper grid edge.
inline FitResult maximize(const std::vector<ProfilePoint>& points, int design_params) {
  FitResult r;
  const ProfilePoint* best = nullptr;
  for (const auto& p : points) {
    if (!p.error.empty()) continue;
    if (best == nullptr || p.loglik > best->loglik) best = &p;
  }
  if (best == nullptr) throw std::runtime_error("no valid profile point");
  r.n_hat = best->n;
  r.coefficients = best->fit.coefficients;
  r.class_probs = best->fit.class_probs;
  r.loglik = best->loglik;
  r.params = design_params + 1;
  r.aic = -2.0 * r.loglik + 2.0 * r.params;
  r.failure = points.size() > 1 && best->n == points.back().n;
  r.ci_lo = r.n_hat;
  r.ci_hi = r.n_hat;
  return r;
}

// Profile likelihood ratio interval: the extreme evaluated integers n
// with 2 (L(n_hat) - L(n)) <= chi2_1(level).
struct ProfileCi {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

inline ProfileCi profile_ci(const std::vector<ProfilePoint>& points, double level) {
  double lmax = -std::numeric_limits<double>::infinity();
  for (const auto& p : points)
    if (p.error.empty()) lmax = std::max(lmax, p.loglik);
  const double target = lmax - chi2_quantile_1df(level) / 2.0;
  ProfileCi ci;
  bool found = false;
  for (const auto& p : points) {
    if (!p.error.empty() || p.loglik < target) continue;
    if (!found) {
      ci.lo = p.n;
      found = true;
    }
    ci.hi = p.n;
  }
  if (!found) throw std::runtime_error("profile has no point inside the confidence set");
  return ci;
}

// Full orchestration: design construction, profile scan, maximization,
// interval, P0. Failure (profile increasing up to n_upp) is surfaced
// through the flag and an open upper interval endpoint, never an
// exception.
inline FitResult fit_model(const CaptureMatrix& data, const ModelSpec& spec,
                           const FitOptions& opts = {}) {
  const Design design = build_design(spec, data.t());
  const std::int64_t m = data.m();
  const std::int64_t n_upp = opts.n_upp.value_or(default_n_upp(m));
  if (n_upp < m) throw std::invalid_argument("n_upp below the number of observed units");

  detail::ProfileEvaluator ev(data, design);
  detail::evaluate_grid(ev, m, n_upp, opts.grid);

  auto points = ev.sorted_points();
  FitResult r = maximize(points, design.param_count());
  r.model = spec.label();
  r.m = m;
  r.t = data.t();

  if (opts.compute_ci) {
    const double target = r.loglik - chi2_quantile_1df(opts.level) / 2.0;
    // fill the integer bracket around each threshold crossing so the
    // reported endpoints are exact integers
    auto fill_left = [&]() {
      for (size_t i = 0; i < points.size(); ++i) {
        if (!points[i].error.empty() || points[i].loglik < target) continue;
        if (i > 0)
          for (std::int64_t n = points[i - 1].n + 1; n < points[i].n; ++n) ev.eval(n);
        return;
      }
    };
    auto fill_right = [&]() {
      for (size_t i = points.size(); i-- > 0;) {
        if (!points[i].error.empty() || points[i].loglik < target) continue;
        if (i + 1 < points.size())
          for (std::int64_t n = points[i].n + 1; n < points[i + 1].n; ++n) ev.eval(n);
        return;
      }
    };
    fill_left();
    fill_right();
    points = ev.sorted_points();
    const ProfileCi ci = profile_ci(points, opts.level);
    r.ci_lo = std::max(ci.lo, m);
    if (r.failure)
      r.ci_hi.reset();  // open upper endpoint
    else
      r.ci_hi = ci.hi;
  }

  const auto& best = ev.eval(r.n_hat);
  r.p0 = p0_from_fit(best.fit, design, data.t());

  if (!best.fit.converged) r.warnings.push_back("inner GLM did not converge at n_hat");
  if (best.fit.separation) r.warnings.push_back("separation: boundary estimate on the logit scale");
  if (design.kind() == DesignKind::Factor && design.partition().dropped_empty_classes() > 0)
    r.warnings.push_back(std::to_string(design.partition().dropped_empty_classes()) +
                         " cut class(es) empty as history sets were dropped");
  if (design.kind() == DesignKind::Factor || design.kind() == DesignKind::TimeFactor) {
    const GroupedData& g = ev.grouped();
    for (size_t c = 0; c < g.cells.size(); ++c)
      if (g.cells[c].trials_observed == 0 && g.cells[c].unobserved_weight == 0)
        r.warnings.push_back("class H" + std::to_string(g.cells[c].cls) +
                             " has no observations");
  }
  if (r.p0 >= 1.0) r.warnings.push_back("degenerate fit: P0 = 1");
  return r;
}

}  // namespace recap
