#pragma once

// Brute-force reference for the unconditional likelihood: enumerates
// all N*t Bernoulli terms of the product in the likelihood and
// maximizes each class probability on a 1e-4 grid. Kept deliberately
// independent of the library (its own classification logic, its own
// exact binomial coefficient), so it can serve as an oracle for the
// profile machinery.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <utility>
#include <vector>

namespace oracle {

enum class Model { M0, Mb, Mc1 };

inline int num_classes(Model m) { return m == Model::M0 ? 1 : 2; }

// class of the trial (i,j) given the unit's full row; conditioning
// history is row[0..j-2]
inline int classify(Model model, const std::vector<int>& row, int j) {
  switch (model) {
    case Model::M0:
      return 0;
    case Model::Mb:
      for (int p = 0; p + 1 < j; ++p)
        if (row[p]) return 1;
      return 0;
    case Model::Mc1:
      return (j >= 2 && row[j - 2]) ? 1 : 0;
  }
  return 0;
}

// log C(n, m) as an exact product, no lgamma
inline double log_binom_exact(std::int64_t n, std::int64_t m) {
  double s = 0.0;
  for (std::int64_t i = 1; i <= m; ++i)
    s += std::log(double(n - m + i)) - std::log(double(i));
  return s;
}

inline double bern(std::int64_t s, std::int64_t n, double p) {
  double v = 0.0;
  if (s > 0) {
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    v += double(s) * std::log(p);
  }
  if (n - s > 0) {
    if (p >= 1.0) return -std::numeric_limits<double>::infinity();
    v += double(n - s) * std::log1p(-p);
  }
  return v;
}

// maximizes over the 1e-4 grid; with refine, re-scans the winning
// cell at step 1e-8 (still pure enumeration)
inline double grid_max_bernoulli(std::int64_t s, std::int64_t n, bool refine,
                                 std::map<std::pair<std::int64_t, std::int64_t>, double>& cache) {
  if (n == 0) return 0.0;
  const auto key = std::make_pair(s, n);
  const auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  double best = -std::numeric_limits<double>::infinity();
  double best_p = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    const double p = double(i) / 10000.0;
    const double v = bern(s, n, p);
    if (v > best) {
      best = v;
      best_p = p;
    }
  }
  if (refine) {
    for (int i = -10000; i <= 10000; ++i) {
      const double p = best_p + double(i) * 1e-8;
      const double v = bern(s, n, p);
      if (v > best) best = v;
    }
  }
  cache.emplace(key, best);
  return best;
}

class ProfileOracle {
 public:
  ProfileOracle(Model model, std::vector<std::vector<int>> rows, int t, bool refine = false)
      : model_(model), rows_(std::move(rows)), t_(t), refine_(refine) {}

  double loglik(std::int64_t n) {
    const std::int64_t m = static_cast<std::int64_t>(rows_.size());
    std::vector<std::int64_t> s(static_cast<size_t>(num_classes(model_)), 0);
    std::vector<std::int64_t> trials(static_cast<size_t>(num_classes(model_)), 0);
    const std::vector<int> zero_row(static_cast<size_t>(t_), 0);
    for (std::int64_t i = 0; i < n; ++i) {
      const std::vector<int>& row = i < m ? rows_[static_cast<size_t>(i)] : zero_row;
      for (int j = 1; j <= t_; ++j) {
        const int c = classify(model_, row, j);
        trials[static_cast<size_t>(c)] += 1;
        s[static_cast<size_t>(c)] += row[static_cast<size_t>(j - 1)];
      }
    }
    double ll = log_binom_exact(n, m);
    for (int c = 0; c < num_classes(model_); ++c)
      ll += grid_max_bernoulli(s[static_cast<size_t>(c)], trials[static_cast<size_t>(c)],
                               refine_, cache_);
    return ll;
  }

  // smallest-n argmax over [m, n_upp]
  std::int64_t argmax(std::int64_t n_upp) {
    const std::int64_t m = static_cast<std::int64_t>(rows_.size());
    std::int64_t best_n = m;
    double best = -std::numeric_limits<double>::infinity();
    for (std::int64_t n = m; n <= n_upp; ++n) {
      const double v = loglik(n);
      if (v > best) {
        best = v;
        best_n = n;
      }
    }
    return best_n;
  }

 private:
  Model model_;
  std::vector<std::vector<int>> rows_;
  int t_;
  bool refine_;
  std::map<std::pair<std::int64_t, std::int64_t>, double> cache_;
};

}  // namespace oracle
