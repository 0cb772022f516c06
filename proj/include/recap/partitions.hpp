#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "recap/histories.hpp"
#include "recap/rational.hpp"

namespace recap {

// Universe H of all partial capture histories for t occasions,
// |H| = 2^t - 1 counting the empty history once.
struct HistorySet {
  int t;
  explicit HistorySet(int t_) : t(t_) {
    if (t < 1 || t > kMaxOccasions) throw std::invalid_argument("occasions t out of range");
  }
  std::uint64_t size() const { return (std::uint64_t{1} << t) - 1; }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (int len = 0; len <= t - 1; ++len)
      for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << len); ++bits)
        fn(PartialHistory(bits, len));
  }
};

// Exhaustive enumeration and memo tables are only kept up to this many
// occasions; beyond it partitions classify on the fly.
inline constexpr int kMemoMaxOccasions = 16;

enum class NamedModel { M0, Mb, Mt, Mc, Mcb, ML2, Mcount };

// Interval cuts on the range of a quantifier: I_1 = [0, e_1],
// I_a = (e_{a-1}, e_a], I_A = (e_{A-1}, max]. Cutpoints must be
// strictly increasing and interior to the covariate range.
struct CutRecipe {
  Quantifier quantifier;
  std::vector<Rational> cutpoints;

  void validate(int t) const {
    const Rational upper =
        quantifier.unit_range() ? Rational(1) : Rational((std::int64_t{1} << (t - 1)) - 1);
    Rational prev(0);
    for (const auto& e : cutpoints) {
      if (!(e > prev) || !(e < upper))
        throw std::invalid_argument("cutpoints must be strictly increasing inside the covariate range");
      prev = e;
    }
  }
};

namespace detail {

// Is some attained quantifier value inside (lo, hi]? Exact, without
// enumerating H: G/Gaug/F reduce to an integer-range test per history
// length; Gn/Gtilde have O(t^2) attainable values and are enumerated.
inline bool attains_in_left_open(const Quantifier& q, int t, const Rational& lo,
                                 const Rational& hi) {
  using detail::floor_div;
  using detail::int128;
  switch (q.kind()) {
    case QuantifierKind::G: {
      for (int l = 1; l <= t - 1; ++l) {
        const int128 d = (int128(1) << l) - 1;
        std::int64_t fmin =
            detail::narrow_i64(floor_div(int128(lo.num()) * d, lo.den())) + 1;
        std::int64_t fmax = detail::narrow_i64(floor_div(int128(hi.num()) * d, hi.den()));
        fmin = std::max<std::int64_t>(fmin, 0);
        fmax = std::min<std::int64_t>(fmax, detail::narrow_i64(d));
        if (fmin <= fmax) return true;
      }
      return false;
    }
    case QuantifierKind::Gaug: {
      const int k = q.order();
      for (int l = 0; l <= t - 1; ++l) {
        const int K = k + l;
        if (K >= kMaxOccasions) throw std::invalid_argument("gaug order too large for t");
        const int128 d = (int128(1) << K) - 1;
        const int128 p2k = int128(1) << k;
        std::int64_t fmin =
            detail::narrow_i64(floor_div(int128(lo.num()) * d, int128(lo.den()) * p2k)) + 1;
        std::int64_t fmax =
            detail::narrow_i64(floor_div(int128(hi.num()) * d, int128(hi.den()) * p2k));
        fmin = std::max<std::int64_t>(fmin, 0);
        fmax = std::min<std::int64_t>(fmax, ((std::int64_t{1} << l) - 1));
        if (fmin <= fmax) return true;
      }
      return false;
    }
    case QuantifierKind::F: {
      const std::int64_t top = (std::int64_t{1} << (t - 1)) - 1;
      std::int64_t fmin = lo.floor() + 1;  // smallest integer > lo
      std::int64_t fmax = hi.floor();
      fmin = std::max<std::int64_t>(fmin, 0);
      fmax = std::min(fmax, top);
      return fmin <= fmax;
    }
    case QuantifierKind::Gn: {
      for (int l = 1; l <= t - 1; ++l)
        for (int c = 0; c <= l; ++c) {
          const Rational v(c, l);
          if (lo < v && v <= hi) return true;
        }
      return false;
    }
    case QuantifierKind::Gtilde: {
      for (int c = 0; c <= t - 1; ++c) {
        const Rational v(c, t);
        if (lo < v && v <= hi) return true;
      }
      return false;
    }
  }
  return false;
}

struct PartitionImpl {
  int t = 0;
  int num_classes = 0;
  std::string label;
  std::function<int(const PartialHistory&)> classify;  // 1-based class index
  std::vector<std::uint16_t> memo;                     // filled for t <= kMemoMaxOccasions
  int dropped_empty_classes = 0;
  std::optional<CutRecipe> recipe;
};

}  // namespace detail

// A partition of H into B disjoint nonempty classes H_1, ..., H_B.
// Immutable; classification is memoized for small t.
class Partition {
 public:
  Partition(int t, int num_classes, std::string label,
            std::function<int(const PartialHistory&)> classify, int dropped_empty = 0,
            std::optional<CutRecipe> recipe = std::nullopt) {
    auto impl = std::make_shared<detail::PartitionImpl>();
    impl->t = t;
    impl->num_classes = num_classes;
    impl->label = std::move(label);
    impl->classify = std::move(classify);
    impl->dropped_empty_classes = dropped_empty;
    impl->recipe = std::move(recipe);
    if (t <= kMemoMaxOccasions) {
      impl->memo.assign((std::uint64_t{1} << t) - 1, 0);
      HistorySet(t).for_each([&](const PartialHistory& h) {
        const int b = impl->classify(h);
        impl->memo[history_index(h)] = static_cast<std::uint16_t>(b);
      });
    }
    impl_ = std::move(impl);
  }

  int t() const { return impl_->t; }
  int num_classes() const { return impl_->num_classes; }
  const std::string& label() const { return impl_->label; }
  int dropped_empty_classes() const { return impl_->dropped_empty_classes; }
  const std::optional<CutRecipe>& recipe() const { return impl_->recipe; }

  // 1-based index b of the class containing x.
  int class_of(const PartialHistory& x) const {
    if (x.length() > impl_->t - 1)
      throw std::invalid_argument("history longer than t-1");
    if (!impl_->memo.empty()) return impl_->memo[history_index(x)];
    return impl_->classify(x);
  }

  // Explicit class lists (audit/serialization); enumerates H.
  std::vector<std::vector<PartialHistory>> classes() const {
    if (impl_->t > kMemoMaxOccasions)
      throw std::invalid_argument("class enumeration capped at t <= 16");
    std::vector<std::vector<PartialHistory>> out(static_cast<size_t>(impl_->num_classes));
    HistorySet(impl_->t).for_each([&](const PartialHistory& h) {
      out[static_cast<size_t>(class_of(h) - 1)].push_back(h);
    });
    return out;
  }

  friend bool operator==(const Partition& a, const Partition& b) {
    if (a.t() != b.t() || a.num_classes() != b.num_classes()) return false;
    bool same = true;
    HistorySet(a.t()).for_each([&](const PartialHistory& h) {
      if (a.class_of(h) != b.class_of(h)) same = false;
    });
    return same;
  }

 private:
  std::shared_ptr<const detail::PartitionImpl> impl_;
};

namespace detail {

// Last-k-digit window of the zero-augmented history, encoded with the
// oldest digit of the window least significant; this is exactly the
// r-1 of the dyadic-interval correspondence.
inline std::uint64_t suffix_window(const PartialHistory& x, int k) {
  const int l = x.length();
  if (l >= k) return x.bits() >> (l - k);
  return x.bits() << (k - l);
}

}  // namespace detail

inline Partition named_partition(NamedModel model, int t, int k = 0) {
  if (t < 2 || t > kMaxOccasions)
    throw std::invalid_argument("named partitions require 2 <= t <= 63");
  switch (model) {
    case NamedModel::M0:
      return Partition(t, 1, "M0", [](const PartialHistory&) { return 1; });
    case NamedModel::Mb:
      return Partition(t, 2, "Mb",
                       [](const PartialHistory& x) { return x.never_captured() ? 1 : 2; });
    case NamedModel::Mt:
      return Partition(t, t, "Mt", [](const PartialHistory& x) { return x.length() + 1; });
    case NamedModel::Mc: {
      if (k < 1 || k > t - 1) throw std::invalid_argument("Mc(k) requires 1 <= k <= t-1");
      const int classes = 1 << k;
      return Partition(t, classes, "Mc" + std::to_string(k), [k](const PartialHistory& x) {
        return static_cast<int>(detail::suffix_window(x, k)) + 1;
      });
    }
    case NamedModel::Mcb: {
      // The split-off class {captured before, no capture in the last k
      // occasions} needs histories of length >= k+1, hence k <= t-2.
      if (k < 1 || k > t - 2) throw std::invalid_argument("Mcb(k) requires 1 <= k <= t-2");
      const int classes = (1 << k) + 1;
      return Partition(t, classes, "Mc" + std::to_string(k) + "b", [k](const PartialHistory& x) {
        const std::uint64_t w = detail::suffix_window(x, k);
        if (w == 0) return x.never_captured() ? 1 : 2;
        return static_cast<int>(w) + 2;
      });
    }
    case NamedModel::ML2: {
      if (t < 4) throw std::invalid_argument("ML2 requires t >= 4");
      const Rational cut(5, 8);
      return Partition(t, 2, "ML2", [cut](const PartialHistory& x) {
        return quantify_g(x) <= cut ? 1 : 2;
      });
    }
    case NamedModel::Mcount:
      return Partition(t, t, "Mcount",
                       [](const PartialHistory& x) { return x.capture_count() + 1; });
  }
  throw std::logic_error("unreachable");
}

// Partition induced by interval cuts on a quantifier's range.
// Membership is decided by exact rational comparison; intervals empty
// as history sets are dropped with renumbering (the count is kept on
// the partition and surfaced by fits).
inline Partition cut_partition(const CutRecipe& recipe, int t) {
  if (t < 2 || t > kMaxOccasions) throw std::invalid_argument("cut partitions require 2 <= t <= 63");
  recipe.validate(t);
  const Quantifier q = recipe.quantifier.needs_t() ? recipe.quantifier.with_t(t) : recipe.quantifier;
  const auto& cuts = recipe.cutpoints;
  const int intervals = static_cast<int>(cuts.size()) + 1;

  // interval 1 contains the attained value 0 and is never empty
  std::vector<bool> nonempty(static_cast<size_t>(intervals), false);
  nonempty[0] = true;
  const Rational upper =
      q.unit_range() ? Rational(1) : Rational((std::int64_t{1} << (t - 1)) - 1);
  for (int a = 2; a <= intervals; ++a) {
    const Rational lo = cuts[static_cast<size_t>(a - 2)];
    const Rational hi = (a == intervals) ? upper : cuts[static_cast<size_t>(a - 1)];
    nonempty[static_cast<size_t>(a - 1)] = detail::attains_in_left_open(q, t, lo, hi);
  }

  std::vector<int> renumber(static_cast<size_t>(intervals), 0);
  int next = 0;
  for (int a = 0; a < intervals; ++a)
    if (nonempty[static_cast<size_t>(a)]) renumber[static_cast<size_t>(a)] = ++next;
  const int dropped = intervals - next;

  std::string label = "cut:" + q.label() + ":";
  for (size_t i = 0; i < cuts.size(); ++i) {
    if (i) label += ",";
    label += cuts[i].to_string();
  }

  auto classify = [q, cuts, renumber](const PartialHistory& x) {
    const Rational v = q(x);
    // interval index = 1 + #{cutpoints strictly below v}
    const auto it = std::lower_bound(cuts.begin(), cuts.end(), v);
    const int interval = static_cast<int>(it - cuts.begin());
    return renumber[static_cast<size_t>(interval)];
  };
  return Partition(t, next, std::move(label), std::move(classify), dropped,
                   CutRecipe{q, cuts});
}

struct CorrespondenceReport {
  bool pass = true;
  std::string detail;
};

// Exhaustively verifies the two structural facts behind the Markov
// correspondence: (1) over all histories of length >= k, the dyadic
// interval of g depends only on the last k digits and equals their
// reversed binary value; (2) the dyadic cut partition of g_aug(k)
// coincides with the Mc(k) partition.
inline CorrespondenceReport markov_correspondence_check(int k, int t) {
  if (k < 1 || k >= t || t > kMemoMaxOccasions)
    throw std::invalid_argument("correspondence check requires 1 <= k < t <= 16");
  CorrespondenceReport report;

  std::vector<Rational> dyadic;
  for (std::int64_t r = 1; r < (std::int64_t{1} << k); ++r)
    dyadic.emplace_back(r, std::int64_t{1} << k);

  HistorySet H(t);
  H.for_each([&](const PartialHistory& x) {
    if (!report.pass || x.length() < k) return;
    const Rational z = quantify_g(x);
    const auto it = std::lower_bound(dyadic.begin(), dyadic.end(), z);
    const std::uint64_t interval = static_cast<std::uint64_t>(it - dyadic.begin());
    const std::uint64_t window = detail::suffix_window(x, k);
    if (interval != window) {
      report.pass = false;
      report.detail = "history " + x.to_string() + " with g=" + z.to_string() +
                      " falls in interval " + std::to_string(interval + 1) +
                      " but its last-" + std::to_string(k) + " window is r=" +
                      std::to_string(window + 1);
    }
  });
  if (!report.pass) return report;

  const Partition mc = named_partition(NamedModel::Mc, t, k);
  const Partition cut = cut_partition(CutRecipe{Quantifier::gaug(k), dyadic}, t);
  if (cut.num_classes() != mc.num_classes()) {
    report.pass = false;
    report.detail = "gaug cut partition has " + std::to_string(cut.num_classes()) +
                    " classes, Mc(k) has " + std::to_string(mc.num_classes());
    return report;
  }
  H.for_each([&](const PartialHistory& x) {
    if (!report.pass) return;
    if (cut.class_of(x) != mc.class_of(x)) {
      report.pass = false;
      report.detail = "history " + x.to_string() + ": gaug-cut class " +
                      std::to_string(cut.class_of(x)) + " vs Mc class " +
                      std::to_string(mc.class_of(x));
    }
  });
  return report;
}

}  // namespace recap
