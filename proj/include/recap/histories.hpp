#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "recap/rational.hpp"

namespace recap {

// Hard cap on the number of capture occasions: with t <= 63 the
// reversed-binary value of any partial history fits an unsigned 64-bit
// word and stays exact in Rational keys.
inline constexpr int kMaxOccasions = 63;

// A partial capture history (x_1, ..., x_l) with 0 <= l <= t-1. Bit
// j-1 of `bits` holds x_j, so the packed word equals the reversed
// binary value used by the quantifiers.
class PartialHistory {
 public:
  constexpr PartialHistory() = default;  // the empty history ()
  PartialHistory(std::uint64_t bits, int length) : bits_(bits), len_(length) {
    if (length < 0 || length >= kMaxOccasions)
      throw std::invalid_argument("partial history length out of range");
    if (length < 64 && (bits >> length) != 0)
      throw std::invalid_argument("partial history bits exceed length");
  }

  static PartialHistory from_string(std::string_view s) {
    std::uint64_t bits = 0;
    for (size_t j = 0; j < s.size(); ++j) {
      if (s[j] == '1')
        bits |= std::uint64_t{1} << j;
      else if (s[j] != '0')
        throw std::invalid_argument("partial history string must be 0/1");
    }
    return PartialHistory(bits, static_cast<int>(s.size()));
  }

  static PartialHistory zeros(int length) { return PartialHistory(0, length); }

  int length() const { return len_; }
  bool empty() const { return len_ == 0; }
  std::uint64_t bits() const { return bits_; }
  bool never_captured() const { return bits_ == 0; }
  int capture_count() const { return std::popcount(bits_); }
  // x_j, 1-based occasion index
  bool bit(int j) const { return (bits_ >> (j - 1)) & 1u; }
  bool last_bit() const { return len_ > 0 && bit(len_); }

  // (0,...,0, x_1, ..., x_l): k fictitious non-captures ahead.
  PartialHistory with_leading_zeros(int k) const {
    if (k < 0 || len_ + k >= kMaxOccasions)
      throw std::invalid_argument("augmented history too long");
    return PartialHistory(bits_ << k, len_ + k);
  }

  std::string to_string() const {
    std::string s(static_cast<size_t>(len_), '0');
    for (int j = 1; j <= len_; ++j)
      if (bit(j)) s[j - 1] = '1';
    return s;
  }

  friend bool operator==(const PartialHistory&, const PartialHistory&) = default;

 private:
  std::uint64_t bits_ = 0;
  int len_ = 0;
};

// Dense index of a history inside the universe H of all 2^t - 1
// partial histories: histories of length < l come first.
inline std::uint64_t history_index(const PartialHistory& h) {
  return ((std::uint64_t{1} << h.length()) - 1) + h.bits();
}

inline PartialHistory history_from_index(std::uint64_t idx) {
  int len = 0;
  while (((std::uint64_t{1} << (len + 1)) - 1) <= idx) ++len;
  return PartialHistory(idx - ((std::uint64_t{1} << len) - 1), len);
}

// f(x) = sum_j x_j 2^(j-1), the reversed binary representation; 0 for
// the empty history.
inline std::uint64_t quantify_f(const PartialHistory& x) { return x.bits(); }

// g(x) = f(x) / (2^l - 1), exact; 0 for the empty history.
inline Rational quantify_g(const PartialHistory& x) {
  if (x.length() == 0 || x.bits() == 0) return Rational(0);
  const std::int64_t den = static_cast<std::int64_t>((std::uint64_t{1} << x.length()) - 1);
  return Rational(static_cast<std::int64_t>(x.bits()), den);
}

// g_n(x) = (number of captures) / l; 0 for the empty history.
inline Rational quantify_gn(const PartialHistory& x) {
  if (x.length() == 0) return Rational(0);
  return Rational(x.capture_count(), x.length());
}

// g~_n(x) = (number of captures) / t.
inline Rational quantify_gtilde(const PartialHistory& x, int t) {
  if (t < 1) throw std::invalid_argument("gtilde requires t >= 1");
  if (x.length() >= t) throw std::invalid_argument("history length must be below t");
  return Rational(x.capture_count(), t);
}

// g_aug(x; k) = g((0,...,0, x)) with exactly k zeros prepended, the
// zero-augmentation of the whole history matrix.
inline Rational quantify_gaug(const PartialHistory& x, int k) {
  if (k < 1) throw std::invalid_argument("gaug requires k >= 1");
  return quantify_g(x.with_leading_zeros(k));
}

enum class QuantifierKind { F, G, Gn, Gtilde, Gaug };

// A quantification map from partial histories to a numeric behavioural
// covariate, evaluated in exact rational arithmetic. Gtilde needs the
// experiment length t; Gaug carries its Markov order k.
class Quantifier {
 public:
  static Quantifier f() { return Quantifier(QuantifierKind::F, 0, 0); }
  static Quantifier g() { return Quantifier(QuantifierKind::G, 0, 0); }
  static Quantifier gn() { return Quantifier(QuantifierKind::Gn, 0, 0); }
  static Quantifier gtilde(int t = 0) { return Quantifier(QuantifierKind::Gtilde, 0, t); }
  static Quantifier gaug(int k) {
    if (k < 1) throw std::invalid_argument("gaug requires k >= 1");
    return Quantifier(QuantifierKind::Gaug, k, 0);
  }

  QuantifierKind kind() const { return kind_; }
  int order() const { return k_; }
  int t() const { return t_; }
  bool needs_t() const { return kind_ == QuantifierKind::Gtilde; }

  // Binds the experiment length (required for Gtilde, a no-op otherwise).
  Quantifier with_t(int t) const {
    Quantifier q = *this;
    q.t_ = t;
    return q;
  }

  Rational operator()(const PartialHistory& x) const {
    switch (kind_) {
      case QuantifierKind::F:
        return Rational(static_cast<std::int64_t>(quantify_f(x)));
      case QuantifierKind::G:
        return quantify_g(x);
      case QuantifierKind::Gn:
        return quantify_gn(x);
      case QuantifierKind::Gtilde:
        if (t_ < 1) throw std::logic_error("gtilde quantifier has no bound t");
        return quantify_gtilde(x, t_);
      case QuantifierKind::Gaug:
        return quantify_gaug(x, k_);
    }
    throw std::logic_error("unreachable");
  }

  // Covariate range is [0,1] for everything except the unnormalized F.
  bool unit_range() const { return kind_ != QuantifierKind::F; }

  std::string label() const {
    switch (kind_) {
      case QuantifierKind::F: return "f";
      case QuantifierKind::G: return "g";
      case QuantifierKind::Gn: return "gn";
      case QuantifierKind::Gtilde: return "gtilde";
      case QuantifierKind::Gaug: return "gaug:" + std::to_string(k_);
    }
    return "?";
  }

  // "f" | "g" | "gn" | "gtilde" | "gaug:k"
  static Quantifier parse(std::string_view s) {
    if (s == "f") return f();
    if (s == "g") return g();
    if (s == "gn") return gn();
    if (s == "gtilde" || s == "gt") return gtilde();
    if (s.rfind("gaug:", 0) == 0) {
      const int k = std::stoi(std::string(s.substr(5)));
      return gaug(k);
    }
    throw std::invalid_argument("unknown quantifier: " + std::string(s));
  }

  friend bool operator==(const Quantifier&, const Quantifier&) = default;

 private:
  Quantifier(QuantifierKind kind, int k, int t) : kind_(kind), k_(k), t_(t) {}
  QuantifierKind kind_;
  int k_;
  int t_;
};

// Observed portion of the capture matrix: M rows of t binary outcomes,
// each row packed with bit j-1 = x_ij. Rows for units never captured
// are not representable here; they enter only as counts.
class CaptureMatrix {
 public:
  CaptureMatrix(int t, std::vector<std::uint64_t> rows, bool allow_zero_rows = false)
      : t_(t), rows_(std::move(rows)) {
    if (t < 1 || t > kMaxOccasions) throw std::invalid_argument("occasions t out of range [1,63]");
    for (size_t i = 0; i < rows_.size(); ++i) {
      if (t < 64 && (rows_[i] >> t) != 0)
        throw std::invalid_argument("row " + std::to_string(i + 1) + " wider than t");
      if (!allow_zero_rows && rows_[i] == 0)
        throw std::invalid_argument("row " + std::to_string(i + 1) +
                                    " has no captures; unobserved units are not part of the data");
    }
  }

  static CaptureMatrix from_rows(int t, const std::vector<std::vector<int>>& rows) {
    std::vector<std::uint64_t> packed;
    packed.reserve(rows.size());
    for (const auto& r : rows) {
      if (static_cast<int>(r.size()) != t)
        throw std::invalid_argument("all rows must have t entries");
      std::uint64_t bits = 0;
      for (int j = 0; j < t; ++j) {
        if (r[j] != 0 && r[j] != 1) throw std::invalid_argument("entries must be 0/1");
        if (r[j]) bits |= std::uint64_t{1} << j;
      }
      packed.push_back(bits);
    }
    return CaptureMatrix(t, std::move(packed));
  }

  int t() const { return t_; }
  std::int64_t m() const { return static_cast<std::int64_t>(rows_.size()); }
  std::uint64_t row_bits(std::int64_t i) const { return rows_[static_cast<size_t>(i)]; }
  bool entry(std::int64_t i, int j) const { return (rows_[static_cast<size_t>(i)] >> (j - 1)) & 1u; }

  // Conditioning history of unit i at occasion j: (x_i1, ..., x_i,j-1).
  PartialHistory prefix(std::int64_t i, int j) const {
    const std::uint64_t mask = (j - 1 == 64) ? ~std::uint64_t{0} : ((std::uint64_t{1} << (j - 1)) - 1);
    return PartialHistory(rows_[static_cast<size_t>(i)] & mask, j - 1);
  }

  std::int64_t total_captures() const {
    std::int64_t s = 0;
    for (auto r : rows_) s += std::popcount(r);
    return s;
  }

 private:
  int t_;
  std::vector<std::uint64_t> rows_;
};

// Behavioural covariate matrix Z: exact values for the M observed rows
// plus a count of appended all-zero rows for the unobserved units.
// Column 1 is identically zero (empty conditioning history).
struct CovariateMatrix {
  int t = 0;
  std::int64_t zero_rows = 0;
  std::vector<std::vector<Rational>> observed;
};

inline CovariateMatrix covariate_matrix(const CaptureMatrix& data, const Quantifier& q,
                                        std::int64_t n_total) {
  if (n_total < data.m())
    throw std::invalid_argument("population size below number of observed units");
  const Quantifier quant = q.needs_t() ? q.with_t(data.t()) : q;
  CovariateMatrix z;
  z.t = data.t();
  z.zero_rows = n_total - data.m();
  z.observed.resize(static_cast<size_t>(data.m()));
  for (std::int64_t i = 0; i < data.m(); ++i) {
    auto& row = z.observed[static_cast<size_t>(i)];
    row.reserve(static_cast<size_t>(data.t()));
    for (int j = 1; j <= data.t(); ++j) row.push_back(quant(data.prefix(i, j)));
  }
  return z;
}

}  // namespace recap
