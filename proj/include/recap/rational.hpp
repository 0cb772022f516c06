#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>

namespace recap {

namespace detail {

using int128 = __int128;

inline std::int64_t narrow_i64(int128 v) {
  if (v > int128(std::numeric_limits<std::int64_t>::max()) ||
      v < int128(std::numeric_limits<std::int64_t>::min()))
    throw std::overflow_error("rational arithmetic overflow");
  return static_cast<std::int64_t>(v);
}

inline int128 gcd128(int128 a, int128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

// floor(a / b) for b > 0, exact.
inline int128 floor_div(int128 a, int128 b) {
  int128 q = a / b;
  if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace detail

// Exact rational with 64-bit components, kept in canonical form
// (denominator > 0, fully reduced). Comparisons cross-multiply in
// 128-bit so they never overflow for any canonical pair.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den) : num_(num), den_(den) {
    if (den_ == 0) throw std::invalid_argument("rational with zero denominator");
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    const std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
  }
  // NOLINTNEXTLINE(google-explicit-constructor): integers embed naturally
  constexpr Rational(std::int64_t n) : num_(n), den_(1) {}

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  bool is_zero() const { return num_ == 0; }
  bool is_integer() const { return den_ == 1; }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  std::int64_t floor() const {
    return detail::narrow_i64(detail::floor_div(num_, den_));
  }
  std::int64_t ceil() const {
    return detail::narrow_i64(-detail::floor_div(-detail::int128(num_), den_));
  }

  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    const detail::int128 l = detail::int128(a.num_) * b.den_;
    const detail::int128 r = detail::int128(b.num_) * a.den_;
    if (l < r) return std::strong_ordering::less;
    if (l > r) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }
  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }

  friend Rational operator-(const Rational& a, const Rational& b) {
    const detail::int128 n =
        detail::int128(a.num_) * b.den_ - detail::int128(b.num_) * a.den_;
    const detail::int128 d = detail::int128(a.den_) * b.den_;
    const detail::int128 g = detail::gcd128(n, d);
    if (g <= 1) return Rational(detail::narrow_i64(n), detail::narrow_i64(d));
    return Rational(detail::narrow_i64(n / g), detail::narrow_i64(d / g));
  }
  friend Rational operator+(const Rational& a, const Rational& b) {
    const detail::int128 n =
        detail::int128(a.num_) * b.den_ + detail::int128(b.num_) * a.den_;
    const detail::int128 d = detail::int128(a.den_) * b.den_;
    const detail::int128 g = detail::gcd128(n, d);
    if (g <= 1) return Rational(detail::narrow_i64(n), detail::narrow_i64(d));
    return Rational(detail::narrow_i64(n / g), detail::narrow_i64(d / g));
  }

  Rational reciprocal() const {
    if (num_ == 0) throw std::domain_error("reciprocal of zero");
    return Rational(den_, num_);
  }

  std::string to_string() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
  }

  // Accepts "5/8", "3", "0.625", "-0.5". Decimal expansions are parsed
  // exactly (up to 18 fractional digits).
  static Rational parse(std::string_view s) {
    if (s.empty()) throw std::invalid_argument("empty rational literal");
    const auto slash = s.find('/');
    if (slash != std::string_view::npos) {
      return Rational(parse_int(s.substr(0, slash)), parse_int(s.substr(slash + 1)));
    }
    const auto dot = s.find('.');
    if (dot == std::string_view::npos) return Rational(parse_int(s), 1);
    bool neg = false;
    std::string_view head = s.substr(0, dot);
    if (!head.empty() && (head.front() == '-' || head.front() == '+')) {
      neg = head.front() == '-';
      head = head.substr(1);
    }
    const std::string_view frac = s.substr(dot + 1);
    if (frac.size() > 18) throw std::invalid_argument("decimal literal too long: " + std::string(s));
    std::int64_t ip = head.empty() ? 0 : parse_int(head);
    std::int64_t fp = frac.empty() ? 0 : parse_int(frac);
    std::int64_t scale = 1;
    for (size_t i = 0; i < frac.size(); ++i) scale *= 10;
    detail::int128 n = detail::int128(ip) * scale + fp;
    if (neg) n = -n;
    const detail::int128 g = detail::gcd128(n, scale);
    return Rational(detail::narrow_i64(n / g), detail::narrow_i64(scale / g));
  }

 private:
  static std::int64_t parse_int(std::string_view s) {
    if (s.empty()) throw std::invalid_argument("empty integer literal");
    bool neg = false;
    size_t i = 0;
    if (s[0] == '-' || s[0] == '+') {
      neg = s[0] == '-';
      i = 1;
      if (s.size() == 1) throw std::invalid_argument("bad integer literal");
    }
    detail::int128 v = 0;
    for (; i < s.size(); ++i) {
      if (s[i] < '0' || s[i] > '9')
        throw std::invalid_argument("bad integer literal: " + std::string(s));
      v = v * 10 + (s[i] - '0');
      if (v > detail::int128(std::numeric_limits<std::int64_t>::max()))
        throw std::overflow_error("integer literal overflow");
    }
    return neg ? -detail::narrow_i64(v) : detail::narrow_i64(v);
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

// Smallest-denominator rational in [lo, hi) / (lo, hi]. Classic
// continued-fraction descent; all arithmetic exact. Requires lo < hi,
// lo >= 0.
Rational simplest_in_left_closed(const Rational& lo, const Rational& hi);

inline Rational simplest_in_right_closed(const Rational& lo, const Rational& hi) {
  if (!(lo < hi)) throw std::invalid_argument("empty interval");
  const std::int64_t c = lo.floor() + 1;
  if (Rational(c) <= hi) return Rational(c);
  const std::int64_t n = lo.floor();
  if (lo == Rational(n)) {
    // (n, hi] with hi < n+1: take n + 1/m for the smallest feasible m.
    const Rational inv = (hi - Rational(n)).reciprocal();
    const std::int64_t m = inv.is_integer() ? inv.num() : inv.floor() + 1;
    return Rational(n * m + 1, m);
  }
  const Rational x = simplest_in_left_closed((hi - Rational(n)).reciprocal(),
                                             (lo - Rational(n)).reciprocal());
  const Rational r = x.reciprocal();
  return Rational(n) + r;
}

inline Rational simplest_in_left_closed(const Rational& lo, const Rational& hi) {
  if (!(lo < hi)) throw std::invalid_argument("empty interval");
  const std::int64_t c = lo.ceil();
  if (Rational(c) < hi) return Rational(c);
  const std::int64_t n = lo.floor();  // lo is non-integer here
  const Rational x = simplest_in_right_closed((hi - Rational(n)).reciprocal(),
                                              (lo - Rational(n)).reciprocal());
  return Rational(n) + x.reciprocal();
}

// Smallest-denominator rational strictly inside (lo, hi).
inline Rational simplest_in_open(const Rational& lo, const Rational& hi) {
  if (!(lo < hi)) throw std::invalid_argument("empty interval");
  // An integer strictly inside?
  const std::int64_t c = lo.floor() + 1;
  if (Rational(c) < hi) return Rational(c);
  const std::int64_t n = lo.floor();
  const Rational a = lo - Rational(n);
  const Rational b = hi - Rational(n);
  if (a.is_zero()) {
    // (0, b): 1/m with m > 1/b
    const Rational inv = b.reciprocal();
    const std::int64_t m = inv.floor() + 1;
    return Rational(n * m + 1, m);
  }
  // flip: x in [1/b, 1/a] open both sides -> recurse on (1/b, 1/a)
  const Rational x = simplest_in_open(b.reciprocal(), a.reciprocal());
  return Rational(n) + x.reciprocal();
}

}  // namespace recap
