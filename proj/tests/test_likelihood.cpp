#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "oracle.hpp"
#include "recap/likelihood.hpp"
#include "recap/serialize.hpp"
#include "recap/simulation.hpp"

using namespace recap;

namespace {

CaptureMatrix random_matrix(int t, int m, std::mt19937_64& rng) {
  std::vector<std::uint64_t> rows;
  while (static_cast<int>(rows.size()) < m) {
    const std::uint64_t bits = rng() & ((std::uint64_t{1} << t) - 1);
    if (bits != 0) rows.push_back(bits);
  }
  return CaptureMatrix(t, std::move(rows));
}

std::vector<std::vector<int>> unpack(const CaptureMatrix& data) {
  std::vector<std::vector<int>> rows;
  for (std::int64_t i = 0; i < data.m(); ++i) {
    std::vector<int> row;
    for (int j = 1; j <= data.t(); ++j) row.push_back(data.entry(i, j) ? 1 : 0);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("P0 from a linear fit: the Table-4 settings") {
  GlmFit fit;
  fit.coefficients = {-3.0, 4.0};
  const Design design = Design::linear(Quantifier::g(), 10);
  const double p0_10 = p0_from_fit(fit, design, 10);
  CHECK(std::abs(100.0 * (1.0 - p0_10) - 38.5) < 0.05);
  const double p0_30 = p0_from_fit(fit, Design::linear(Quantifier::g(), 30), 30);
  CHECK(std::abs(100.0 * (1.0 - p0_30) - 76.7) < 0.05);
}

TEST_CASE("P0 multiplies per-occasion misses for the time model") {
  GlmFit fit;
  fit.class_probs = {0.5, 0.25};
  fit.coefficients = {logit(0.5), logit(0.25)};
  const double p0 = p0_from_fit(fit, Design::time_factor(2), 2);
  CHECK(p0 == Catch::Approx(0.5 * 0.75));
}

TEST_CASE("degenerate zero capture probability gives P0 = 1") {
  GlmFit fit;
  fit.class_probs = {0.0};
  fit.coefficients = {logit(kProbClamp)};
  CHECK(p0_from_fit(fit, Design::constant(4), 4) == 1.0);
}

TEST_CASE("profile at n = M has no binomial contribution") {
  const auto data = CaptureMatrix::from_rows(3, {{1, 0, 1}, {0, 1, 1}});
  const Design design = Design::constant(3);
  const auto pts = profile(data, design, data.m(), GridStrategy::Full);
  REQUIRE(pts.size() == 1);
  const auto g = build_grouped(data, design, data.m());
  CHECK(pts[0].loglik == Catch::Approx(irls_fit(g).loglik));
}

TEST_CASE("Mb profile matches the brute-force likelihood oracle") {
  const auto data = CaptureMatrix::from_rows(2, {{0, 1}, {1, 0}, {1, 1}});
  oracle::ProfileOracle ref(oracle::Model::Mb, unpack(data), 2, /*refine=*/true);
  const auto pts =
      profile(data, Design::factor(named_partition(NamedModel::Mb, 2)), 30, GridStrategy::Full);
  for (const auto& p : pts) {
    INFO("n = " << p.n);
    CHECK(std::abs(p.loglik - ref.loglik(p.n)) < 1e-6);
  }
}

TEST_CASE("maximize: tie toward smaller n, singleton grid") {
  std::vector<ProfilePoint> pts(3);
  pts[0].n = 10;
  pts[0].loglik = -5.0;
  pts[1].n = 11;
  pts[1].loglik = -5.0;
  pts[2].n = 12;
  pts[2].loglik = -7.0;
  const auto r = maximize(pts, 1);
  CHECK(r.n_hat == 10);
  CHECK_FALSE(r.failure);
  CHECK(r.aic == Catch::Approx(10.0 + 2.0 * 2));

  std::vector<ProfilePoint> single(1);
  single[0].n = 7;
  single[0].loglik = -1.0;
  CHECK(maximize(single, 1).n_hat == 7);
  CHECK_FALSE(maximize(single, 1).failure);
}

TEST_CASE("fit_model on a tiny dataset attains the oracle maximum") {
  const auto data = CaptureMatrix::from_rows(2, {{0, 1}, {1, 0}, {1, 1}});
  FitOptions opts;
  opts.n_upp = 30;
  opts.grid = GridStrategy::Full;
  const auto fit = fit_model(data, ModelSpec::parse("mb"), opts);
  oracle::ProfileOracle ref(oracle::Model::Mb, unpack(data), 2, /*refine=*/true);
  double best = -std::numeric_limits<double>::infinity();
  for (std::int64_t n = 3; n <= 30; ++n) best = std::max(best, ref.loglik(n));
  CHECK(std::abs(fit.loglik - best) < 1e-6);
}

TEST_CASE("maximize skips errored points") {
  std::vector<ProfilePoint> pts(3);
  pts[0].n = 5;
  pts[0].loglik = -2.0;
  pts[1].n = 6;
  pts[1].error = "synthetic failure";
  pts[2].n = 7;
  pts[2].loglik = -3.0;
  CHECK(maximize(pts, 1).n_hat == 5);
}

TEST_CASE("maximize flags failure on the grid edge") {
  std::vector<ProfilePoint> pts(3);
  for (int i = 0; i < 3; ++i) {
    pts[i].n = 10 + i;
    pts[i].loglik = double(i);  // strictly increasing
  }
  CHECK(maximize(pts, 1).failure);
}

TEST_CASE("profile CI: quadratic shape gives the chi-square half width") {
  const double c = 0.01;  // curvature
  const std::int64_t n0 = 200;
  std::vector<ProfilePoint> pts;
  for (std::int64_t n = 100; n <= 300; ++n) {
    ProfilePoint p;
    p.n = n;
    p.loglik = -c * double(n - n0) * double(n - n0);
    pts.push_back(p);
  }
  const auto ci = profile_ci(pts, 0.95);
  const double half = std::sqrt(3.841 / (2.0 * c));
  CHECK(std::abs(double(n0 - ci.lo) - half) <= 1.0);
  CHECK(std::abs(double(ci.hi - n0) - half) <= 1.0);
}

TEST_CASE("profile CI: a flat profile spans the whole grid") {
  std::vector<ProfilePoint> pts;
  for (std::int64_t n = 5; n <= 40; ++n) {
    ProfilePoint p;
    p.n = n;
    p.loglik = -3.0;
    pts.push_back(p);
  }
  const auto ci = profile_ci(pts, 0.95);
  CHECK(ci.lo == 5);
  CHECK(ci.hi == 40);  // the upper grid edge stands in for an unbounded set
}

TEST_CASE("grouped cell dump is readable CSV") {
  const auto data = CaptureMatrix::from_rows(2, {{1, 0}, {0, 1}});
  const auto g = build_grouped(data, Design::linear(Quantifier::g(), 2), 4);
  std::ostringstream os;
  write_grouped_csv(os, g);
  CHECK(os.str().find("key,class,successes,trials,unobserved_weight") == 0);
}

TEST_CASE("chi-square thresholds are the hard-coded table") {
  CHECK(chi2_quantile_1df(0.95) == 3.841);
  CHECK(chi2_quantile_1df(0.90) == 2.706);
  CHECK(chi2_quantile_1df(0.99) == 6.635);
  CHECK_THROWS_AS(chi2_quantile_1df(0.93), std::invalid_argument);
}

TEST_CASE("log C(n,M) by log-gamma matches exact integer binomials") {
  for (std::int64_t n = 1; n <= 40; ++n) {
    std::vector<long double> row(static_cast<size_t>(n) + 1, 1.0L);
    // Pascal row, exact in long double for n <= 40
    for (std::int64_t i = 1; i <= n; ++i)
      for (std::int64_t j = i - 1; j >= 1; --j) row[j] += row[j - 1];
    for (std::int64_t m = 0; m <= n; ++m) {
      const double exact = std::log(double(row[static_cast<size_t>(m)]));
      CHECK(std::abs(log_binom(n, m) - exact) < 1e-10);
    }
  }
}

TEST_CASE("AIC parameter counts follow the d + 1 convention") {
  const auto data = CaptureMatrix::from_rows(
      8, {{1, 0, 0, 1, 0, 0, 1, 0}, {0, 1, 1, 0, 0, 1, 0, 0}, {1, 1, 0, 0, 1, 0, 0, 1}});
  FitOptions opts;
  opts.n_upp = 60;
  CHECK(fit_model(data, ModelSpec::parse("mz"), opts).params == 3);
  CHECK(fit_model(data, ModelSpec::parse("mt"), opts).params == 9);
  CHECK(fit_model(data, ModelSpec::parse("m0"), opts).params == 2);
  CHECK(fit_model(data, ModelSpec::parse("mc:2"), opts).params == 5);
  CHECK(fit_model(data, ModelSpec::parse("mcb:2"), opts).params == 6);
}

TEST_CASE("shared-H1 models agree on n_hat and the profile interval") {
  std::mt19937_64 rng(4711);
  const std::vector<std::string> specs = {"mb", "mcb:1", "mcb:2", "mcount",
                                          "cut:g:" + Rational(1, 32).to_string()};
  for (int rep = 0; rep < 5; ++rep) {
    const auto data = random_matrix(5, 8 + int(rng() % 6), rng);
    FitOptions opts;
    opts.n_upp = 150;
    opts.grid = GridStrategy::Full;
    std::vector<FitResult> fits;
    for (const auto& s : specs) fits.push_back(fit_model(data, ModelSpec::parse(s), opts));
    for (size_t i = 1; i < fits.size(); ++i) {
      INFO("model " << specs[i] << " vs mb, rep " << rep);
      CHECK(fits[i].n_hat == fits[0].n_hat);
      CHECK(fits[i].ci_lo == fits[0].ci_lo);
      CHECK(fits[i].failure == fits[0].failure);
      CHECK(fits[i].ci_hi.has_value() == fits[0].ci_hi.has_value());
      if (fits[i].ci_hi && fits[0].ci_hi) CHECK(*fits[i].ci_hi == *fits[0].ci_hi);
    }
    // profile difference is constant in n
    const auto pa = profile(data, Design::factor(named_partition(NamedModel::Mb, 5)), 60,
                            GridStrategy::Full);
    const auto pb = profile(data, Design::factor(named_partition(NamedModel::Mcount, 5)), 60,
                            GridStrategy::Full);
    const double c0 = pa[0].loglik - pb[0].loglik;
    for (size_t i = 1; i < pa.size(); ++i)
      CHECK(std::abs((pa[i].loglik - pb[i].loglik) - c0) < 1e-9);
  }
}

TEST_CASE("stationarity: n_hat tracks M / (1 - P0) at interior maxima") {
  // sparse model-generated data so the profile peaks strictly inside the grid
  int interior = 0;
  for (int rep = 0; rep < 12; ++rep) {
    GeneratorSpec gen{ModelSpec::parse("mz"), {-1.2, 1.0}, 80, 5,
                      static_cast<std::uint64_t>(rep)};
    const auto data = generate(gen);
    if (data.m() < 2) continue;
    FitOptions opts;
    opts.n_upp = 600;
    opts.grid = GridStrategy::Full;
    for (const auto& s : {"m0", "mz", "mc:1"}) {
      const auto fit = fit_model(data, ModelSpec::parse(s), opts);
      if (fit.failure || fit.n_hat == data.m()) continue;
      ++interior;
      const double target = double(data.m()) / (1.0 - fit.p0);
      INFO("model " << s << " rep " << rep << " n_hat " << fit.n_hat << " target " << target);
      CHECK(std::abs(double(fit.n_hat) - target) <= 1.0);
    }
  }
  CHECK(interior > 10);
}

TEST_CASE("coarse-fine grid agrees with the full scan") {
  std::mt19937_64 rng(31337);
  for (int rep = 0; rep < 4; ++rep) {
    const auto data = random_matrix(6, 12, rng);
    for (const auto& s : {"mz", "mb", "mc:1"}) {
      FitOptions full;
      full.n_upp = 500;
      full.grid = GridStrategy::Full;
      FitOptions coarse = full;
      coarse.grid = GridStrategy::CoarseFine;
      const auto a = fit_model(data, ModelSpec::parse(s), full);
      const auto b = fit_model(data, ModelSpec::parse(s), coarse);
      INFO("model " << s << " rep " << rep);
      CHECK(a.n_hat == b.n_hat);
      CHECK(a.ci_lo == b.ci_lo);
      CHECK(a.ci_hi.has_value() == b.ci_hi.has_value());
      if (a.ci_hi && b.ci_hi) CHECK(*a.ci_hi == *b.ci_hi);
      CHECK(a.loglik == Catch::Approx(b.loglik).margin(1e-12));
    }
  }
}

TEST_CASE("likelihood failure: trap-happy data pushes Mb to the grid edge") {
  // units captured late and then always recaptured: recapture rate 1,
  // first-capture rate low, so the Mb profile increases in n
  std::vector<std::vector<int>> rows(10, {0, 0, 1, 1});
  const auto data = CaptureMatrix::from_rows(4, rows);
  FitOptions opts;
  opts.n_upp = 300;
  opts.grid = GridStrategy::Full;
  const auto fit = fit_model(data, ModelSpec::parse("mb"), opts);
  CHECK(fit.failure);
  CHECK(fit.n_hat == 300);
  CHECK_FALSE(fit.ci_hi.has_value());
  // the profile really is increasing at the edge
  const auto pts = profile(data, Design::factor(named_partition(NamedModel::Mb, 4)), 300,
                           GridStrategy::Full);
  CHECK(pts.back().loglik > pts[pts.size() - 2].loglik);
}

TEST_CASE("fit result serializes with the documented schema") {
  const auto data = CaptureMatrix::from_rows(3, {{1, 0, 1}, {0, 1, 1}, {1, 1, 0}});
  FitOptions opts;
  opts.n_upp = 50;
  const auto fit = fit_model(data, ModelSpec::parse("mb"), opts);
  const auto j = to_json(fit);
  for (const char* key :
       {"model", "n_hat", "coefficients", "p0", "loglik", "aic", "ci", "failure", "params"})
    CHECK(j.contains(key));
  CHECK(j["ci"].size() == 2);
}
