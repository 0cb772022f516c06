#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "recap/selection.hpp"
#include "recap/serialize.hpp"
#include "recap/simulation.hpp"

using namespace recap;

namespace {

CaptureMatrix simulated(int t, std::int64_t n, double alpha, double beta, std::uint64_t seed) {
  GeneratorSpec spec{ModelSpec::parse("mz"), {alpha, beta}, n, t, seed};
  return generate(spec);
}

}  // namespace

TEST_CASE("model spec mini-language round trips") {
  CHECK(ModelSpec::parse("mz").label() == "Mz");
  CHECK(ModelSpec::parse("mzgn").label() == "Mzgn");
  CHECK(ModelSpec::parse("mzf").label() == "Mzf");
  CHECK(ModelSpec::parse("mzgt").label() == "Mzgt");
  CHECK(ModelSpec::parse("mc:2").label() == "Mc2");
  CHECK(ModelSpec::parse("mcb:1").label() == "Mc1b");
  CHECK(ModelSpec::parse("ml2").label() == "ML2");
  CHECK(ModelSpec::parse("mcount").label() == "Mcount");
  CHECK(ModelSpec::parse("linear:gaug:2").label() == "Mzgaug2");
  const auto cut = ModelSpec::parse("cut:g:0.25,0.5");
  CHECK(cut.kind == ModelSpec::Kind::Cut);
  CHECK(cut.cuts == std::vector<Rational>{Rational(1, 4), Rational(1, 2)});
  CHECK(cut.label() == "Mz.cut(2)");
  const auto cs = ModelSpec::parse("cutsearch:gn:3");
  CHECK(cs.kind == ModelSpec::Kind::CutSearch);
  CHECK(cs.order == 3);
  CHECK_THROWS_AS(ModelSpec::parse("mq"), std::invalid_argument);
  CHECK_THROWS_AS(ModelSpec::parse("mc:0"), std::invalid_argument);
  CHECK_THROWS_AS(ModelSpec::parse("cut:g:0.5,0.25"), std::invalid_argument);
}

TEST_CASE("ranking sorts by AIC with the tie rule") {
  const auto data = simulated(6, 120, -1.5, 2.5, 11);
  FitOptions opts;
  opts.n_upp = 600;
  const auto report = rank_models(
      data, {ModelSpec::parse("m0"), ModelSpec::parse("mb"), ModelSpec::parse("mz")}, opts);
  REQUIRE(report.rows.size() == 3);
  for (size_t i = 1; i < report.rows.size(); ++i) {
    REQUIRE(report.rows[i].fit.has_value());
    CHECK(report.rows[i - 1].fit->aic <= report.rows[i].fit->aic);
  }
}

TEST_CASE("single candidate gives a one-row report") {
  const auto data = simulated(4, 60, -1.0, 1.0, 5);
  const auto report = rank_models(data, {ModelSpec::parse("m0")}, FitOptions{});
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].fit->model == "M0");
}

TEST_CASE("per-model errors are recorded, not fatal") {
  const auto data = simulated(3, 60, -1.0, 1.0, 5);
  // mcb:2 needs t >= 4
  const auto report =
      rank_models(data, {ModelSpec::parse("m0"), ModelSpec::parse("mcb:2")}, FitOptions{});
  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0].error.empty());
  CHECK_FALSE(report.rows[1].error.empty());
  std::ostringstream os;
  write_ranking_csv(os, report);
  CHECK(os.str().find("error") != std::string::npos);
}

TEST_CASE("forced single cut between two attained values") {
  // only attained g values are 0 and 1
  const auto data = CaptureMatrix::from_rows(2, {{1, 0}, {1, 1}, {1, 1}});
  const auto res = cut_search(data, Quantifier::g(), 1, CutSearchStrategy::Full, FitOptions{});
  REQUIRE(res.cuts.size() == 1);
  CHECK(res.cuts[0] == Rational(1, 4));  // 1/2^t, the zeros-only boundary
  CHECK_THROWS_AS(cut_search(data, Quantifier::g(), 2, CutSearchStrategy::Full, FitOptions{}),
                  std::invalid_argument);
}

TEST_CASE("full search is exhaustively optimal for one cut") {
  const auto data = simulated(5, 80, -1.2, 3.0, 21);
  FitOptions opts;
  opts.n_upp = 200;
  const auto res = cut_search(data, Quantifier::g(), 1, CutSearchStrategy::Full, opts);
  // compare against scoring every attained-value gap directly
  std::set<Rational> vals;
  for (std::int64_t i = 0; i < data.m(); ++i)
    for (int j = 1; j <= data.t(); ++j) vals.insert(quantify_g(data.prefix(i, j)));
  std::vector<Rational> sorted(vals.begin(), vals.end());
  FitOptions score_opts = opts;
  score_opts.compute_ci = false;
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + 1 < sorted.size(); ++i) {
    const Rational cutpoint =
        sorted[i].is_zero() ? Rational(1, 32) : simplest_in_left_closed(sorted[i], sorted[i + 1]);
    const auto fit = fit_model(data, ModelSpec::cut(Quantifier::g(), {cutpoint}), score_opts);
    best = std::min(best, fit.aic);
  }
  CHECK(res.fit.aic == Catch::Approx(best).margin(1e-9));
}

TEST_CASE("adding a cut never lowers the maximized log-likelihood") {
  const auto data = simulated(5, 100, -1.5, 3.5, 33);
  FitOptions opts;
  opts.n_upp = 300;
  const auto one = cut_search(data, Quantifier::g(), 1, CutSearchStrategy::Full, opts);
  const auto two = cut_search(data, Quantifier::g(), 2, CutSearchStrategy::Full, opts);
  const auto three = cut_search(data, Quantifier::g(), 3, CutSearchStrategy::Greedy, opts);
  CHECK(two.fit.loglik >= one.fit.loglik - 1e-9);
  CHECK(three.fit.loglik >= two.fit.loglik - 1e-9);
}

TEST_CASE("reduced strategy runs on a decimated candidate list") {
  const auto data = simulated(6, 100, -1.5, 3.0, 8);
  FitOptions opts;
  opts.n_upp = 300;
  const auto res = cut_search(data, Quantifier::g(), 3, CutSearchStrategy::Reduced, opts);
  CHECK(res.cuts.size() == 3);
  CHECK(res.fit.params == 5);
}

TEST_CASE("a cut below 1/2^t reproduces the Mb population estimate") {
  const auto data = simulated(5, 90, -1.0, 2.0, 3);
  FitOptions opts;
  opts.n_upp = 400;
  opts.grid = GridStrategy::Full;
  const auto mb = fit_model(data, ModelSpec::parse("mb"), opts);
  const auto cut = fit_model(data, ModelSpec::cut(Quantifier::g(), {Rational(1, 32)}), opts);
  CHECK(cut.n_hat == mb.n_hat);
  CHECK(cut.ci_lo == mb.ci_lo);
  CHECK(cut.ci_hi.has_value() == mb.ci_hi.has_value());
}

TEST_CASE("canonical gap representatives") {
  // the ML2 boundary at t=8: simplest rational in [79/127, 80/127)
  CHECK(simplest_in_left_closed(Rational(79, 127), Rational(80, 127)) == Rational(5, 8));
  // around 1/4 at t=8
  CHECK(simplest_in_left_closed(Rational(31, 127), Rational(32, 127)) == Rational(1, 4));
  // an attained value that is itself simplest stays put
  CHECK(simplest_in_left_closed(Rational(4, 7), Rational(73, 127)) == Rational(4, 7));
  CHECK(simplest_in_left_closed(Rational(1, 20), Rational(1, 19)) == Rational(1, 20));
  CHECK(simplest_in_open(Rational(0), Rational(1, 15)) == Rational(1, 16));
}

TEST_CASE("cut search result serializes with cuts and fit") {
  const auto data = simulated(4, 70, -1.0, 2.0, 9);
  const auto res = cut_search(data, Quantifier::g(), 1, CutSearchStrategy::Auto, FitOptions{});
  const auto j = to_json(res);
  CHECK(j.contains("cuts"));
  CHECK(j.contains("cuts_exact"));
  CHECK(j.contains("fit"));
}
