#include <doctest.h>

#include <cmath>
#include <string>

#include "snrdet/error.hpp"
#include "snrdet/psychometric.hpp"
#include "snrdet/rng.hpp"
#include "snrdet/synth.hpp"

using namespace snrdet;
using doctest::Approx;

namespace {

// Binomial draws from a known curve over the -30..10 dB grid.
std::vector<CurvePoint> sample_curve(const LogisticParams& truth, std::size_t n, std::uint64_t seed,
                                     double lo = -30.0, double hi = 10.0) {
  std::vector<CurvePoint> pts;
  Rng rng(seed, {3});
  for (double s = lo; s <= hi + 1e-9; s += 1.0) {
    const double p = logistic_p(s, truth);
    CurvePoint c{s, 0, n, {}};
    for (std::size_t i = 0; i < n; ++i) c.successes += rng.uniform() < p ? 1 : 0;
    pts.push_back(c);
  }
  return pts;
}

std::vector<CurvePoint> exact_curve(const LogisticParams& truth, std::size_t n) {
  std::vector<CurvePoint> pts;
  for (double s = -30.0; s <= 10.0; s += 1.0) {
    pts.push_back({s, static_cast<std::size_t>(std::llround(n * logistic_p(s, truth))), n, {}});
  }
  return pts;
}

}  // namespace

TEST_SUITE("psychometric") {
  TEST_CASE("logistic at the inflection parameter") {
    for (double v : {0.5, 1.0, 1.6, 3.0}) CHECK(logistic_p(-4.0, {-4.0, 0.7, v}) == Approx(std::pow(2.0, -v)).epsilon(1e-15));
    CHECK(logistic_p(-4.0, {-4.0, 0.7, 1.0}) == 0.5);
    CHECK(logistic_p(1e6, {0.0, 1.0, 2.0}) == 1.0);
    CHECK(logistic_p(-1e6, {0.0, 1.0, 2.0}) == 0.0);
    CHECK(log_logistic_p(-1e3, {0.0, 1.0, 2.0}) == Approx(-2000.0));
    CHECK_THROWS_AS(logistic_p(0.0, {0.0, 0.0, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(logistic_p(0.0, {0.0, 1.0, -1.0}), InvalidArgument);
  }

  TEST_CASE("logistic matches an extended-precision evaluation") {
    const LogisticParams f{-10.1, 0.48, 1.6};
    const long double e = std::exp(-0.48L * (0.0L + 10.1L));
    const long double expected = std::pow(1.0L + e, -1.6L);
    CHECK(std::abs(logistic_p(0.0, f) - static_cast<double>(expected)) < 1e-12);
  }

  TEST_CASE("logistic is monotone in snr and x0") {
    Rng rng(8, {0});
    for (int trial = 0; trial < 200; ++trial) {
      const LogisticParams f{rng.uniform(-30, 10), rng.uniform(0.05, 3.0), rng.uniform(0.2, 5.0)};
      const double s = rng.uniform(-40, 20), d = rng.uniform(0.01, 2.0);
      const double p = logistic_p(s, f);
      if (p > 1e-12 && p < 1.0 - 1e-12) {
        CHECK(logistic_p(s + d, f) > p);
        CHECK(logistic_p(s, {f.x0 + d, f.k, f.v}) < p);
      }
    }
  }

  TEST_CASE("slope and inverse") {
    const LogisticParams f{-8.0, 0.5, 2.0};
    for (double p : {0.01, 0.3, 0.5, 0.9, 0.999}) CHECK(logistic_p(logistic_inverse(p, f), f) == Approx(p).epsilon(1e-12));
    const double s = -5.0, h = 1e-5;
    CHECK(logistic_slope(s, f) == Approx((logistic_p(s + h, f) - logistic_p(s - h, f)) / (2 * h)).epsilon(1e-7));
    CHECK_THROWS_AS(logistic_inverse(1.0, f), InvalidArgument);
  }

  TEST_CASE("fit recovers the generator's snr_50") {
    const LogisticParams truth{-8.0, 0.5, 2.0};
    const auto pts = sample_curve(truth, 1000, 1);
    const auto fit = fit_mle(pts);
    CHECK(fit.starts >= 5);
    CHECK(logistic_inverse(0.5, fit.params) == Approx(logistic_inverse(0.5, truth)).epsilon(0.3 / 6.0));
    CHECK(std::abs(logistic_inverse(0.5, fit.params) - logistic_inverse(0.5, truth)) < 0.3);
  }

  TEST_CASE("step data fits steeply at the step") {
    std::vector<CurvePoint> pts;
    for (double s = -30.0; s <= 10.0; s += 1.0) pts.push_back({s, s > -10.0 ? 100u : 0u, 100, {}});
    const auto fit = fit_mle(pts);
    CHECK(fit.params.k > 2.0);
    CHECK(std::abs(logistic_inverse(0.5, fit.params) - (-9.5)) < 0.5);
  }

  TEST_CASE("symmetric generator curve is reproduced within 0.01") {
    const LogisticParams truth{-12.0, 0.4, 1.0};
    const auto fit = fit_mle(sample_curve(truth, 1000, 2));
    double worst = 0.0;
    for (double s = -30.0; s <= 10.0; s += 0.25) worst = std::max(worst, std::abs(logistic_p(s, fit.params) - logistic_p(s, truth)));
    CHECK(worst < 0.01);
  }

  TEST_CASE("degenerate data is not identifiable") {
    std::vector<CurvePoint> zeros{{-1, 0, 10, {}}, {0, 0, 10, {}}, {1, 0, 10, {}}};
    std::vector<CurvePoint> ones{{-1, 10, 10, {}}, {0, 10, 10, {}}, {1, 10, 10, {}}};
    CHECK_THROWS_AS(fit_mle(zeros), NumericalError);
    CHECK_THROWS_WITH_AS(fit_mle(ones), doctest::Contains("not identifiable"), NumericalError);
    std::vector<CurvePoint> two{{-1, 2, 10, {}}, {0, 5, 10, {}}};
    CHECK_THROWS_AS(fit_mle(two), InvalidArgument);
  }

  TEST_CASE("fitted optimum is local") {
    const auto pts = sample_curve({-10.0, 0.6, 1.5}, 200, 4);
    const auto fit = fit_mle(pts);
    CHECK(fit.nll == Approx(negative_log_likelihood(pts, fit.params)).epsilon(1e-12));
    CHECK(fit_mle_from(pts, fit.params).nll >= fit.nll - 1e-8);
    for (int which = 0; which < 3; ++which) {
      for (double f : {0.99, 1.01}) {
        LogisticParams q = fit.params;
        (which == 0 ? q.x0 : which == 1 ? q.k : q.v) *= f;
        CHECK(negative_log_likelihood(pts, q) >= fit.nll - 1e-8);
      }
    }
  }

  TEST_CASE("shifting snr shifts x0") {
    auto pts = sample_curve({-10.0, 0.6, 1.5}, 300, 5);
    const auto base = fit_mle(pts);
    for (auto& p : pts) p.snr += 7.0;
    const auto moved = fit_mle(pts);
    CHECK(std::abs(moved.params.x0 - base.params.x0 - 7.0) < 0.05);
    CHECK(moved.params.k == Approx(base.params.k).epsilon(0.02));
    CHECK(moved.params.v == Approx(base.params.v).epsilon(0.02));
  }

  TEST_CASE("bootstrap basics") {
    const auto pts = sample_curve({-10.0, 0.6, 1.0}, 100, 6);
    const auto fit = fit_mle(pts);
    const auto one = bootstrap_ci(pts, fit, {1, 3, 1, 0.95});
    CHECK(one.x0.lo == one.x0.hi);
    CHECK(one.snr_50.lo == one.snr_50.hi);
    const auto a = bootstrap_ci(pts, fit, {50, 3, 1, 0.95});
    const auto b = bootstrap_ci(pts, fit, {50, 3, 2, 0.95});
    CHECK(a.x0.lo == b.x0.lo);
    CHECK(a.snr_50.hi == b.snr_50.hi);
    CHECK(a.k.lo == b.k.lo);
    CHECK(a.snr_50.lo <= logistic_inverse(0.5, fit.params));
    CHECK(a.snr_50.hi >= logistic_inverse(0.5, fit.params));
    CHECK_THROWS_AS(bootstrap_ci(pts, fit, {0, 3, 1, 0.95}), InvalidArgument);
  }

  TEST_CASE("bootstrap interval narrows with huge trial counts") {
    const auto pts = sample_curve({-10.0, 0.6, 1.0}, 100000, 7);
    const auto fit = fit_mle(pts);
    const auto ci = bootstrap_ci(pts, fit, {40, 1, 1, 0.95});
    CHECK(ci.snr_50.hi - ci.snr_50.lo < 0.1);
  }

  TEST_CASE("fit-derived metrics") {
    const auto m1 = metrics_from_fit({-11.0, 0.4, 1.0});
    CHECK(m1.snr_50 == Approx(-11.0).epsilon(1e-14));
    CHECK(m1.infl_50 == Approx(0.1).epsilon(1e-14));
    Rng rng(9, {0});
    for (int i = 0; i < 50; ++i) {
      const LogisticParams f{rng.uniform(-25, 5), rng.uniform(0.1, 2.0), rng.uniform(0.3, 4.0)};
      const auto m = metrics_from_fit(f);
      CHECK(logistic_p(m.snr_50, f) == Approx(0.5).epsilon(1e-10));
      const double h = 1e-5;
      CHECK(m.infl_50 == Approx((logistic_p(m.snr_50 + h, f) - logistic_p(m.snr_50 - h, f)) / (2 * h)).epsilon(1e-6));
      REQUIRE(m.snr_lo);
      REQUIRE(m.snr_hi);
      CHECK(*m.snr_lo < m.snr_50);
      CHECK(m.snr_50 < *m.snr_hi);
    }
    CHECK_THROWS_AS(metrics_from_fit({0, 1, 1}, 0.0, 0.9), InvalidArgument);
  }

  TEST_CASE("empirical metrics") {
    const LogisticParams f{-9.0, 0.5, 1.0};
    const auto pts = exact_curve(f, 1000);
    const auto emp = metrics_empirical(pts);
    CHECK(std::abs(emp.snr_50 - metrics_from_fit(f).snr_50) < 0.5);
    CHECK(emp.source == FitMetrics::Source::Empirical);

    std::vector<CurvePoint> step;
    for (double s = -5.0; s <= 5.0; s += 1.0) step.push_back({s, s >= 0.0 ? 10u : 0u, 10, {}});
    CHECK(std::abs(metrics_empirical(step).snr_50 - (-0.5)) <= 1.0);

    std::vector<CurvePoint> low;
    for (double s = -5.0; s <= 5.0; s += 1.0) low.push_back({s, static_cast<std::size_t>(8 * (s + 5.0)), 100, {}});
    const auto partial = metrics_empirical(low);
    CHECK(partial.snr_50 == Approx(1.25));
    CHECK_FALSE(partial.snr_hi);
    CHECK_THROWS_AS(empirical_crossing(low, 0.95), NumericalError);
  }

  TEST_CASE("isotonic smoothing pools violators") {
    std::vector<CurvePoint> pts{{0, 2, 10, {}}, {1, 6, 10, {}}, {2, 4, 10, {}}, {3, 9, 10, {}}};
    const auto r = isotonic_rates(pts);
    CHECK(r == std::vector<double>{0.2, 0.5, 0.5, 0.9});
  }

  TEST_CASE("constant detector gives constant rates") {
    std::vector<AudioClip> calls{gen_call(CallSpec{})};
    std::vector<AudioClip> noises{gen_noise(NoiseSpec{})};
    const auto cp = ClipPool::measure(calls), np = ClipPool::measure(noises);
    const auto grid = build_eval_grid(1, 1, -2.0, 2.0, 1.0, 4, 1);
    const auto yes = measure_curve(ConstantDetector(0.9), grid, cp, np);
    for (const auto& p : yes.points) CHECK(p.rate() == 1.0);
    const auto no = measure_curve(ConstantDetector(0.5), grid, cp, np);
    for (const auto& p : no.points) CHECK(p.rate() == 0.0);
  }

  TEST_CASE("energy detector on analytic stimuli crosses one half at the predicted snr") {
    std::vector<AudioClip> calls, noises;
    for (std::uint64_t i = 0; i < 8; ++i) {
      calls.push_back(analytic_call(i));
      noises.push_back(analytic_noise(100 + i));
    }
    const auto cp = ClipPool::measure(calls), np = ClipPool::measure(noises);
    const auto grid = build_eval_grid(8, 8, -5.0, 15.0, 1.0, 50, 2);
    const double thr = 10.0;
    const auto curve = measure_curve(EnergyDetector(thr), grid, cp, np, {2, {}});
    for (const auto& p : curve.points) CHECK(std::abs(p.rate() * 50 - std::round(p.rate() * 50)) < 1e-9);
    const double predicted = analytic_crossing_snr(thr, kAnalyticDuty);
    CHECK(std::abs(metrics_empirical(curve.points).snr_50 - predicted) < 1.0);
  }

  TEST_CASE("rates are multiples of 1/n") {
    std::vector<AudioClip> calls{gen_call(CallSpec{})};
    std::vector<AudioClip> noises{gen_noise(NoiseSpec{})};
    const auto cp = ClipPool::measure(calls), np = ClipPool::measure(noises);
    const auto grid = build_eval_grid(1, 1, 0.0, 0.0, 1.0, 1000, 1);
    const auto curve = measure_curve(EnergyDetector(5.0), grid, cp, np);
    const double scaled = curve.points[0].rate() * 1000.0;
    CHECK(scaled == Approx(std::round(scaled)).epsilon(1e-12));
  }

  TEST_CASE("failing detector reports the trial") {
    struct Throwing final : Detector {
      Score score(const AudioClip&) const override { throw NumericalError("boom"); }
      std::string name() const override { return "throwing"; }
    };
    std::vector<AudioClip> calls{gen_call(CallSpec{})};
    std::vector<AudioClip> noises{gen_noise(NoiseSpec{})};
    const auto cp = ClipPool::measure(calls, {"callA"}), np = ClipPool::measure(noises, {"noiseB"});
    const auto grid = build_eval_grid(1, 1, 0.0, 0.0, 1.0, 2, 1);
    CHECK_THROWS_WITH_AS(measure_curve(Throwing(), grid, cp, np), doctest::Contains("callA"), DataError);
    CHECK_THROWS_AS(measure_curve(Throwing(), EvalGrid{}, cp, np), InvalidArgument);
  }

  TEST_CASE("json and csv round trips") {
    PsychometricCurve c;
    c.points = sample_curve({-10.0, 0.6, 1.0}, 40, 10, -20.0, 0.0);
    c.fit = fit_mle(c.points);
    const auto back = curve_from_json(curve_json(c));
    REQUIRE(back.points.size() == c.points.size());
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      CHECK(back.points[i].snr == c.points[i].snr);
      CHECK(back.points[i].successes == c.points[i].successes);
      CHECK(back.points[i].trials == c.points[i].trials);
    }
    REQUIRE(back.fit);
    CHECK(back.fit->params.x0 == Approx(c.fit->params.x0).epsilon(1e-12));
    const auto csv_pts = points_from_csv(curve_csv(c));
    REQUIRE(csv_pts.size() == c.points.size());
    for (std::size_t i = 0; i < c.points.size(); ++i) CHECK(csv_pts[i].successes == c.points[i].successes);
    CHECK(points_from_csv("snr,rate,n\n-1,0.25,4\n0,0.5,4\n")[1].successes == 2);
    CHECK_THROWS_AS(points_from_csv("snr,rate,n\n0,0.3,4\n"), DataError);
    CHECK_THROWS_AS(points_from_csv("snr,foo\n0,1\n"), DataError);
    CHECK_THROWS_AS(curve_from_json("{not json"), DataError);
  }
}
