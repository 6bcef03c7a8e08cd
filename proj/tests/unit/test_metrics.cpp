#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "snrdet/error.hpp"
#include "snrdet/metrics.hpp"
#include "snrdet/rng.hpp"

using namespace snrdet;
using doctest::Approx;

TEST_SUITE("metrics") {
  TEST_CASE("confusion examples") {
    const std::vector<int> labels{1, 0, 1, 0};
    const auto all_right = confusion({true, false, true, false}, labels);
    CHECK(all_right.fp == 0);
    CHECK(all_right.fn == 0);
    CHECK(all_right.tp == 2);
    const std::vector<int> pos(5, 1);
    CHECK(confusion(std::vector<bool>(5, false), pos).fn == 5);
    CHECK_THROWS_AS(confusion({true}, labels), InvalidArgument);
  }

  TEST_CASE("confusion matches a loop count") {
    Rng rng(1, {0});
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<bool> d;
      std::vector<int> y;
      for (int i = 0; i < 200; ++i) {
        d.push_back(rng.uniform() < 0.5);
        y.push_back(rng.uniform() < 0.3 ? 1 : 0);
      }
      std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] && y[i] == 1) ++tp;
        if (d[i] && y[i] == 0) ++fp;
        if (!d[i] && y[i] == 0) ++tn;
        if (!d[i] && y[i] == 1) ++fn;
      }
      const auto c = confusion(d, y);
      CHECK(c.tp == tp);
      CHECK(c.fp == fp);
      CHECK(c.tn == tn);
      CHECK(c.fn == fn);
      CHECK(c.total() == 200);
    }
  }

  TEST_CASE("hand-computed summary") {
    const ConfusionCounts c{95, 5, 90, 10};
    const auto s = summary(c, {}, {});
    CHECK(*s.precision == Approx(0.95));
    CHECK(*s.recall == Approx(95.0 / 105.0));
    CHECK(std::abs(*s.recall - 0.9048) < 1e-4);
    CHECK(std::abs(*s.f1 - 0.9268) < 1e-4);
    CHECK(*s.weighted_accuracy == Approx((95.0 / 105.0 + 90.0 / 95.0) / 2.0));
    CHECK(*s.geometric_mean == Approx(std::sqrt(0.95 * 95.0 / 105.0)));
    CHECK_FALSE(s.loss);
  }

  TEST_CASE("perfect detector") {
    const std::vector<double> scores{1.0, 0.0, 1.0};
    const std::vector<int> labels{1, 0, 1};
    const auto s = summary(confusion({true, false, true}, labels), scores, labels);
    CHECK(*s.weighted_accuracy == 1.0);
    CHECK(*s.precision == 1.0);
    CHECK(*s.recall == 1.0);
    CHECK(*s.f1 == 1.0);
    CHECK(*s.loss <= -std::log(1.0 - 1e-7) + 1e-12);
  }

  TEST_CASE("equal precision and recall") {
    const auto s = summary(ConfusionCounts{5, 5, 0, 5}, {}, {});
    CHECK(*s.f1 == Approx(0.5));
  }

  TEST_CASE("undefined metrics are absent") {
    const auto s = summary(ConfusionCounts{0, 0, 10, 0}, {}, {});
    CHECK_FALSE(s.precision);
    CHECK_FALSE(s.recall);
    CHECK_FALSE(s.f1);
    CHECK_FALSE(s.weighted_accuracy);
    CHECK(std::isnan(weighted_accuracy_or_nan(ConfusionCounts{0, 0, 10, 0})));
    CHECK(summary_json(s).find("\"precision\":null") != std::string::npos);
  }

  TEST_CASE("harmonic, geometric and arithmetic means are ordered") {
    Rng rng(2, {0});
    for (int i = 0; i < 500; ++i) {
      const ConfusionCounts c{1 + rng.below(100), rng.below(100), rng.below(100), rng.below(100)};
      const auto s = summary(c, {}, {});
      CHECK(*s.f1 <= *s.geometric_mean + 1e-15);
      CHECK(*s.geometric_mean <= (*s.precision + *s.recall) / 2.0 + 1e-15);
    }
  }

  TEST_CASE("permutation does not change metrics") {
    Rng rng(3, {0});
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 100; ++i) {
      scores.push_back(rng.uniform());
      labels.push_back(rng.uniform() < 0.4 ? 1 : 0);
    }
    auto decide = [](const std::vector<double>& sc) {
      std::vector<bool> d;
      for (double v : sc) d.push_back(v > 0.5);
      return d;
    };
    const auto a = summary(confusion(decide(scores), labels), scores, labels);
    std::vector<std::size_t> idx(100);
    for (std::size_t i = 0; i < 100; ++i) idx[i] = (i * 37) % 100;
    std::vector<double> ps;
    std::vector<int> pl;
    for (auto i : idx) {
      ps.push_back(scores[i]);
      pl.push_back(labels[i]);
    }
    const auto b = summary(confusion(decide(ps), pl), ps, pl);
    CHECK(*a.loss == Approx(*b.loss).epsilon(1e-14));
    CHECK(*a.f1 == *b.f1);
    CHECK(*a.weighted_accuracy == *b.weighted_accuracy);
  }
}
