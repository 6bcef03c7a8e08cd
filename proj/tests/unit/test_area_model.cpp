#include <doctest.h>

#include <cmath>
#include <numbers>

#include "snrdet/area_model.hpp"
#include "snrdet/error.hpp"
#include "snrdet/rng.hpp"

using namespace snrdet;
using doctest::Approx;

namespace {

AreaModelParams wind() {
  AreaModelParams p;
  p.fit = {-15.9, 0.40, 1.0};
  return p;
}

AreaModelParams random_params(Rng& rng) {
  AreaModelParams p;
  p.source_level_1m = rng.uniform(70, 100);
  p.noise_level = rng.uniform(20, 60);
  p.fit = {rng.uniform(-30, 5), rng.uniform(0.1, 2.0), rng.uniform(0.3, 4.0)};
  return p;
}

}  // namespace

TEST_SUITE("area_model") {
  TEST_CASE("spherical spreading") {
    CHECK(level_at_distance(85.0, 1.0) == 85.0);
    CHECK(level_at_distance(85.0, 10.0) == Approx(65.0).epsilon(1e-15));
    CHECK(std::abs(level_at_distance(85.0, 2.0) - (85.0 - 6.0206)) < 1e-4);
    CHECK_THROWS_AS(level_at_distance(85.0, 0.5), InvalidArgument);
  }

  TEST_CASE("radius at one half for a symmetric curve") {
    AreaModelParams p = wind();
    CHECK(detection_radius(0.5, p) == Approx(std::pow(10.0, (85.0 - 45.0 + 15.9) / 20.0)).epsilon(1e-12));
    CHECK(std::abs(detection_radius(0.5, p) - 624.0) < 0.5);
    CHECK_THROWS_AS(detection_radius(1.0, p), InvalidArgument);
    CHECK_THROWS_AS(detection_radius(0.0, p), InvalidArgument);
    CHECK_THROWS_AS(detection_area(-0.1, p), InvalidArgument);
  }

  TEST_CASE("radius inverts the psychometric curve") {
    Rng rng(1, {0});
    for (int i = 0; i < 200; ++i) {
      const auto p = random_params(rng);
      const double prob = rng.uniform(0.02, 0.98);
      const double r = detection_radius(prob, p);
      if (r < 1.0) continue;
      CHECK(logistic_p(p.source_level_1m - 20.0 * std::log10(r) - p.noise_level, p.fit) == Approx(prob).epsilon(1e-9));
    }
  }

  TEST_CASE("area is the disc of the radius") {
    Rng rng(2, {0});
    for (int i = 0; i < 200; ++i) {
      const auto p = random_params(rng);
      const double prob = rng.uniform(0.02, 0.98);
      const double r = detection_radius(prob, p);
      CHECK(detection_area(prob, p) == std::numbers::pi * r * r);
      CHECK(detection_area_factored(prob, p) == Approx(std::numbers::pi * r * r).epsilon(1e-12));
    }
  }

  TEST_CASE("one decibel of noise changes the area by 26 and -21 percent") {
    AreaModelParams p = wind(), quieter = wind(), louder = wind();
    quieter.noise_level -= 1.0;
    louder.noise_level += 1.0;
    for (double prob : {0.1, 0.5, 0.9}) {
      CHECK(detection_area(prob, quieter) / detection_area(prob, p) == Approx(1.2589).epsilon(1e-4));
      CHECK(detection_area(prob, louder) / detection_area(prob, p) == Approx(0.7943).epsilon(1e-4));
    }
  }

  TEST_CASE("lower x0 enlarges the area by 41 to 58 percent") {
    AreaModelParams base = wind(), by15 = wind(), by2 = wind();
    by15.fit.x0 -= 1.5;
    by2.fit.x0 -= 2.0;
    CHECK(detection_area(0.5, by15) / detection_area(0.5, base) == Approx(1.413).epsilon(1e-3));
    CHECK(detection_area(0.5, by2) / detection_area(0.5, base) == Approx(1.585).epsilon(1e-3));
  }

  TEST_CASE("noise table") {
    const auto rows = area_vs_noise_table(0.5, wind(), {30.0, 50.0});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].area / rows[1].area == Approx(100.0).epsilon(1e-12));
    CHECK(rows[0].noise_level == 30.0);
    const auto many = area_vs_noise_table(0.7, wind(), {20, 25, 30, 35, 40, 45, 50, 55});
    for (std::size_t i = 1; i < many.size(); ++i) {
      CHECK(many[i].radius < many[i - 1].radius);
      CHECK(many[i].area < many[i - 1].area);
    }
    CHECK_THROWS_AS(area_vs_noise_table(0.5, wind(), {}), InvalidArgument);
    CHECK(area_table_csv(rows).rfind("noise_level,radius_m,area_m2\n30,", 0) == 0);
  }

  TEST_CASE("scale law and monotonicity") {
    Rng rng(3, {0});
    for (int i = 0; i < 100; ++i) {
      auto p = random_params(rng);
      const double prob = rng.uniform(0.05, 0.95), delta = rng.uniform(-20, 20);
      auto shifted = p;
      shifted.noise_level += delta;
      CHECK(detection_radius(prob, shifted) == Approx(detection_radius(prob, p) * std::pow(10.0, -delta / 20.0)).epsilon(1e-12));
      CHECK(detection_radius(prob + 0.01, p) < detection_radius(prob, p));
      auto louder = p;
      louder.source_level_1m += 0.5;
      CHECK(detection_radius(prob, louder) > detection_radius(prob, p));
    }
  }

  TEST_CASE("source level uncertainty triple") {
    const auto r = detection_radius_range(0.5, wind());
    CHECK(r.low < r.mid);
    CHECK(r.mid < r.high);
    CHECK(r.high / r.mid == Approx(std::pow(10.0, 2.0 / 20.0)).epsilon(1e-12));
    const auto a = detection_area_range(0.5, wind());
    CHECK(a.mid == Approx(detection_area(0.5, wind())).epsilon(1e-14));
  }

  TEST_CASE("calibration helpers") {
    CHECK(dbfs_to_spl(-30.0, 110.0) == 80.0);
    CHECK(calibration_offset_from_sensitivity(20e-6) == Approx(0.0).scale(1.0));
    CHECK(calibration_offset_from_sensitivity(0.2) == Approx(80.0).epsilon(1e-12));
    CHECK_THROWS_AS(calibration_offset_from_sensitivity(0.0), InvalidArgument);
  }
}
