#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "snrdet/error.hpp"
#include "snrdet/mixer.hpp"
#include "snrdet/synth.hpp"

using namespace snrdet;
using doctest::Approx;

TEST_SUITE("synth_corpus") {
  TEST_CASE("calls have the model clip length and pass the gate") {
    const auto c = gen_call(CallSpec{});
    CHECK(c.sample_rate == 8000);
    CHECK(c.size() == kModelClipSamples);
    CHECK(passes_gate(c));
    for (std::uint64_t s = 1; s <= 20; ++s) CHECK(passes_gate(gen_call(random_call_spec(s))));
  }

  TEST_CASE("call energy stays inside the analysis band") {
    const auto c = gen_call(CallSpec{});
    const double in_band = band_level(c, 400.0, 4000.0);
    CHECK(band_level(c, 50.0, 300.0) < in_band - 30.0);
  }

  TEST_CASE("generators are deterministic") {
    CallSpec cs;
    cs.seed = 5;
    CHECK(gen_call(cs).samples == gen_call(cs).samples);
    for (auto kind : {NoiseKind::Rain, NoiseKind::Wind, NoiseKind::Biophony}) {
      const auto ns = random_noise_spec(9, kind);
      CHECK(gen_noise(ns).samples == gen_noise(ns).samples);
    }
    CallSpec other = cs;
    other.seed = 6;
    CHECK(gen_call(other).samples != gen_call(cs).samples);
  }

  TEST_CASE("invalid specs") {
    CallSpec cs;
    cs.pulse_count = 0;
    CHECK_THROWS_AS(gen_call(cs), InvalidArgument);
    cs = CallSpec{};
    cs.inter_pulse_s = 0.005;
    CHECK_THROWS_AS(gen_call(cs), InvalidArgument);
    cs = CallSpec{};
    cs.pulse_count = 20;
    CHECK_THROWS_AS(gen_call(cs), InvalidArgument);
    NoiseSpec ns;
    CHECK_THROWS_AS(gen_noise(ns, 0.5), InvalidArgument);
    ns.intensity = -1.0;
    CHECK_THROWS_AS(gen_noise(ns), InvalidArgument);
  }

  TEST_CASE("noise families have their fractile structure") {
    NoiseSpec wind;
    wind.kind = NoiseKind::Wind;
    CHECK(fractile_levels(gen_noise(wind)).emergence() < 6.0);
    NoiseSpec rain;
    rain.kind = NoiseKind::Rain;
    rain.impulse_rate_hz = 80.0;
    CHECK(fractile_levels(gen_noise(rain)).emergence() > 10.0);
    NoiseSpec bio;
    bio.kind = NoiseKind::Biophony;
    const auto b = gen_noise(bio);
    const double total = std::pow(10.0, band_level(b, 400.0, 4000.0) / 10.0);
    const double upper = std::pow(10.0, band_level(b, 1000.0, 4000.0) / 10.0);
    CHECK(upper / total >= 0.8);
  }

  TEST_CASE("noise intensity sets the band level") {
    NoiseSpec ns;
    ns.kind = NoiseKind::Wind;
    ns.intensity = 0.05;
    CHECK(band_level(gen_noise(ns), 400.0, 4000.0) == Approx(20.0 * std::log10(0.05)).epsilon(1e-6));
  }

  TEST_CASE("stationary noise negatives fail the gate") {
    for (std::uint64_t s = 1; s <= 10; ++s) {
      CHECK_FALSE(passes_gate(gen_noise(random_noise_spec(s, NoiseKind::Wind))));
      CHECK_FALSE(passes_gate(gen_noise(random_noise_spec(s, NoiseKind::Biophony))));
    }
  }

  TEST_CASE("spec json round trip") {
    const auto cs = random_call_spec(4);
    const auto back = call_spec_from_json(call_spec_json(cs));
    CHECK(gen_call(back).samples == gen_call(cs).samples);
    const auto ns = random_noise_spec(4, NoiseKind::Rain);
    CHECK(gen_noise(noise_spec_from_json(noise_spec_json(ns))).samples == gen_noise(ns).samples);
    CHECK(noise_kind_from_string(to_string(NoiseKind::Biophony)) == NoiseKind::Biophony);
    CHECK_THROWS_AS(noise_kind_from_string("thunder"), InvalidArgument);
  }

  TEST_CASE("three sessions give one session per split") {
    const auto splits = assign_session_splits(3);
    CHECK(std::set<Split>(splits.begin(), splits.end()).size() == 3);
    CHECK_THROWS_AS(assign_session_splits(2), InvalidArgument);
    const auto ten = assign_session_splits(10);
    CHECK(std::count(ten.begin(), ten.end(), Split::Test) == 2);
    CHECK(std::count(ten.begin(), ten.end(), Split::Valid) == 2);
  }

  TEST_CASE("datasets are balanced and session-disjoint") {
    const auto ds = build_experiment_datasets(30, 20, 5, 7);
    CHECK(ds.clips.size() == 50);
    CHECK(std::count_if(ds.clips.begin(), ds.clips.end(), [](const auto& c) { return c.label == 1; }) == 30);
    ds.check_session_disjoint();
    std::map<int, std::set<Split>> seen;
    for (const auto& c : ds.clips) {
      seen[c.session].insert(c.split);
      CHECK(c.split == ds.session_split.at(static_cast<std::size_t>(c.session)));
      CHECK(c.clip.size() == kModelClipSamples);
      if (c.label == 1) {
        CHECK(c.call.has_value());
        CHECK(c.snr >= 10.0);
      }
    }
    for (const auto& [session, splits] : seen) CHECK(splits.size() == 1);
    CHECK(ds.in_split(Split::Train).size() + ds.in_split(Split::Valid).size() + ds.in_split(Split::Test).size() == 50);
    CHECK_THROWS_AS(build_experiment_datasets(0, 5, 5, 1), InvalidArgument);
    CHECK_THROWS_AS(build_experiment_datasets(5, 5, 2, 1), InvalidArgument);
  }

  TEST_CASE("leaking datasets are detected") {
    auto ds = build_experiment_datasets(4, 4, 3, 1);
    ds.clips[0].split = ds.clips[0].split == Split::Train ? Split::Test : Split::Train;
    CHECK_THROWS_AS(ds.check_session_disjoint(), DataError);
  }

  TEST_CASE("datasets are deterministic") {
    const auto a = build_experiment_datasets(6, 6, 3, 2), b = build_experiment_datasets(6, 6, 3, 2);
    for (std::size_t i = 0; i < a.clips.size(); ++i) CHECK(a.clips[i].clip.samples == b.clips[i].clip.samples);
  }

  TEST_CASE("augmentation respects the configured ranges") {
    std::vector<AudioClip> calls, noises;
    for (std::uint64_t s = 0; s < 10; ++s) {
      calls.push_back(gen_call(random_call_spec(s)));
      noises.push_back(gen_noise(random_noise_spec(s)));
    }
    for (auto [lo, hi] : {std::pair{0.0, 10.0}, std::pair{-16.0, -6.0}, std::pair{-36.0, -26.0}}) {
      const auto augm = build_train_augm(calls, noises, 0.2, lo, hi, 3);
      CHECK(augm.size() == 2);
      for (const auto& a : augm) {
        CHECK(a.target_snr >= lo);
        CHECK(a.target_snr <= hi);
        AudioClip scaled = calls[a.call_index];
        for (auto& v : scaled.samples) v = static_cast<float>(v * std::pow(10.0, a.gain_db / 20.0));
        const double realized = band_level(scaled, 400.0, 4000.0) - band_level(noises[a.noise_index], 400.0, 4000.0);
        CHECK(realized >= lo - 0.01);
        CHECK(realized <= hi + 0.01);
      }
    }
    CHECK(build_train_augm(calls, noises, 0.25, 0.0, 10.0, 3).size() == 3);
    CHECK_THROWS_AS(build_train_augm(calls, noises, 0.2, 5.0, 0.0, 3), InvalidArgument);
    std::vector<AudioClip> flat{gen_noise(random_noise_spec(1, NoiseKind::Wind))};
    CHECK_THROWS_AS(build_train_augm(flat, noises, 1.0, 0.0, 10.0, 3), DataError);
  }

  TEST_CASE("augmentation windows from a fitted curve") {
    const auto t = select_augm_range_from_curve({-11.0, 0.5, 1.0}, AugmMode::Transition);
    CHECK(t.first == Approx(-16.0));
    CHECK(t.second == Approx(-6.0));
    const LogisticParams steep{-11.0, 2.0, 1.0};
    const auto steep_high = select_augm_range_from_curve(steep, AugmMode::High);
    const auto steep_mid = select_augm_range_from_curve(steep, AugmMode::Transition);
    CHECK(steep_high.first > steep_mid.first);
    CHECK(steep_high.second > steep_mid.second);
    const LogisticParams conf0_like{-8.1, 0.58, 2.2};
    const auto h = select_augm_range_from_curve(conf0_like, AugmMode::High);
    const auto m = select_augm_range_from_curve(conf0_like, AugmMode::Transition);
    const auto l = select_augm_range_from_curve(conf0_like, AugmMode::Low);
    CHECK(l.second <= m.first);
    CHECK(m.second <= h.first);
    CHECK(h.first == Approx(logistic_inverse(0.99, conf0_like)));
    CHECK(l.second == Approx(logistic_inverse(0.01, conf0_like)));
    CHECK(augm_mode_from_string("low") == AugmMode::Low);
    CHECK_THROWS_AS(augm_mode_from_string("middle"), InvalidArgument);
  }
}
