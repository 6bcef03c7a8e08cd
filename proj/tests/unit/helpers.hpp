#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "snrdet/audio.hpp"
#include "snrdet/rng.hpp"

namespace testing {

inline snrdet::AudioClip sine(double freq_hz, double amplitude, std::size_t n, int rate = 8000,
                              double phase = 0.0) {
  snrdet::AudioClip c{std::vector<float>(n), rate};
  for (std::size_t i = 0; i < n; ++i)
    c.samples[i] = static_cast<float>(
        amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / rate + phase));
  return c;
}

inline snrdet::AudioClip white(double rms, std::size_t n, std::uint64_t seed, int rate = 8000) {
  snrdet::Rng rng(seed);
  snrdet::AudioClip c{std::vector<float>(n), rate};
  for (auto& v : c.samples) v = static_cast<float>(rms * rng.normal());
  return c;
}

/// Pulses of `on_s` at `amplitude` (1 kHz carrier) separated by `off_s` at `gap_amplitude`.
inline snrdet::AudioClip pulse_train(double on_s, double off_s, double gap_amplitude, std::size_t n,
                                     double amplitude = 1.0, int rate = 8000) {
  snrdet::AudioClip c{std::vector<float>(n), rate};
  const double period = on_s + off_s;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double a = std::fmod(t, period) < on_s ? amplitude : gap_amplitude;
    c.samples[i] = static_cast<float>(a * std::sin(2.0 * std::numbers::pi * 1000.0 * t));
  }
  return c;
}

inline double rms_db(const std::vector<double>& x, std::size_t begin, std::size_t end) {
  double acc = 0.0;
  for (std::size_t i = begin; i < end; ++i) acc += x[i] * x[i];
  return 10.0 * std::log10(acc / static_cast<double>(end - begin));
}

}  // namespace testing
