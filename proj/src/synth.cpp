#include "snrdet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "snrdet/butterworth.hpp"
#include "snrdet/dsp.hpp"
#include "snrdet/error.hpp"
#include "snrdet/mixer.hpp"
#include "snrdet/rng.hpp"

namespace snrdet {
namespace {

using json = nlohmann::json;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kHarmonicCeilingHz = 3800.0;

std::size_t clip_samples(double duration_s) {
  return static_cast<std::size_t>(std::llround(duration_s * kModelSampleRate));
}

double raised_cosine(double x) { return 0.5 - 0.5 * std::cos(std::numbers::pi * x); }

double call_total_s(const CallSpec& s) {
  return s.pulse_count * s.pulse_duration_s + (s.pulse_count - 1) * s.inter_pulse_s;
}

void validate(const CallSpec& s) {
  if (s.pulse_count < 1) throw InvalidArgument("call: pulse_count must be >= 1");
  if (!(s.pulse_duration_s > 0.0)) throw InvalidArgument("call: pulse_duration_s must be positive");
  if (!(s.inter_pulse_s > 0.01)) throw InvalidArgument("call: inter_pulse_s must exceed 0.01 s");
  for (double f : {s.f_start, s.f_end})
    if (!(f >= kAnalysisBandLoHz && f <= kAnalysisBandHiHz))
      throw InvalidArgument("call: sweep frequencies must lie within 400-4000 Hz");
  if (!(s.attack >= 0.0 && s.decay >= 0.0 && s.attack + s.decay <= 1.0))
    throw InvalidArgument("call: attack and decay fractions must be >= 0 and sum to <= 1");
  if (!(s.harmonic_gain >= 0.0 && s.harmonic_gain <= 1.0))
    throw InvalidArgument("call: harmonic_gain must be within [0, 1]");
  if (call_total_s(s) > kModelClipSeconds + 1e-12)
    throw InvalidArgument("call: total duration exceeds 0.66 s");
}

void validate(const NoiseSpec& s) {
  if (!(s.intensity > 0.0) || !std::isfinite(s.intensity))
    throw InvalidArgument("noise: intensity must be positive");
  switch (s.kind) {
    case NoiseKind::Rain:
      if (!(s.impulse_rate_hz > 0.0 && s.impulse_rate_hz <= 1000.0))
        throw InvalidArgument("noise: rain impulse_rate_hz must be within (0, 1000]");
      if (!(s.rain_bed_db <= 0.0 && s.rain_bed_db >= -80.0))
        throw InvalidArgument("noise: rain_bed_db must be within [-80, 0]");
      break;
    case NoiseKind::Wind:
      if (!(s.wind_corner_hz >= 10.0 && s.wind_corner_hz <= 1000.0))
        throw InvalidArgument("noise: wind_corner_hz must be within [10, 1000]");
      break;
    case NoiseKind::Biophony:
      if (s.burst_count != 0 && (s.burst_count < 2 || s.burst_count > 5))
        throw InvalidArgument("noise: burst_count must be 0 or within [2, 5]");
      break;
  }
}

std::vector<double> rain(const NoiseSpec& s, std::size_t n, Rng& rng) {
  const double fs = kModelSampleRate;
  std::vector<double> x(n);
  const double bed = std::pow(10.0, s.rain_bed_db / 20.0);
  for (auto& v : x) v = bed * rng.normal();
  double t = rng.exponential(s.impulse_rate_hz);
  const double duration = static_cast<double>(n) / fs;
  while (t < duration) {
    const double amp = std::exp(0.5 * rng.normal());
    const double tau = rng.uniform(0.001, 0.003);
    const auto start = static_cast<std::size_t>(t * fs);
    const auto len = static_cast<std::size_t>(5.0 * tau * fs);
    for (std::size_t i = 0; i < len && start + i < n; ++i)
      x[start + i] += amp * std::exp(-static_cast<double>(i) / (tau * fs)) * rng.normal();
    t += rng.exponential(s.impulse_rate_hz);
  }
  return x;
}

std::vector<double> wind(const NoiseSpec& s, std::size_t n, Rng& rng) {
  // One-pole low-pass of white noise: flat below the corner, -6 dB/octave above it.
  const double a = std::exp(-kTwoPi * s.wind_corner_hz / kModelSampleRate);
  std::vector<double> x(n);
  const std::size_t settle = static_cast<std::size_t>(20.0 / (1.0 - a)) + 1;
  double y = 0.0;
  for (std::size_t i = 0; i < settle; ++i) y = a * y + rng.normal();
  for (auto& v : x) v = y = a * y + rng.normal();
  return x;
}

std::vector<double> biophony(const NoiseSpec& s, std::size_t n, Rng& rng) {
  const double fs = kModelSampleRate;
  AudioClip white{std::vector<float>(n), kModelSampleRate};
  for (auto& v : white.samples) v = static_cast<float>(rng.normal());
  // Weak bed 12 dB under a unit sine, confined to the burst band.
  const auto bed_filter = SosFilter::butterworth_bandpass(4, 1000.0, 3800.0, kModelSampleRate);
  const std::vector<double> white_d(white.samples.begin(), white.samples.end());
  auto bed = bed_filter.filter(white_d);
  double bed_rms = 0.0;
  for (double v : bed) bed_rms += v * v;
  bed_rms = std::sqrt(bed_rms / static_cast<double>(n));
  const double bed_gain = bed_rms > 0.0 ? 0.25 / std::numbers::sqrt2 / bed_rms : 0.0;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = bed_gain * bed[i];

  const int bursts = s.burst_count ? s.burst_count : 2 + static_cast<int>(rng.below(4));
  const double duration = static_cast<double>(n) / fs;
  for (int b = 0; b < bursts; ++b) {
    const double len = std::min(rng.uniform(0.15, 0.4), duration);
    const double start = rng.uniform(0.0, duration - len);
    const double depth = rng.uniform(50.0, 300.0);
    const double center = rng.uniform(1200.0 + depth, 3600.0 - depth);
    const double rate = rng.uniform(5.0, 20.0);
    const double amp = rng.uniform(0.5, 1.0);
    const double edge = 0.01;
    const auto i0 = static_cast<std::size_t>(start * fs);
    const auto m = static_cast<std::size_t>(len * fs);
    double phase = rng.uniform(0.0, kTwoPi);
    for (std::size_t i = 0; i < m && i0 + i < n; ++i) {
      const double t = static_cast<double>(i) / fs;
      const double f = center + depth * std::sin(kTwoPi * rate * t);
      phase += kTwoPi * f / fs;
      const double env = raised_cosine(std::min({1.0, t / edge, (len - t) / edge}));
      x[i0 + i] += amp * env * std::sin(phase);
    }
  }
  return x;
}

AudioClip scale_to_band_level(std::vector<double> x, double intensity) {
  AudioClip clip{std::vector<float>(x.begin(), x.end()), kModelSampleRate};
  const double level = band_level(clip, kAnalysisBandLoHz, kAnalysisBandHiHz);
  if (level <= kSilenceFloorDb + 1.0) throw NumericalError("noise: generated clip is silent");
  const double g = intensity / std::pow(10.0, level / 20.0);
  for (std::size_t i = 0; i < x.size(); ++i) clip.samples[i] = static_cast<float>(x[i] * g);
  return clip;
}

}  // namespace

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::Rain: return "rain";
    case NoiseKind::Wind: return "wind";
    case NoiseKind::Biophony: return "biophony";
  }
  return "unknown";
}

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "rain") return NoiseKind::Rain;
  if (s == "wind") return NoiseKind::Wind;
  if (s == "biophony") return NoiseKind::Biophony;
  throw InvalidArgument("unknown noise kind '" + s + "'");
}

AudioClip gen_call(const CallSpec& spec) {
  validate(spec);
  const double fs = kModelSampleRate;
  AudioClip clip{std::vector<float>(kModelClipSamples, 0.0f), kModelSampleRate};
  Rng rng(spec.seed, {0x63616c6c});
  const double slack = kModelClipSeconds - call_total_s(spec);
  const double onset = slack > 0.0 ? rng.uniform(0.1 * slack, 0.9 * slack) : 0.0;

  for (int p = 0; p < spec.pulse_count; ++p) {
    const double amp = rng.uniform(0.8, 1.0);
    const double jitter = rng.uniform(0.97, 1.03);
    const double f0 = std::clamp(spec.f_start * jitter, kAnalysisBandLoHz, kAnalysisBandHiHz);
    const double f1 = std::clamp(spec.f_end * jitter, kAnalysisBandLoHz, kAnalysisBandHiHz);
    const double t0 = onset + p * (spec.pulse_duration_s + spec.inter_pulse_s);
    const auto i0 = static_cast<std::size_t>(std::llround(t0 * fs));
    const auto m = static_cast<std::size_t>(std::llround(spec.pulse_duration_s * fs));
    double phase = 0.0;
    for (std::size_t i = 0; i < m && i0 + i < clip.size(); ++i) {
      const double u = static_cast<double>(i) / static_cast<double>(m);
      const double f = f0 + (f1 - f0) * u;
      phase += kTwoPi * f / fs;
      double env = 1.0;
      if (spec.attack > 0.0 && u < spec.attack) env = raised_cosine(u / spec.attack);
      if (spec.decay > 0.0 && u > 1.0 - spec.decay) env = raised_cosine((1.0 - u) / spec.decay);
      const double h = spec.harmonic_gain * std::clamp((kHarmonicCeilingHz - 2.0 * f) / 200.0, 0.0, 1.0);
      clip.samples[i0 + i] =
          static_cast<float>(0.8 * amp * env * (std::sin(phase) + h * std::sin(2.0 * phase)) / (1.0 + spec.harmonic_gain));
    }
  }
  return clip;
}

AudioClip gen_noise(const NoiseSpec& spec, double duration_s) {
  validate(spec);
  if (!(duration_s >= kModelClipSeconds - 1e-9)) throw InvalidArgument("noise: duration must be >= 0.66 s");
  const std::size_t n = clip_samples(duration_s);
  Rng rng(spec.seed, {0x6e6f6973, static_cast<std::uint64_t>(spec.kind)});
  switch (spec.kind) {
    case NoiseKind::Rain: return scale_to_band_level(rain(spec, n, rng), spec.intensity);
    case NoiseKind::Wind: return scale_to_band_level(wind(spec, n, rng), spec.intensity);
    case NoiseKind::Biophony: return scale_to_band_level(biophony(spec, n, rng), spec.intensity);
  }
  throw InvalidArgument("noise: unknown kind");
}

CallSpec random_call_spec(std::uint64_t seed) {
  Rng rng(seed, {0x63737065});
  CallSpec s;
  s.pulse_duration_s = rng.uniform(0.02, 0.045);
  s.inter_pulse_s = rng.uniform(0.03, 0.07);
  s.pulse_count = 4 + static_cast<int>(rng.below(5));
  while (s.pulse_count > 1 && call_total_s(s) > 0.6) --s.pulse_count;
  s.f_start = rng.uniform(1800.0, 3000.0);
  s.f_end = rng.uniform(1000.0, s.f_start - 200.0);
  s.attack = rng.uniform(0.1, 0.25);
  s.decay = rng.uniform(0.2, 0.45);
  s.harmonic_gain = rng.uniform(0.1, 0.4);
  s.seed = rng.next();
  return s;
}

NoiseSpec random_noise_spec(std::uint64_t seed, std::optional<NoiseKind> kind, double level_lo_db,
                            double level_hi_db) {
  if (level_hi_db < level_lo_db) throw InvalidArgument("noise: level window must be well-ordered");
  Rng rng(seed, {0x6e737065});
  NoiseSpec s;
  s.kind = kind ? *kind : static_cast<NoiseKind>(rng.below(3));
  s.intensity = std::pow(10.0, rng.uniform(level_lo_db, level_hi_db) / 20.0);
  s.impulse_rate_hz = rng.uniform(20.0, 80.0);
  s.rain_bed_db = rng.uniform(-36.0, -26.0);
  s.wind_corner_hz = rng.uniform(200.0, 400.0);
  s.burst_count = 2 + static_cast<int>(rng.below(4));
  s.seed = rng.next();
  return s;
}

std::string call_spec_json(const CallSpec& s) {
  json j{{"type", "call"},
         {"pulse_count", s.pulse_count},
         {"pulse_duration_s", s.pulse_duration_s},
         {"inter_pulse_s", s.inter_pulse_s},
         {"f_start", s.f_start},
         {"f_end", s.f_end},
         {"attack", s.attack},
         {"decay", s.decay},
         {"harmonic_gain", s.harmonic_gain},
         {"seed", s.seed}};
  return j.dump();
}

std::string noise_spec_json(const NoiseSpec& s) {
  json j{{"type", "noise"},
         {"kind", to_string(s.kind)},
         {"intensity", s.intensity},
         {"impulse_rate_hz", s.impulse_rate_hz},
         {"rain_bed_db", s.rain_bed_db},
         {"wind_corner_hz", s.wind_corner_hz},
         {"burst_count", s.burst_count},
         {"seed", s.seed}};
  return j.dump();
}

CallSpec call_spec_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    const auto& c = j.contains("call") ? j.at("call") : j;
    CallSpec s;
    s.pulse_count = c.at("pulse_count").get<int>();
    s.pulse_duration_s = c.at("pulse_duration_s").get<double>();
    s.inter_pulse_s = c.at("inter_pulse_s").get<double>();
    s.f_start = c.at("f_start").get<double>();
    s.f_end = c.at("f_end").get<double>();
    s.attack = c.at("attack").get<double>();
    s.decay = c.at("decay").get<double>();
    s.harmonic_gain = c.at("harmonic_gain").get<double>();
    s.seed = c.at("seed").get<std::uint64_t>();
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("call spec: ") + e.what());
  }
}

NoiseSpec noise_spec_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    const auto& c = j.contains("noise") ? j.at("noise") : j;
    NoiseSpec s;
    s.kind = noise_kind_from_string(c.at("kind").get<std::string>());
    s.intensity = c.at("intensity").get<double>();
    s.impulse_rate_hz = c.at("impulse_rate_hz").get<double>();
    s.rain_bed_db = c.at("rain_bed_db").get<double>();
    s.wind_corner_hz = c.at("wind_corner_hz").get<double>();
    s.burst_count = c.at("burst_count").get<int>();
    s.seed = c.at("seed").get<std::uint64_t>();
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("noise spec: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("noise spec: ") + e.what());
  }
}

AudioClip analytic_call(std::uint64_t seed) {
  // Four bursts of five windows; gaps of at least three windows keep burst windows isolated.
  constexpr int kWindow = 80;
  constexpr int kWindows = static_cast<int>(kModelClipSamples) / kWindow;
  Rng rng(seed, {0x616e6163});
  const int slack = kWindows - (4 * 5 + 3 * 3) - 4;  // two windows of margin at either end
  std::vector<int> extra(4, 0);
  for (int i = 0; i < slack; ++i) ++extra[rng.below(4)];
  AudioClip clip{std::vector<float>(kModelClipSamples, 0.0f), kModelSampleRate};
  const double phase = rng.uniform(0.0, kTwoPi);
  int w = 2 + extra[0];
  for (int b = 0; b < 4; ++b) {
    for (int i = w * kWindow; i < (w + 5) * kWindow; ++i)
      clip.samples[static_cast<std::size_t>(i)] =
          static_cast<float>(0.5 * std::sin(kTwoPi * 2000.0 * i / kModelSampleRate + phase));
    w += 5 + 3 + (b + 1 < 4 ? extra[static_cast<std::size_t>(b + 1)] : 0);
  }
  return clip;
}

AudioClip analytic_noise(std::uint64_t seed) {
  Rng rng(seed, {0x616e6e6f});
  std::vector<double> x(kModelClipSamples, 0.0);
  for (int f = 500; f <= 3900; f += 200) {
    const double phase = rng.uniform(0.0, kTwoPi);
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] += std::sin(kTwoPi * f * static_cast<double>(i) / kModelSampleRate + phase);
  }
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  AudioClip clip{std::vector<float>(x.size()), kModelSampleRate};
  for (std::size_t i = 0; i < x.size(); ++i) clip.samples[i] = static_cast<float>(0.5 * x[i] / peak);
  return clip;
}

double analytic_crossing_snr(double threshold_db, double duty) {
  if (!(threshold_db > 0.0)) throw InvalidArgument("analytic: threshold must be positive");
  if (!(duty > 0.0 && duty <= 1.0)) throw InvalidArgument("analytic: duty must be within (0, 1]");
  return 10.0 * std::log10(duty * (std::pow(10.0, threshold_db / 10.0) - 1.0));
}

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "unknown";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "valid") return Split::Valid;
  if (s == "test") return Split::Test;
  throw DataError("unknown split '" + s + "'");
}

std::string LabeledClip::spec_json() const {
  json j{{"noise", json::parse(noise_spec_json(noise))}};
  if (call) {
    j["call"] = json::parse(call_spec_json(*call));
    j["snr"] = snr;
  }
  return j.dump();
}

void LabeledDataset::check_session_disjoint() const {
  std::vector<int> seen(session_split.size(), -1);
  for (const auto& c : clips) {
    if (c.session < 0) throw DataError("dataset: negative session id");
    const auto s = static_cast<std::size_t>(c.session);
    if (s >= seen.size()) seen.resize(s + 1, -1);
    const int split = static_cast<int>(c.split);
    if (seen[s] >= 0 && seen[s] != split)
      throw DataError("dataset: session " + std::to_string(s) + " appears in more than one split");
    seen[s] = split;
  }
}

std::vector<const LabeledClip*> LabeledDataset::in_split(Split split) const {
  std::vector<const LabeledClip*> out;
  for (const auto& c : clips)
    if (c.split == split) out.push_back(&c);
  return out;
}

std::vector<Split> assign_session_splits(std::size_t sessions) {
  if (sessions < 3) throw InvalidArgument("dataset: need at least 3 sessions for train/valid/test");
  const auto share = [&] {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(sessions))));
  };
  const std::size_t n_valid = share();
  const std::size_t n_test = share();
  std::vector<Split> out(sessions, Split::Train);
  // Highest session ids go to test, the ones just below to valid.
  for (std::size_t i = 0; i < n_test; ++i) out[sessions - 1 - i] = Split::Test;
  for (std::size_t i = 0; i < n_valid; ++i) out[sessions - 1 - n_test - i] = Split::Valid;
  return out;
}

LabeledDataset build_experiment_datasets(std::size_t n_pos, std::size_t n_neg, std::size_t sessions,
                                         std::uint64_t seed, const DatasetOptions& options) {
  if (n_pos < 1 || n_neg < 1) throw InvalidArgument("dataset: counts must be >= 1");
  if (!(options.positive_snr_hi >= options.positive_snr_lo))
    throw InvalidArgument("dataset: SNR range must be well-ordered");
  if (options.positive_snr_lo < 10.0) throw InvalidArgument("dataset: positives must be mixed at >= +10 dB");
  LabeledDataset ds;
  ds.session_split = assign_session_splits(sessions);
  ds.clips.reserve(n_pos + n_neg);
  const std::size_t total = n_pos + n_neg;
  for (std::size_t i = 0; i < total; ++i) {
    Rng rng(seed, {0x64617461, i});
    LabeledClip c;
    c.session = static_cast<int>(i % sessions);
    c.split = ds.session_split[static_cast<std::size_t>(c.session)];
    c.noise = random_noise_spec(rng.next(), options.noise_kind);
    const AudioClip noise = gen_noise(c.noise);
    if (i < n_pos) {
      c.label = 1;
      CallSpec spec = random_call_spec(rng.next());
      AudioClip call = gen_call(spec);
      // Keep positives gate-clean so they can be reused as augmentation sources.
      while (!passes_gate(call)) {
        spec = random_call_spec(rng.next());
        call = gen_call(spec);
      }
      c.call = spec;
      c.snr = rng.uniform(options.positive_snr_lo, options.positive_snr_hi);
      c.clip = mix_at_snr(call, noise, MixSpec{c.snr, {}}).mixture;
    } else {
      c.label = 0;
      c.clip = normalize(noise);
    }
    ds.clips.push_back(std::move(c));
  }
  ds.check_session_disjoint();
  return ds;
}

std::vector<AugmentedClip> build_train_augm(const std::vector<AudioClip>& calls,
                                            const std::vector<AudioClip>& noises, double fraction,
                                            double snr_lo, double snr_hi, std::uint64_t seed) {
  if (!(snr_hi >= snr_lo) || !std::isfinite(snr_lo) || !std::isfinite(snr_hi))
    throw InvalidArgument("augm: SNR range must be well-ordered");
  if (!(fraction >= 0.0)) throw InvalidArgument("augm: fraction must be >= 0");
  if (noises.empty()) throw InvalidArgument("augm: no noise clips");
  std::vector<std::size_t> usable;
  std::vector<double> call_levels(calls.size(), 0.0);
  for (std::size_t i = 0; i < calls.size(); ++i) {
    if (!passes_gate(calls[i])) continue;
    usable.push_back(i);
    call_levels[i] = band_level(calls[i], kAnalysisBandLoHz, kAnalysisBandHiHz);
  }
  if (usable.empty()) throw DataError("augm: no gate-passing calls available");
  std::vector<double> noise_levels(noises.size());
  for (std::size_t i = 0; i < noises.size(); ++i)
    noise_levels[i] = band_level(noises[i], kAnalysisBandLoHz, kAnalysisBandHiHz);

  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(calls.size())));
  std::vector<AugmentedClip> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(seed, {0x6175676d, i});
    AugmentedClip a;
    a.call_index = usable[rng.below(usable.size())];
    a.noise_index = rng.below(noises.size());
    a.target_snr = rng.uniform(snr_lo, snr_hi);
    const auto mix = mix_with_levels(calls[a.call_index], call_levels[a.call_index], noises[a.noise_index],
                                     noise_levels[a.noise_index], MixSpec{a.target_snr, {}});
    a.clip = mix.mixture;
    a.gain_db = mix.gain_db();
    out.push_back(std::move(a));
  }
  return out;
}

AugmMode augm_mode_from_string(const std::string& s) {
  if (s == "high") return AugmMode::High;
  if (s == "transition") return AugmMode::Transition;
  if (s == "low") return AugmMode::Low;
  throw InvalidArgument("unknown augmentation mode '" + s + "'");
}

std::pair<double, double> select_augm_range_from_curve(const LogisticParams& fit, AugmMode mode,
                                                       double width_db) {
  if (!(width_db > 0.0)) throw InvalidArgument("augm: width must be positive");
  if (!(fit.k > 0.0 && fit.v > 0.0) || !std::isfinite(fit.x0))
    throw InvalidArgument("augm: invalid fit parameters");
  const auto at = [&](double p) {
    const double x = logistic_inverse(p, fit);
    if (!std::isfinite(x)) throw NumericalError("augm: probability level unreachable on the fitted curve");
    return x;
  };
  switch (mode) {
    case AugmMode::High: {
      const double x = at(0.99);
      return {x, x + width_db};
    }
    case AugmMode::Transition: {
      const double x = at(0.5);
      return {x - width_db / 2.0, x + width_db / 2.0};
    }
    case AugmMode::Low: {
      const double x = at(0.01);
      return {x - width_db, x};
    }
  }
  throw InvalidArgument("augm: unknown mode");
}

}  // namespace snrdet
