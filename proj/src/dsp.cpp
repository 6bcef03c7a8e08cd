#include "snrdet/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <numeric>
#include <string>

#include "snrdet/error.hpp"

namespace snrdet {
namespace {

constexpr int kBandOrder = 6;

std::vector<double> kaiser_lowpass(std::size_t taps, double cutoff_norm, double beta, double gain) {
  // cutoff_norm is cycles/sample at the filter's own rate.
  std::vector<double> h(taps);
  const double center = static_cast<double>(taps - 1) / 2.0;
  const double i0_beta = std::cyl_bessel_i(0.0, beta);
  for (std::size_t n = 0; n < taps; ++n) {
    const double t = static_cast<double>(n) - center;
    const double arg = 2.0 * cutoff_norm * t;
    const double sinc = t == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
    const double r = t / center;
    const double window = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
    h[n] = gain * 2.0 * cutoff_norm * sinc * window;
  }
  return h;
}

std::vector<double> blackman_harris(int n) {
  // Periodic four-term window.
  std::vector<double> w(static_cast<std::size_t>(n));
  constexpr double a0 = 0.35875, a1 = 0.48829, a2 = 0.14128, a3 = 0.01168;
  for (int i = 0; i < n; ++i) {
    const double x = 2.0 * std::numbers::pi * i / n;
    w[static_cast<std::size_t>(i)] = a0 - a1 * std::cos(x) + a2 * std::cos(2 * x) - a3 * std::cos(3 * x);
  }
  return w;
}

// Mel weights [band][bin], each row summing to one.
struct MelFilterbank {
  std::vector<MelBand> bands;
  std::vector<double> weights;
  std::vector<double> window;
  double window_energy = 0.0;
  fftw_plan plan = nullptr;
  static constexpr int kBins = MelConfig::kFft / 2 + 1;
};

const MelFilterbank& filterbank() {
  static MelFilterbank fb;
  static std::once_flag once;
  std::call_once(once, [] {
    fb.bands = mel_band_edges();
    fb.weights.assign(static_cast<std::size_t>(MelConfig::kBands) * MelFilterbank::kBins, 0.0);
    const double bin_hz = static_cast<double>(kModelSampleRate) / MelConfig::kFft;
    for (int m = 0; m < MelConfig::kBands; ++m) {
      const auto& b = fb.bands[static_cast<std::size_t>(m)];
      double sum = 0.0;
      for (int k = 0; k < MelFilterbank::kBins; ++k) {
        const double f = k * bin_hz;
        const double rise = (f - b.lo_hz) / (b.center_hz - b.lo_hz);
        const double fall = (b.hi_hz - f) / (b.hi_hz - b.center_hz);
        const double w = std::max(0.0, std::min(rise, fall));
        fb.weights[static_cast<std::size_t>(m) * MelFilterbank::kBins + k] = w;
        sum += w;
      }
      if (sum <= 0.0) throw Error("mel filterbank: empty band " + std::to_string(m));
      for (int k = 0; k < MelFilterbank::kBins; ++k) {
        fb.weights[static_cast<std::size_t>(m) * MelFilterbank::kBins + k] /= sum;
      }
    }
    fb.window = blackman_harris(MelConfig::kWindow);
    for (double w : fb.window) fb.window_energy += w * w;
    double* in = fftw_alloc_real(MelConfig::kFft);
    fftw_complex* out = fftw_alloc_complex(MelFilterbank::kBins);
    fb.plan = fftw_plan_dft_r2c_1d(MelConfig::kFft, in, out, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
  });
  return fb;
}

bool upper_edge_is_nyquist(double hi_hz, int sample_rate) {
  return std::abs(hi_hz - sample_rate / 2.0) <= 1e-9 * sample_rate;
}

}  // namespace

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (clip.empty()) throw InvalidArgument("resample: empty clip");
  if (target_rate <= 0) throw InvalidArgument("resample: target rate must be positive");
  if (clip.sample_rate < target_rate) throw InvalidArgument("resample: upsampling is not supported");
  if (clip.sample_rate == target_rate) return clip;

  const long g = std::gcd(static_cast<long>(clip.sample_rate), static_cast<long>(target_rate));
  const long up = target_rate / g;
  const long down = clip.sample_rate / g;
  const double up_rate = static_cast<double>(clip.sample_rate) * up;

  constexpr double kAttenuationDb = 80.0;
  const double beta = 0.1102 * (kAttenuationDb - 8.7);
  const double cutoff_hz = 0.47 * target_rate;
  const double transition_hz = 0.05 * target_rate;
  std::size_t taps = static_cast<std::size_t>(
      std::ceil((kAttenuationDb - 7.95) * up_rate / (14.36 * transition_hz)));
  taps |= 1u;
  const auto h = kaiser_lowpass(taps, cutoff_hz / up_rate, beta, static_cast<double>(up));
  const long center = static_cast<long>(taps - 1) / 2;
  const long n_in = static_cast<long>(clip.size());
  const long n_out = (n_in * up + down - 1) / down;

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(n_out));
  for (long m = 0; m < n_out; ++m) {
    const long t = m * down + center;  // position in the upsampled stream, shifted by the delay
    long i_hi = t / up;
    long i_lo = (t - static_cast<long>(taps) + 1 + up - 1) / up;
    if (t - static_cast<long>(taps) + 1 < 0) i_lo = 0;
    i_lo = std::max(0L, i_lo);
    i_hi = std::min(n_in - 1, i_hi);
    double acc = 0.0;
    for (long i = i_lo; i <= i_hi; ++i) acc += h[static_cast<std::size_t>(t - i * up)] * clip.samples[static_cast<std::size_t>(i)];
    out.samples[static_cast<std::size_t>(m)] = static_cast<float>(acc);
  }
  return out;
}

AudioClip normalize(const AudioClip& clip) {
  if (clip.empty()) throw InvalidArgument("normalize: empty clip");
  float peak = 0.0f;
  for (float s : clip.samples) peak = std::max(peak, std::abs(s));
  if (peak == 0.0f) throw InvalidArgument("normalize: all-zero clip has no defined gain");
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.resize(clip.size());
  if (peak == 1.0f) {
    out.samples = clip.samples;
    return out;
  }
  const double gain = 1.0 / static_cast<double>(peak);
  for (std::size_t i = 0; i < clip.size(); ++i) {
    out.samples[i] = static_cast<float>(static_cast<double>(clip.samples[i]) * gain);
  }
  // Rounding can leave the peak one ulp off; pin it exactly.
  for (std::size_t i = 0; i < clip.size(); ++i) {
    if (std::abs(clip.samples[i]) == peak) out.samples[i] = clip.samples[i] > 0 ? 1.0f : -1.0f;
  }
  return out;
}

double hz_to_mel_slaney(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz < min_log_hz) return hz / f_sp;
  return min_log_mel + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz_slaney(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel < min_log_mel) return mel * f_sp;
  return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

std::vector<MelBand> mel_band_edges() {
  const double lo = hz_to_mel_slaney(MelConfig::kLoHz);
  const double hi = hz_to_mel_slaney(MelConfig::kHiHz);
  std::vector<double> points(MelConfig::kBands + 2);
  for (int i = 0; i < MelConfig::kBands + 2; ++i) {
    points[static_cast<std::size_t>(i)] = mel_to_hz_slaney(lo + (hi - lo) * i / (MelConfig::kBands + 1));
  }
  std::vector<MelBand> bands;
  for (int m = 0; m < MelConfig::kBands; ++m) {
    const auto i = static_cast<std::size_t>(m);
    bands.push_back({points[i], points[i + 1], points[i + 2]});
  }
  return bands;
}

int mel_frame_count(std::size_t samples) {
  if (samples < static_cast<std::size_t>(MelConfig::kWindow)) return 0;
  const std::size_t extra = samples - MelConfig::kWindow;
  return static_cast<int>(1 + (extra + MelConfig::kHop - 1) / MelConfig::kHop);
}

MelSpectrogram mel_spectrogram(const AudioClip& clip) {
  if (clip.sample_rate != kModelSampleRate) {
    throw InvalidArgument("mel_spectrogram: expected 8000 Hz input, got " + std::to_string(clip.sample_rate));
  }
  if (clip.size() < static_cast<std::size_t>(MelConfig::kWindow)) {
    throw InvalidArgument("mel_spectrogram: clip shorter than one analysis window");
  }
  const auto& fb = filterbank();
  MelSpectrogram spec;
  spec.bands = MelConfig::kBands;
  spec.frames = mel_frame_count(clip.size());
  spec.values.assign(static_cast<std::size_t>(spec.bands) * spec.frames, 0.0f);
  spec.band_edges = fb.bands;
  spec.frame_hop_s = static_cast<double>(MelConfig::kHop) / kModelSampleRate;

  double* in = fftw_alloc_real(MelConfig::kFft);
  fftw_complex* out = fftw_alloc_complex(MelFilterbank::kBins);
  std::vector<double> power(MelFilterbank::kBins);
  // One-sided bin power such that the bins sum to the window-weighted mean square.
  const double norm = 1.0 / (MelConfig::kFft * fb.window_energy);
  for (int t = 0; t < spec.frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * MelConfig::kHop;
    for (int i = 0; i < MelConfig::kFft; ++i) {
      const std::size_t idx = start + static_cast<std::size_t>(i);
      const double s = (i < MelConfig::kWindow && idx < clip.size()) ? clip.samples[idx] : 0.0;
      in[i] = s * (i < MelConfig::kWindow ? fb.window[static_cast<std::size_t>(i)] : 0.0);
    }
    fftw_execute_dft_r2c(fb.plan, in, out);
    for (int k = 0; k < MelFilterbank::kBins; ++k) {
      const double mag2 = out[k][0] * out[k][0] + out[k][1] * out[k][1];
      const bool edge = k == 0 || k == MelConfig::kFft / 2;
      power[static_cast<std::size_t>(k)] = (edge ? 1.0 : 2.0) * mag2 * norm;
    }
    for (int m = 0; m < spec.bands; ++m) {
      const double* w = fb.weights.data() + static_cast<std::size_t>(m) * MelFilterbank::kBins;
      double p = 0.0;
      for (int k = 0; k < MelFilterbank::kBins; ++k) p += w[k] * power[static_cast<std::size_t>(k)];
      const double db = p > 0.0 ? 10.0 * std::log10(p) : MelConfig::kFloorDb;
      spec.values[static_cast<std::size_t>(m) * spec.frames + t] =
          static_cast<float>(std::max(db, MelConfig::kFloorDb));
    }
  }
  fftw_free(in);
  fftw_free(out);
  return spec;
}

SosFilter band_filter(double lo_hz, double hi_hz, int sample_rate) {
  const double nyquist = sample_rate / 2.0;
  if (!(lo_hz > 0.0) || !(lo_hz < hi_hz) || hi_hz > nyquist * (1.0 + 1e-12)) {
    throw InvalidArgument("band: require 0 < lo < hi <= Nyquist (got " + std::to_string(lo_hz) + ", " +
                          std::to_string(hi_hz) + " at " + std::to_string(sample_rate) + " Hz)");
  }
  if (upper_edge_is_nyquist(hi_hz, sample_rate)) {
    return SosFilter::butterworth_highpass(kBandOrder, lo_hz, sample_rate);
  }
  return SosFilter::butterworth_bandpass(kBandOrder, lo_hz, hi_hz, sample_rate);
}

std::size_t band_warmup_samples(double lo_hz, int sample_rate) {
  return static_cast<std::size_t>(std::ceil(kBandOrder * sample_rate / lo_hz));
}

std::vector<double> bandpass(const AudioClip& clip, double lo_hz, double hi_hz) {
  if (clip.sample_rate <= 0) throw InvalidArgument("band: invalid sample rate");
  const auto filt = band_filter(lo_hz, hi_hz, clip.sample_rate);
  const std::size_t warmup = band_warmup_samples(lo_hz, clip.sample_rate);
  if (clip.size() < warmup) {
    throw InvalidArgument("band: clip of " + std::to_string(clip.size()) +
                          " samples is shorter than the filter warm-up (" + std::to_string(warmup) + ")");
  }
  std::vector<double> x(clip.samples.begin(), clip.samples.end());
  return filt.filtfilt(x, warmup);
}

double band_level(const AudioClip& clip, double lo_hz, double hi_hz) {
  const auto y = bandpass(clip, lo_hz, hi_hz);
  double acc = 0.0;
  for (double v : y) acc += v * v;
  const double ms = acc / static_cast<double>(y.size());
  return ms > 0.0 ? std::max(10.0 * std::log10(ms), kSilenceFloorDb) : kSilenceFloorDb;
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw InvalidArgument("percentile: empty input");
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

std::vector<double> window_levels(const AudioClip& clip, double window_s, double lo_hz, double hi_hz) {
  if (!(window_s > 0.0)) throw InvalidArgument("fractile: window must be positive");
  const auto window = static_cast<std::size_t>(std::llround(window_s * clip.sample_rate));
  if (window == 0) throw InvalidArgument("fractile: window shorter than one sample");
  const auto y = bandpass(clip, lo_hz, hi_hz);
  const std::size_t count = y.size() / window;
  std::vector<double> levels(count);
  for (std::size_t w = 0; w < count; ++w) {
    double acc = 0.0;
    for (std::size_t i = w * window; i < (w + 1) * window; ++i) acc += y[i] * y[i];
    const double ms = acc / static_cast<double>(window);
    levels[w] = ms > 0.0 ? std::max(10.0 * std::log10(ms), kSilenceFloorDb) : kSilenceFloorDb;
  }
  return levels;
}

FractileLevels fractile_levels(const AudioClip& clip, double window_s, double lo_hz, double hi_hz) {
  constexpr std::size_t kMinWindows = 20;
  if (clip.duration_s() < 10.0 * window_s) {
    throw InvalidArgument("fractile: clip must last at least 10 windows");
  }
  const auto levels = window_levels(clip, window_s, lo_hz, hi_hz);
  if (levels.size() < kMinWindows) {
    throw InvalidArgument("fractile: " + std::to_string(levels.size()) +
                          " windows is too few for percentiles (need 20)");
  }
  FractileLevels out;
  out.window_s = window_s;
  out.l5 = percentile(levels, 95.0);
  out.l95 = percentile(levels, 5.0);
  return out;
}

}  // namespace snrdet
