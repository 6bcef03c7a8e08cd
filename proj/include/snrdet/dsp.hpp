#pragma once

#include <cstddef>
#include <vector>

#include "snrdet/audio.hpp"
#include "snrdet/butterworth.hpp"

namespace snrdet {

/// Levels below this are reported as this value (dB re full scale).
inline constexpr double kSilenceFloorDb = -200.0;

inline constexpr double kAnalysisBandLoHz = 400.0;
inline constexpr double kAnalysisBandHiHz = 4000.0;

/// Polyphase windowed-sinc (Kaiser, 80 dB) downsampler; identity when the rates match.
AudioClip resample(const AudioClip& clip, int target_rate);

/// Scales the clip so its peak absolute amplitude is exactly 1.
AudioClip normalize(const AudioClip& clip);

struct MelBand {
  double lo_hz;
  double center_hz;
  double hi_hz;
};

/// Log-mel spectrogram, values stored band-major: values[band * frames + frame].
struct MelSpectrogram {
  int bands = 0;
  int frames = 0;
  std::vector<float> values;
  std::vector<MelBand> band_edges;
  double frame_hop_s = 0.0;

  float at(int band, int frame) const {
    return values[static_cast<std::size_t>(band) * frames + frame];
  }
};

struct MelConfig {
  static constexpr int kBands = 40;
  static constexpr int kWindow = 128;  // 0.016 s at 8 kHz
  static constexpr int kHop = 19;      // 15% of the window
  static constexpr int kFft = 128;
  static constexpr double kLoHz = 400.0;
  static constexpr double kHiHz = 4000.0;
  static constexpr double kFloorDb = -100.0;
};

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
double hz_to_mel_slaney(double hz);
double mel_to_hz_slaney(double mel);

/// The 40 triangular bands spanning 400-4000 Hz.
std::vector<MelBand> mel_band_edges();

/// Frames produced for `samples` input samples (final partial frame zero-padded).
int mel_frame_count(std::size_t samples);

/// 40-band log-mel spectrogram of an 8 kHz clip: Blackman-Harris window of 128 samples,
/// hop 19, triangular filters normalized to unit sum over FFT bins, 10 log10 of band power
/// clamped at -100 dB.
MelSpectrogram mel_spectrogram(const AudioClip& clip);

/// Sixth-order Butterworth band filter applied forward and backward. An upper edge at the
/// Nyquist frequency selects the equivalent high-pass design.
SosFilter band_filter(double lo_hz, double hi_hz, int sample_rate);

/// Minimum clip length (samples) accepted by band measurements.
std::size_t band_warmup_samples(double lo_hz, int sample_rate);

/// Zero-phase band-passed copy of the clip (double precision).
std::vector<double> bandpass(const AudioClip& clip, double lo_hz, double hi_hz);

/// 20 log10 of the RMS of the zero-phase band-passed clip.
double band_level(const AudioClip& clip, double lo_hz, double hi_hz);

struct FractileLevels {
  double l5 = 0.0;   // exceeded in 5% of windows
  double l95 = 0.0;  // exceeded in 95% of windows
  double window_s = 0.01;

  double emergence() const { return l5 - l95; }
};

/// Percentile (0-100) with linear interpolation between order statistics.
double percentile(std::vector<double> values, double pct);

/// Per-window RMS levels (dB) of the band-passed clip over consecutive windows.
std::vector<double> window_levels(const AudioClip& clip, double window_s, double lo_hz, double hi_hz);

FractileLevels fractile_levels(const AudioClip& clip, double window_s = 0.01,
                               double lo_hz = kAnalysisBandLoHz, double hi_hz = kAnalysisBandHiHz);

}  // namespace snrdet
