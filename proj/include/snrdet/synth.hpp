#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "snrdet/audio.hpp"
#include "snrdet/psychometric.hpp"

namespace snrdet {

/// Pulsed frequency-swept call. Pulses are separated by silent gaps of `inter_pulse_s`.
struct CallSpec {
  int pulse_count = 6;
  double pulse_duration_s = 0.035;
  double inter_pulse_s = 0.05;
  double f_start = 2200.0;
  double f_end = 1400.0;
  double attack = 0.15;  // fraction of the pulse spent rising
  double decay = 0.35;   // fraction of the pulse spent falling
  double harmonic_gain = 0.25;  // relative amplitude of the second harmonic (dropped above 3.8 kHz)
  std::uint64_t seed = 0;       // onset and per-pulse jitter
};

enum class NoiseKind { Rain, Wind, Biophony };

std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& s);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::Wind;
  double intensity = 0.1;         // RMS amplitude in the 400-4000 Hz band
  double impulse_rate_hz = 40.0;  // rain: Poisson drop rate
  double rain_bed_db = -30.0;     // rain: broadband bed relative to a unit drop
  double wind_corner_hz = 100.0;  // wind: corner of the -6 dB/octave tilt
  int burst_count = 0;            // biophony: 2-5 tone bursts, 0 draws from the seed
  std::uint64_t seed = 0;
};

/// 0.66 s at 8 kHz.
AudioClip gen_call(const CallSpec& spec);
AudioClip gen_noise(const NoiseSpec& spec, double duration_s = kModelClipSeconds);

/// Seeded draw of a plausible call (sweep, pulse count and timing varied).
CallSpec random_call_spec(std::uint64_t seed);
NoiseSpec random_noise_spec(std::uint64_t seed, std::optional<NoiseKind> kind = std::nullopt,
                            double level_lo_db = -35.0, double level_hi_db = -15.0);

std::string call_spec_json(const CallSpec& spec);
std::string noise_spec_json(const NoiseSpec& spec);
CallSpec call_spec_from_json(const std::string& text);
NoiseSpec noise_spec_from_json(const std::string& text);

/// Analytic stimuli for the energy detector. The noise is a sum of equal tones at odd multiples
/// of 100 Hz (500-3900 Hz, random phases), so every 10 ms window carries the same power. The call
/// is a 2 kHz tone gated on whole 10 ms windows, orthogonal to the noise over each window. With
/// a fraction `d` of windows gated, emergence = 10 log10(1 + d^-1 * 10^(snr/10)).
inline constexpr int kAnalyticGatedWindows = 20;
inline constexpr double kAnalyticDuty = kAnalyticGatedWindows / 66.0;

AudioClip analytic_call(std::uint64_t seed);
AudioClip analytic_noise(std::uint64_t seed);
/// SNR at which the emergence equals `threshold_db`: 10 log10(d (10^(threshold/10) - 1)).
double analytic_crossing_snr(double threshold_db, double duty = kAnalyticDuty);

enum class Split { Train, Valid, Test };
std::string to_string(Split split);
Split split_from_string(const std::string& s);

struct LabeledClip {
  AudioClip clip;
  int label = 0;
  int session = 0;
  Split split = Split::Train;
  std::optional<CallSpec> call;  // positives only
  NoiseSpec noise;
  double snr = 0.0;              // positives only
  std::string spec_json() const;
};

struct LabeledDataset {
  std::vector<LabeledClip> clips;
  std::vector<Split> session_split;  // indexed by session id

  /// Throws DataError if any session contributes to more than one split.
  void check_session_disjoint() const;
  std::vector<const LabeledClip*> in_split(Split split) const;
};

struct DatasetOptions {
  double positive_snr_lo = 10.0;
  double positive_snr_hi = 20.0;
  std::optional<NoiseKind> noise_kind;  // all kinds when unset
};

/// Positives: a generated call mixed over generated noise at SNR drawn from
/// [positive_snr_lo, positive_snr_hi]. Negatives: pure noise. Sessions are assigned
/// round-robin; whole sessions are assigned to train/valid/test.
LabeledDataset build_experiment_datasets(std::size_t n_pos, std::size_t n_neg, std::size_t sessions,
                                         std::uint64_t seed, const DatasetOptions& options = {});

/// Session-to-split assignment: ~20% valid, ~20% test (at least one each), rest train.
std::vector<Split> assign_session_splits(std::size_t sessions);

struct AugmentedClip {
  AudioClip clip;
  std::size_t call_index = 0;
  std::size_t noise_index = 0;
  double target_snr = 0.0;
  double gain_db = 0.0;
};

/// round(fraction * calls.size()) positives, each a gate-passing call mixed over a random
/// noise clip at an SNR uniform in [snr_lo, snr_hi].
std::vector<AugmentedClip> build_train_augm(const std::vector<AudioClip>& calls,
                                            const std::vector<AudioClip>& noises, double fraction,
                                            double snr_lo, double snr_hi, std::uint64_t seed);

enum class AugmMode { High, Transition, Low };
AugmMode augm_mode_from_string(const std::string& s);

/// 10 dB windows from the fitted curve: transition is centered on snr_50, high starts where
/// p = 0.99, low ends where p = 0.01.
std::pair<double, double> select_augm_range_from_curve(const LogisticParams& fit, AugmMode mode,
                                                       double width_db = 10.0);

}  // namespace snrdet
