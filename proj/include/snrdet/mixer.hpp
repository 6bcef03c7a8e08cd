#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "snrdet/audio.hpp"
#include "snrdet/dsp.hpp"

namespace snrdet {

struct Band {
  double lo_hz = kAnalysisBandLoHz;
  double hi_hz = kAnalysisBandHiHz;
};

/// Target SNR (dB) between the call and noise band levels.
struct MixSpec {
  double target_snr = 0.0;
  Band band{};
};

/// Emergence gate for call clips: L5 - L95 must reach `min_emergence`.
struct GateCriterion {
  double min_emergence = 20.0;
  double window_s = 0.01;
};

bool passes_gate(const AudioClip& call, const GateCriterion& gate = {});

struct MixResult {
  AudioClip mixture;       // noise + gain * call, peak-normalized
  double gain = 1.0;       // linear gain applied to the call
  double call_level_db = 0.0;   // band level of the unscaled call
  double noise_level_db = 0.0;  // band level of the noise
  double peak_scale = 1.0;      // factor applied by the final peak normalization

  double gain_db() const;
};

/// Superimposes `call` on `noise` so that band_level(gain * call) - band_level(noise)
/// equals the target SNR. Both clips must share duration and sample rate.
MixResult mix_at_snr(const AudioClip& call, const AudioClip& noise, const MixSpec& spec);

/// Mix with the band levels supplied by the caller (avoids re-measuring pooled clips).
MixResult mix_with_levels(const AudioClip& call, double call_level_db, const AudioClip& noise,
                          double noise_level_db, const MixSpec& spec);

/// One stimulus of the evaluation grid: indices into the call and noise pools.
struct GridTrial {
  std::size_t call_id = 0;
  std::size_t noise_id = 0;
};

struct GridBin {
  double snr = 0.0;
  std::vector<GridTrial> trials;
};

struct EvalGrid {
  std::vector<GridBin> bins;
  std::uint64_t seed = 0;

  std::size_t trial_count() const;
};

/// Number of SNR values in [lo, hi] spaced by `step`: floor((hi - lo) / step) + 1.
std::size_t grid_bin_count(double snr_lo, double snr_hi, double step);

/// Seeded sampling (uniform, with replacement) of (call, noise) pairs for every SNR bin.
/// The pair for (bin, index) depends only on (seed, bin, index).
EvalGrid build_eval_grid(std::size_t call_count, std::size_t noise_count, double snr_lo,
                         double snr_hi, double step, std::size_t n_per_point, std::uint64_t seed);

/// Clip pools with their band levels measured once.
struct ClipPool {
  std::vector<AudioClip> clips;
  std::vector<double> levels_db;
  std::vector<std::string> ids;

  static ClipPool measure(std::vector<AudioClip> clips, std::vector<std::string> ids = {},
                          Band band = {});
  std::size_t size() const { return clips.size(); }
};

MixResult materialize_trial(const EvalGrid& grid, std::size_t bin, std::size_t index,
                            const ClipPool& calls, const ClipPool& noises, Band band = {});

/// Writes every mixture as a float WAV under `dir` plus `manifest.csv`
/// (path, snr_bin, call_id, noise_id, gain_dB).
void write_eval_grid(const std::filesystem::path& dir, const EvalGrid& grid, const ClipPool& calls,
                     const ClipPool& noises, Band band = {});

}  // namespace snrdet
