#include "snrdet/mixer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "snrdet/error.hpp"
#include "snrdet/rng.hpp"

namespace snrdet {
namespace {

// Band levels at or below this are treated as silence (undefined SNR).
constexpr double kSilentLevelDb = kSilenceFloorDb + 1.0;

}  // namespace

bool passes_gate(const AudioClip& call, const GateCriterion& gate) {
  if (!(gate.min_emergence > 0.0)) throw InvalidArgument("gate: min_emergence must be positive");
  if (call.duration_s() < 0.2) throw InvalidArgument("gate: call must last at least 0.2 s");
  const auto levels = fractile_levels(call, gate.window_s, kAnalysisBandLoHz, kAnalysisBandHiHz);
  return levels.emergence() >= gate.min_emergence;
}

double MixResult::gain_db() const { return 20.0 * std::log10(gain); }

MixResult mix_with_levels(const AudioClip& call, double call_level_db, const AudioClip& noise,
                          double noise_level_db, const MixSpec& spec) {
  if (!std::isfinite(spec.target_snr)) throw InvalidArgument("mix: target SNR must be finite");
  if (call.sample_rate != noise.sample_rate) throw InvalidArgument("mix: sample rate mismatch");
  if (call.size() != noise.size()) throw InvalidArgument("mix: duration mismatch");
  if (call_level_db <= kSilentLevelDb) throw InvalidArgument("mix: call is silent in the band");
  if (noise_level_db <= kSilentLevelDb) throw InvalidArgument("mix: noise is silent in the band");

  MixResult r;
  r.call_level_db = call_level_db;
  r.noise_level_db = noise_level_db;
  r.gain = std::pow(10.0, (spec.target_snr - (call_level_db - noise_level_db)) / 20.0);
  std::vector<double> sum(call.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < sum.size(); ++i) {
    sum[i] = static_cast<double>(noise.samples[i]) + r.gain * static_cast<double>(call.samples[i]);
    peak = std::max(peak, std::abs(sum[i]));
  }
  if (peak == 0.0) throw NumericalError("mix: mixture cancelled to silence");
  r.peak_scale = 1.0 / peak;
  r.mixture.sample_rate = call.sample_rate;
  r.mixture.samples.resize(sum.size());
  for (std::size_t i = 0; i < sum.size(); ++i) r.mixture.samples[i] = static_cast<float>(sum[i] * r.peak_scale);
  return r;
}

MixResult mix_at_snr(const AudioClip& call, const AudioClip& noise, const MixSpec& spec) {
  if (call.sample_rate != noise.sample_rate) throw InvalidArgument("mix: sample rate mismatch");
  if (call.size() != noise.size()) throw InvalidArgument("mix: duration mismatch");
  return mix_with_levels(call, band_level(call, spec.band.lo_hz, spec.band.hi_hz), noise,
                         band_level(noise, spec.band.lo_hz, spec.band.hi_hz), spec);
}

std::size_t EvalGrid::trial_count() const {
  std::size_t n = 0;
  for (const auto& b : bins) n += b.trials.size();
  return n;
}

std::size_t grid_bin_count(double snr_lo, double snr_hi, double step) {
  if (!(step > 0.0)) throw InvalidArgument("grid: step must be positive");
  if (snr_hi < snr_lo) throw InvalidArgument("grid: snr_hi must be >= snr_lo");
  return static_cast<std::size_t>(std::floor((snr_hi - snr_lo) / step + 1e-9)) + 1;
}

EvalGrid build_eval_grid(std::size_t call_count, std::size_t noise_count, double snr_lo,
                         double snr_hi, double step, std::size_t n_per_point, std::uint64_t seed) {
  if (call_count == 0 || noise_count == 0) throw InvalidArgument("grid: empty clip set");
  const std::size_t nbins = grid_bin_count(snr_lo, snr_hi, step);
  EvalGrid grid;
  grid.seed = seed;
  grid.bins.resize(nbins);
  for (std::size_t b = 0; b < nbins; ++b) {
    grid.bins[b].snr = snr_lo + static_cast<double>(b) * step;
    grid.bins[b].trials.resize(n_per_point);
    for (std::size_t i = 0; i < n_per_point; ++i) {
      Rng rng(seed, {0x67726964ull, b, i});
      grid.bins[b].trials[i] = {rng.below(call_count), rng.below(noise_count)};
    }
  }
  return grid;
}

ClipPool ClipPool::measure(std::vector<AudioClip> clips, std::vector<std::string> ids, Band band) {
  ClipPool pool;
  pool.levels_db.reserve(clips.size());
  for (const auto& c : clips) pool.levels_db.push_back(band_level(c, band.lo_hz, band.hi_hz));
  if (ids.empty()) {
    for (std::size_t i = 0; i < clips.size(); ++i) ids.push_back(std::to_string(i));
  }
  if (ids.size() != clips.size()) throw InvalidArgument("pool: id count mismatch");
  pool.clips = std::move(clips);
  pool.ids = std::move(ids);
  return pool;
}

MixResult materialize_trial(const EvalGrid& grid, std::size_t bin, std::size_t index,
                            const ClipPool& calls, const ClipPool& noises, Band band) {
  const auto& b = grid.bins.at(bin);
  const auto& t = b.trials.at(index);
  MixSpec spec;
  spec.target_snr = b.snr;
  spec.band = band;
  return mix_with_levels(calls.clips.at(t.call_id), calls.levels_db.at(t.call_id),
                         noises.clips.at(t.noise_id), noises.levels_db.at(t.noise_id), spec);
}

void write_eval_grid(const std::filesystem::path& dir, const EvalGrid& grid, const ClipPool& calls,
                     const ClipPool& noises, Band band) {
  std::filesystem::create_directories(dir / "wav");
  std::ostringstream manifest;
  manifest << "path,snr_bin,call_id,noise_id,gain_dB\n";
  manifest.precision(10);
  for (std::size_t b = 0; b < grid.bins.size(); ++b) {
    for (std::size_t i = 0; i < grid.bins[b].trials.size(); ++i) {
      const auto mix = materialize_trial(grid, b, i, calls, noises, band);
      const auto& t = grid.bins[b].trials[i];
      const std::string rel = "wav/bin" + std::to_string(b) + "_" + std::to_string(i) + ".wav";
      write_wav(dir / rel, mix.mixture);
      manifest << rel << ',' << grid.bins[b].snr << ',' << calls.ids[t.call_id] << ','
               << noises.ids[t.noise_id] << ',' << mix.gain_db() << '\n';
    }
  }
  std::ofstream out(dir / "manifest.csv");
  if (!out) throw DataError("cannot write " + (dir / "manifest.csv").string());
  out << manifest.str();
}

}  // namespace snrdet
