#include "snrdet/detector.hpp"

#include <cmath>
#include <sstream>

namespace snrdet {

MelSpectrogram preprocess(const AudioClip& clip) {
  const AudioClip at_rate = clip.sample_rate == kModelSampleRate ? clip : resample(clip, kModelSampleRate);
  return mel_spectrogram(normalize(at_rate));
}

Score EnergyDetector::score(const AudioClip& clip) const {
  const auto levels = fractile_levels(clip, window_s_, band_.lo_hz, band_.hi_hz);
  const double x = levels.emergence() - threshold_db_;
  return Score::from_probability(1.0 / (1.0 + std::exp(-x)));
}

std::string EnergyDetector::name() const {
  std::ostringstream s;
  s << "energy:" << threshold_db_;
  return s.str();
}

std::unique_ptr<Detector> energy_detector(double threshold_db) {
  return std::make_unique<EnergyDetector>(threshold_db);
}

}  // namespace snrdet
