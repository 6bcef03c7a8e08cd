#pragma once

#include <memory>
#include <string>

#include "snrdet/audio.hpp"
#include "snrdet/cnn.hpp"
#include "snrdet/mixer.hpp"

namespace snrdet {

/// Anything that scores a clip for call presence. Implementations must be safe to call
/// concurrently from several threads.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual Score score(const AudioClip& clip) const = 0;
  virtual std::string name() const = 0;
};

/// Network preprocessing: resample to 8 kHz, peak-normalize, log-mel.
MelSpectrogram preprocess(const AudioClip& clip);

class CnnDetector final : public Detector {
 public:
  explicit CnnDetector(DetectorModel model) : model_(std::move(model)) {}

  Score score(const AudioClip& clip) const override { return infer(model_, preprocess(clip)); }
  std::string name() const override { return "cnn"; }
  const DetectorModel& model() const { return model_; }

 private:
  DetectorModel model_;
};

/// Scores a clip by its band emergence: logistic((L5 - L95) - threshold).
class EnergyDetector final : public Detector {
 public:
  explicit EnergyDetector(double threshold_db, Band band = {}, double window_s = 0.01)
      : threshold_db_(threshold_db), band_(band), window_s_(window_s) {}

  Score score(const AudioClip& clip) const override;
  std::string name() const override;
  double threshold_db() const { return threshold_db_; }

 private:
  double threshold_db_;
  Band band_;
  double window_s_;
};

class ConstantDetector final : public Detector {
 public:
  explicit ConstantDetector(double probability) : probability_(probability) {}
  Score score(const AudioClip&) const override { return Score::from_probability(probability_); }
  std::string name() const override { return "constant"; }

 private:
  double probability_;
};

std::unique_ptr<Detector> energy_detector(double threshold_db);

}  // namespace snrdet
