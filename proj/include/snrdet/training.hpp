#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "snrdet/cnn.hpp"

namespace snrdet {

struct TrainConfig {
  double learning_rate = 1e-5;
  int epochs = 1000;
  int batch_size = 32;
  double dropout_conv = 0.2;
  double dropout_linear = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

/// One labeled network input. Label 1 = contains a call.
struct TrainingExample {
  MelSpectrogram spec;
  int label = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double train_wacc = 0.0;
  double valid_wacc = 0.0;
};

struct TrainResult {
  DetectorModel model;
  std::vector<EpochRecord> history;
};

/// Adam + binary cross-entropy training with inverted dropout. Batches come from a seeded
/// per-epoch shuffle; per-example gradients are summed in batch order, so results do not
/// depend on the thread count. Train metrics are accumulated over the epoch's (dropout-active)
/// forward passes; validation metrics use deterministic inference.
TrainResult train(std::span<const TrainingExample> train_set, std::span<const TrainingExample> valid_set,
                  const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Continues training from `initial` weights (fresh Adam state).
TrainResult train_from(const DetectorModel& initial, std::span<const TrainingExample> train_set,
                       std::span<const TrainingExample> valid_set, const TrainConfig& config,
                       const std::function<void(const EpochRecord&)>& on_epoch = {});

/// CSV with header: epoch,train_loss,valid_loss,train_wacc,valid_wacc
void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

}  // namespace snrdet
