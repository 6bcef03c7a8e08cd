#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "snrdet/dsp.hpp"

namespace snrdet {

/// Named parameter tensor in the fixed network layout.
struct TensorSpec {
  std::string name;
  std::vector<std::uint32_t> dims;

  std::size_t size() const;
};

/// Static description of the detector network:
///   4 x [Conv2d 3x3 + ReLU + MaxPool 2x2] with channels 1-16-32-64-32
///   (first conv stride 2 / pad 2, others stride 1 / pad 1),
///   adaptive average pooling of the time axis to 7 bins (32 x 1 x 7 = 224 features),
///   Linear 224-32 + ReLU, Linear 32-1 + sigmoid.
struct Architecture {
  static constexpr int kInputBands = 40;
  static constexpr int kConvStages = 4;
  static constexpr std::array<int, 5> kChannels{1, 16, 32, 64, 32};
  static constexpr std::array<int, 4> kStride{2, 1, 1, 1};
  static constexpr std::array<int, 4> kPad{2, 1, 1, 1};
  static constexpr int kKernel = 3;
  static constexpr int kPooledTime = 7;
  static constexpr int kFlatten = 224;
  static constexpr int kHidden = 32;
  /// Shortest time axis the conv/pool stack accepts; shorter inputs are padded with the mel floor.
  static constexpr int kMinTimeFrames = 29;
  /// Frames accepted by `infer` (shorter inputs are rejected).
  static constexpr int kMinInputFrames = 8;
  /// Fixed input scaling: x = (dB - kInputOffsetDb) / kInputScaleDb.
  static constexpr double kInputOffsetDb = -50.0;
  static constexpr double kInputScaleDb = 25.0;

  static const std::vector<TensorSpec>& tensors();
  static std::size_t parameter_count();
  static std::size_t tensor_offset(std::size_t index);
};

/// Spatial sizes after each stage (height = frequency, width = time).
struct StageShape {
  int in_h, in_w;
  int conv_h, conv_w;
  int pool_h, pool_w;
};

std::array<StageShape, Architecture::kConvStages> stage_shapes(int bands, int frames);

/// Trained or freshly initialized weights of the detector network, flattened in
/// `Architecture::tensors()` order.
struct DetectorModel {
  std::vector<float> params;

  DetectorModel();  // all-zero weights
  static DetectorModel initialized(std::uint64_t seed);

  std::span<float> tensor(std::size_t index);
  std::span<const float> tensor(std::size_t index) const;
  std::span<float> tensor(const std::string& name);
  std::span<const float> tensor(const std::string& name) const;
};

struct Score {
  double probability = 0.0;
  bool decision = false;

  static Score from_probability(double p) { return {p, p > 0.5}; }
};

/// Converts a mel spectrogram into the network input (scaled, time-padded to the stack minimum).
/// Returns the padded frame count through `frames`.
std::vector<float> network_input(const MelSpectrogram& spec, int& frames);

/// Deterministic forward pass (dropout disabled).
Score infer(const DetectorModel& model, const MelSpectrogram& spec);

/// Pre-sigmoid output of the network.
double infer_logit(const DetectorModel& model, const MelSpectrogram& spec);

/// Width of the flattened feature vector produced for an input with `frames` time frames.
int flattened_feature_size(int frames);

namespace nn {

/// Dropout configuration and mask source for one training forward pass.
struct DropoutSpec {
  double conv_rate = 0.0;
  double linear_rate = 0.0;
  std::uint64_t key = 0;
};

/// Intermediate activations retained for backpropagation.
template <typename T>
struct ForwardCache {
  int frames = 0;
  std::array<std::vector<T>, Architecture::kConvStages> stage_input;
  std::array<std::vector<T>, Architecture::kConvStages> conv_out;   // post-ReLU
  std::array<std::vector<std::uint32_t>, Architecture::kConvStages> pool_argmax;
  std::array<std::vector<T>, Architecture::kConvStages> pool_mask;  // dropout scale, empty if off
  std::vector<T> last_pool;  // stage-4 output after dropout
  std::vector<T> flat;       // 224 adaptive-pooled features
  std::vector<T> hidden;     // post-ReLU, post-dropout
  std::vector<T> hidden_mask;
  T logit = 0;
};

template <typename T>
T forward(std::span<const T> params, std::span<const T> input, int frames, ForwardCache<T>* cache,
          const DropoutSpec* dropout = nullptr);

/// Accumulates dL/dparams into `grad` given dL/dlogit.
template <typename T>
void backward(std::span<const T> params, const ForwardCache<T>& cache, T dlogit, std::span<T> grad);

/// Test hook: when non-zero, conv weight gradients are multiplied by this factor.
extern thread_local double conv_gradient_corruption;

}  // namespace nn

/// Binary cross-entropy on a logit: softplus(z) - y z.
double bce_from_logit(double logit, int label);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::string worst_tensor;
};

/// Compares backpropagated gradients of the mean batch BCE with central finite differences
/// (step h) on a seeded random subsample of the weights. Runs in double precision with dropout off.
GradientCheckResult gradient_check(const DetectorModel& model, std::span<const MelSpectrogram> batch,
                                   std::span<const int> labels, std::uint64_t seed = 1,
                                   double h = 1e-4, double fraction = 0.01);

}  // namespace snrdet
