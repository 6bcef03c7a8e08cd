#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "snrdet/cnn.hpp"
#include "snrdet/rng.hpp"

namespace testing {

using snrdet::DetectorModel;
using snrdet::MelSpectrogram;

// Uniform random log-mel values over the clamped dB range.
inline MelSpectrogram random_mel(int frames, std::uint64_t seed) {
  MelSpectrogram m;
  m.bands = 40;
  m.frames = frames;
  m.values.resize(static_cast<std::size_t>(40) * frames);
  snrdet::Rng rng(seed, {1});
  for (auto& v : m.values) v = static_cast<float>(rng.uniform(-100.0, 0.0));
  return m;
}

using Tensor3 = std::vector<std::vector<std::vector<double>>>;

inline Tensor3 oracle_conv_relu(const Tensor3& x, const float* w, const float* b, int out_c, int stride, int pad) {
  const int in_c = static_cast<int>(x.size()), h = static_cast<int>(x[0].size()), wd = static_cast<int>(x[0][0].size());
  const int oh = (h + 2 * pad - 3) / stride + 1, ow = (wd + 2 * pad - 3) / stride + 1;
  Tensor3 y(out_c, std::vector<std::vector<double>>(oh, std::vector<double>(ow)));
  for (int o = 0; o < out_c; ++o)
    for (int r = 0; r < oh; ++r)
      for (int c = 0; c < ow; ++c) {
        double acc = b[o];
        for (int i = 0; i < in_c; ++i)
          for (int kr = 0; kr < 3; ++kr)
            for (int kc = 0; kc < 3; ++kc) {
              const int ir = r * stride + kr - pad, ic = c * stride + kc - pad;
              if (ir < 0 || ir >= h || ic < 0 || ic >= wd) continue;
              acc += w[((o * in_c + i) * 3 + kr) * 3 + kc] * x[i][ir][ic];
            }
        y[o][r][c] = std::max(acc, 0.0);
      }
  return y;
}

inline Tensor3 oracle_pool(const Tensor3& x) {
  Tensor3 y(x.size());
  for (std::size_t ch = 0; ch < x.size(); ++ch) {
    const std::size_t h = x[ch].size() / 2, w = x[ch][0].size() / 2;
    y[ch].assign(h, std::vector<double>(w));
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c)
        y[ch][r][c] = std::max({x[ch][2 * r][2 * c], x[ch][2 * r][2 * c + 1], x[ch][2 * r + 1][2 * c],
                                x[ch][2 * r + 1][2 * c + 1]});
  }
  return y;
}

// Straightforward re-implementation of the network used as an independent reference.
inline double oracle_probability(const DetectorModel& m, const MelSpectrogram& spec) {
  const int t = std::max(spec.frames, 29);
  Tensor3 x(1, std::vector<std::vector<double>>(40, std::vector<double>(t, -2.0)));
  for (int b = 0; b < 40; ++b)
    for (int f = 0; f < spec.frames; ++f) x[0][b][f] = (spec.at(b, f) + 50.0) / 25.0;
  const int channels[] = {16, 32, 64, 32};
  for (int s = 0; s < 4; ++s) {
    x = oracle_conv_relu(x, m.tensor(2 * s).data(), m.tensor(2 * s + 1).data(), channels[s], s == 0 ? 2 : 1,
                         s == 0 ? 2 : 1);
    x = oracle_pool(x);
  }
  const int width = static_cast<int>(x[0][0].size());
  std::vector<double> flat;
  for (int ch = 0; ch < 32; ++ch)
    for (int i = 0; i < 7; ++i) {
      const int start = static_cast<int>(std::floor(i * width / 7.0));
      const int end = static_cast<int>(std::ceil((i + 1) * width / 7.0));
      double acc = 0.0;
      for (int k = start; k < end; ++k) acc += x[ch][0][k];
      flat.push_back(acc / (end - start));
    }
  const auto w1 = m.tensor("lin1.weight"), b1 = m.tensor("lin1.bias"), w2 = m.tensor("lin2.weight");
  double z = m.tensor("lin2.bias")[0];
  for (int j = 0; j < 32; ++j) {
    double acc = b1[j];
    for (int i = 0; i < 224; ++i) acc += w1[j * 224 + i] * flat[i];
    z += w2[j] * std::max(acc, 0.0);
  }
  return 1.0 / (1.0 + std::exp(-z));
}

}  // namespace testing
