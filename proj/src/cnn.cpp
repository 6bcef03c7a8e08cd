#include "snrdet/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "snrdet/error.hpp"
#include "snrdet/rng.hpp"

namespace snrdet {
namespace {

constexpr std::size_t kLin1W = 8, kLin1B = 9, kLin2W = 10, kLin2B = 11;

int conv_out_size(int in, int stride, int pad) {
  return (in + 2 * pad - Architecture::kKernel) / stride + 1;
}

int floor_div(int a, int b) { return (a >= 0) ? a / b : -((-a + b - 1) / b); }
int ceil_div(int a, int b) { return -floor_div(-a, b); }

template <typename T>
struct ConvGeom {
  int in_c, h, w, out_c, oh, ow, stride, pad;
};

template <typename T>
void conv_forward(const ConvGeom<T>& g, const T* in, const T* weight, const T* bias, T* out) {
  constexpr int K = Architecture::kKernel;
  for (int oc = 0; oc < g.out_c; ++oc) {
    T* o = out + static_cast<std::size_t>(oc) * g.oh * g.ow;
    std::fill(o, o + static_cast<std::size_t>(g.oh) * g.ow, bias[oc]);
    for (int ic = 0; ic < g.in_c; ++ic) {
      const T* plane = in + static_cast<std::size_t>(ic) * g.h * g.w;
      for (int kh = 0; kh < K; ++kh) {
        for (int kw = 0; kw < K; ++kw) {
          const T wv = weight[((static_cast<std::size_t>(oc) * g.in_c + ic) * K + kh) * K + kw];
          const int ox_lo = std::max(0, ceil_div(g.pad - kw, g.stride));
          const int ox_hi = std::min(g.ow - 1, floor_div(g.w - 1 + g.pad - kw, g.stride));
          for (int oy = 0; oy < g.oh; ++oy) {
            const int iy = oy * g.stride + kh - g.pad;
            if (iy < 0 || iy >= g.h) continue;
            const T* irow = plane + static_cast<std::size_t>(iy) * g.w;
            T* orow = o + static_cast<std::size_t>(oy) * g.ow;
            if (g.stride == 1) {
              const T* src = irow + (kw - g.pad);
              for (int ox = ox_lo; ox <= ox_hi; ++ox) orow[ox] += wv * src[ox];
            } else {
              for (int ox = ox_lo; ox <= ox_hi; ++ox) orow[ox] += wv * irow[ox * g.stride + kw - g.pad];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv_backward(const ConvGeom<T>& g, const T* in, const T* weight, const T* dout, T* dweight,
                   T* dbias, T* din, double corruption) {
  constexpr int K = Architecture::kKernel;
  const std::size_t out_plane = static_cast<std::size_t>(g.oh) * g.ow;
  for (int oc = 0; oc < g.out_c; ++oc) {
    const T* d = dout + static_cast<std::size_t>(oc) * out_plane;
    T bsum = 0;
    for (std::size_t i = 0; i < out_plane; ++i) bsum += d[i];
    dbias[oc] += bsum;
    for (int ic = 0; ic < g.in_c; ++ic) {
      const T* plane = in + static_cast<std::size_t>(ic) * g.h * g.w;
      T* dplane = din ? din + static_cast<std::size_t>(ic) * g.h * g.w : nullptr;
      for (int kh = 0; kh < K; ++kh) {
        for (int kw = 0; kw < K; ++kw) {
          const std::size_t widx = ((static_cast<std::size_t>(oc) * g.in_c + ic) * K + kh) * K + kw;
          const T wv = weight[widx];
          const int ox_lo = std::max(0, ceil_div(g.pad - kw, g.stride));
          const int ox_hi = std::min(g.ow - 1, floor_div(g.w - 1 + g.pad - kw, g.stride));
          T acc = 0;
          for (int oy = 0; oy < g.oh; ++oy) {
            const int iy = oy * g.stride + kh - g.pad;
            if (iy < 0 || iy >= g.h) continue;
            const T* irow = plane + static_cast<std::size_t>(iy) * g.w;
            const T* drow = d + static_cast<std::size_t>(oy) * g.ow;
            T* dirow = dplane ? dplane + static_cast<std::size_t>(iy) * g.w : nullptr;
            if (g.stride == 1) {
              const int shift = kw - g.pad;
#pragma omp simd reduction(+ : acc)
              for (int ox = ox_lo; ox <= ox_hi; ++ox) acc += drow[ox] * irow[ox + shift];
              if (dirow) {
                for (int ox = ox_lo; ox <= ox_hi; ++ox) dirow[ox + shift] += wv * drow[ox];
              }
            } else {
              for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                const int ix = ox * g.stride + kw - g.pad;
                acc += drow[ox] * irow[ix];
                if (dirow) dirow[ix] += wv * drow[ox];
              }
            }
          }
          dweight[widx] += corruption != 0.0 ? static_cast<T>(acc * corruption) : acc;
        }
      }
    }
  }
}

template <typename T>
void max_pool(const T* in, int c, int h, int w, T* out, std::uint32_t* argmax) {
  const int oh = h / 2, ow = w / 2;
  for (int ch = 0; ch < c; ++ch) {
    const std::size_t base = static_cast<std::size_t>(ch) * h * w;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        std::size_t best = base + static_cast<std::size_t>(2 * y) * w + 2 * x;
        const std::size_t cand[3] = {best + 1, best + static_cast<std::size_t>(w),
                                     best + static_cast<std::size_t>(w) + 1};
        for (std::size_t k : cand) {
          if (in[k] > in[best]) best = k;  // first occurrence wins ties
        }
        const std::size_t o = (static_cast<std::size_t>(ch) * oh + y) * ow + x;
        out[o] = in[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

std::pair<int, int> adaptive_bin(int i, int width) {
  const int start = (i * width) / Architecture::kPooledTime;
  const int end = ((i + 1) * width + Architecture::kPooledTime - 1) / Architecture::kPooledTime;
  return {start, end};
}

template <typename T>
void apply_dropout(std::vector<T>& x, std::vector<T>& mask, double rate, std::uint64_t key,
                   std::uint64_t layer) {
  mask.assign(x.size(), T(0));
  if (rate <= 0.0) {
    std::fill(mask.begin(), mask.end(), T(1));
    return;
  }
  Rng rng(key, {0x64726f70ull, layer});
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = rng.uniform() >= rate ? scale : T(0);
    x[i] *= mask[i];
  }
}

}  // namespace

std::size_t TensorSpec::size() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

const std::vector<TensorSpec>& Architecture::tensors() {
  static const std::vector<TensorSpec> specs = [] {
    std::vector<TensorSpec> s;
    for (int i = 0; i < kConvStages; ++i) {
      const auto in_c = static_cast<std::uint32_t>(kChannels[static_cast<std::size_t>(i)]);
      const auto out_c = static_cast<std::uint32_t>(kChannels[static_cast<std::size_t>(i) + 1]);
      const std::string name = "conv" + std::to_string(i + 1);
      s.push_back({name + ".weight", {out_c, in_c, kKernel, kKernel}});
      s.push_back({name + ".bias", {out_c}});
    }
    s.push_back({"lin1.weight", {kHidden, kFlatten}});
    s.push_back({"lin1.bias", {kHidden}});
    s.push_back({"lin2.weight", {1, kHidden}});
    s.push_back({"lin2.bias", {1}});
    return s;
  }();
  return specs;
}

std::size_t Architecture::parameter_count() {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.size();
  return n;
}

std::size_t Architecture::tensor_offset(std::size_t index) {
  std::size_t off = 0;
  for (std::size_t i = 0; i < index; ++i) off += tensors()[i].size();
  return off;
}

std::array<StageShape, Architecture::kConvStages> stage_shapes(int bands, int frames) {
  std::array<StageShape, Architecture::kConvStages> shapes{};
  int h = bands, w = frames;
  for (int s = 0; s < Architecture::kConvStages; ++s) {
    auto& st = shapes[static_cast<std::size_t>(s)];
    st.in_h = h;
    st.in_w = w;
    st.conv_h = conv_out_size(h, Architecture::kStride[static_cast<std::size_t>(s)],
                              Architecture::kPad[static_cast<std::size_t>(s)]);
    st.conv_w = conv_out_size(w, Architecture::kStride[static_cast<std::size_t>(s)],
                              Architecture::kPad[static_cast<std::size_t>(s)]);
    st.pool_h = st.conv_h / 2;
    st.pool_w = st.conv_w / 2;
    h = st.pool_h;
    w = st.pool_w;
  }
  return shapes;
}

DetectorModel::DetectorModel() : params(Architecture::parameter_count(), 0.0f) {}

DetectorModel DetectorModel::initialized(std::uint64_t seed) {
  DetectorModel m;
  const auto& specs = Architecture::tensors();
  for (std::size_t t = 0; t + 1 < specs.size(); t += 2) {
    const auto& wspec = specs[t];
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < wspec.dims.size(); ++d) fan_in *= wspec.dims[d];
    const double w_bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    const double b_bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Rng rng(seed, {0x696e6974ull, t});
    for (auto& v : m.tensor(t)) v = static_cast<float>(rng.uniform(-w_bound, w_bound));
    for (auto& v : m.tensor(t + 1)) v = static_cast<float>(rng.uniform(-b_bound, b_bound));
  }
  return m;
}

std::span<float> DetectorModel::tensor(std::size_t index) {
  return std::span<float>(params).subspan(Architecture::tensor_offset(index),
                                          Architecture::tensors().at(index).size());
}

std::span<const float> DetectorModel::tensor(std::size_t index) const {
  return std::span<const float>(params).subspan(Architecture::tensor_offset(index),
                                                Architecture::tensors().at(index).size());
}

std::span<float> DetectorModel::tensor(const std::string& name) {
  const auto& specs = Architecture::tensors();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].name == name) return tensor(i);
  }
  throw InvalidArgument("unknown tensor " + name);
}

std::span<const float> DetectorModel::tensor(const std::string& name) const {
  return const_cast<DetectorModel*>(this)->tensor(name);
}

std::vector<float> network_input(const MelSpectrogram& spec, int& frames) {
  if (spec.bands != Architecture::kInputBands) {
    throw InvalidArgument("infer: expected 40 mel bands, got " + std::to_string(spec.bands));
  }
  if (spec.frames < Architecture::kMinInputFrames) {
    throw InvalidArgument("infer: need at least 8 frames, got " + std::to_string(spec.frames));
  }
  frames = std::max(spec.frames, Architecture::kMinTimeFrames);
  const float pad_value =
      static_cast<float>((MelConfig::kFloorDb - Architecture::kInputOffsetDb) / Architecture::kInputScaleDb);
  std::vector<float> x(static_cast<std::size_t>(spec.bands) * frames, pad_value);
  for (int b = 0; b < spec.bands; ++b) {
    for (int t = 0; t < spec.frames; ++t) {
      x[static_cast<std::size_t>(b) * frames + t] = static_cast<float>(
          (static_cast<double>(spec.at(b, t)) - Architecture::kInputOffsetDb) / Architecture::kInputScaleDb);
    }
  }
  return x;
}

int flattened_feature_size(int frames) {
  const auto shapes = stage_shapes(Architecture::kInputBands, std::max(frames, Architecture::kMinTimeFrames));
  const auto& last = shapes.back();
  if (last.pool_w < 1 || last.pool_h < 1) return 0;
  return Architecture::kChannels.back() * last.pool_h * Architecture::kPooledTime;
}

namespace nn {

thread_local double conv_gradient_corruption = 0.0;

template <typename T>
T forward(std::span<const T> params, std::span<const T> input, int frames, ForwardCache<T>* cache,
          const DropoutSpec* dropout) {
  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;
  const auto shapes = stage_shapes(Architecture::kInputBands, frames);
  if (shapes.back().pool_w < 1 || shapes.back().pool_h != 1) {
    throw InvalidArgument("forward: input too short for the conv stack");
  }
  c.frames = frames;
  std::vector<T> x(input.begin(), input.end());
  const bool training = dropout != nullptr;

  for (int s = 0; s < Architecture::kConvStages; ++s) {
    const auto si = static_cast<std::size_t>(s);
    const auto& sh = shapes[si];
    const ConvGeom<T> g{Architecture::kChannels[si], sh.in_h, sh.in_w, Architecture::kChannels[si + 1],
                        sh.conv_h, sh.conv_w, Architecture::kStride[si], Architecture::kPad[si]};
    const T* w = params.data() + Architecture::tensor_offset(2 * si);
    const T* b = params.data() + Architecture::tensor_offset(2 * si + 1);
    auto& conv = c.conv_out[si];
    conv.assign(static_cast<std::size_t>(g.out_c) * g.oh * g.ow, T(0));
    conv_forward(g, x.data(), w, b, conv.data());
    for (auto& v : conv) v = v > T(0) ? v : T(0);
    std::vector<T> pooled(static_cast<std::size_t>(g.out_c) * sh.pool_h * sh.pool_w);
    c.pool_argmax[si].assign(pooled.size(), 0);
    max_pool(conv.data(), g.out_c, g.oh, g.ow, pooled.data(), c.pool_argmax[si].data());
    if (training) {
      apply_dropout(pooled, c.pool_mask[si], dropout->conv_rate, dropout->key, si);
    } else {
      c.pool_mask[si].clear();
    }
    c.stage_input[si] = std::move(x);
    x = std::move(pooled);
  }

  const int channels = Architecture::kChannels.back();
  const int width = shapes.back().pool_w;
  c.last_pool = x;
  c.flat.assign(Architecture::kFlatten, T(0));
  for (int ch = 0; ch < channels; ++ch) {
    for (int i = 0; i < Architecture::kPooledTime; ++i) {
      const auto [start, end] = adaptive_bin(i, width);
      T acc = 0;
      for (int t = start; t < end; ++t) acc += x[static_cast<std::size_t>(ch) * width + t];
      c.flat[static_cast<std::size_t>(ch) * Architecture::kPooledTime + i] = acc / static_cast<T>(end - start);
    }
  }

  const T* w1 = params.data() + Architecture::tensor_offset(kLin1W);
  const T* b1 = params.data() + Architecture::tensor_offset(kLin1B);
  c.hidden.assign(Architecture::kHidden, T(0));
  for (int j = 0; j < Architecture::kHidden; ++j) {
    T acc = b1[j];
    const T* row = w1 + static_cast<std::size_t>(j) * Architecture::kFlatten;
    for (int i = 0; i < Architecture::kFlatten; ++i) acc += row[i] * c.flat[static_cast<std::size_t>(i)];
    c.hidden[static_cast<std::size_t>(j)] = acc > T(0) ? acc : T(0);
  }
  if (training) {
    apply_dropout(c.hidden, c.hidden_mask, dropout->linear_rate, dropout->key, 99);
  } else {
    c.hidden_mask.clear();
  }
  const T* w2 = params.data() + Architecture::tensor_offset(kLin2W);
  T logit = params[Architecture::tensor_offset(kLin2B)];
  for (int j = 0; j < Architecture::kHidden; ++j) logit += w2[j] * c.hidden[static_cast<std::size_t>(j)];
  c.logit = logit;
  return logit;
}

template <typename T>
void backward(std::span<const T> params, const ForwardCache<T>& c, T dlogit, std::span<T> grad) {
  const auto shapes = stage_shapes(Architecture::kInputBands, c.frames);
  T* g = grad.data();

  // Linear 2
  const T* w2 = params.data() + Architecture::tensor_offset(kLin2W);
  T* gw2 = g + Architecture::tensor_offset(kLin2W);
  g[Architecture::tensor_offset(kLin2B)] += dlogit;
  std::vector<T> dhidden(Architecture::kHidden);
  for (int j = 0; j < Architecture::kHidden; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    gw2[j] += dlogit * c.hidden[ju];
    T d = dlogit * w2[j];
    if (!c.hidden_mask.empty()) d *= c.hidden_mask[ju];
    // hidden holds post-ReLU, post-dropout values; dropped or inactive units pass no gradient.
    dhidden[ju] = c.hidden[ju] > T(0) ? d : T(0);
  }

  // Linear 1
  const T* w1 = params.data() + Architecture::tensor_offset(kLin1W);
  T* gw1 = g + Architecture::tensor_offset(kLin1W);
  T* gb1 = g + Architecture::tensor_offset(kLin1B);
  std::vector<T> dflat(Architecture::kFlatten, T(0));
  for (int j = 0; j < Architecture::kHidden; ++j) {
    const T d = dhidden[static_cast<std::size_t>(j)];
    if (d == T(0)) continue;
    gb1[j] += d;
    const T* row = w1 + static_cast<std::size_t>(j) * Architecture::kFlatten;
    T* grow = gw1 + static_cast<std::size_t>(j) * Architecture::kFlatten;
    for (int i = 0; i < Architecture::kFlatten; ++i) {
      grow[i] += d * c.flat[static_cast<std::size_t>(i)];
      dflat[static_cast<std::size_t>(i)] += d * row[i];
    }
  }

  // Adaptive average pooling.
  const int channels = Architecture::kChannels.back();
  const int width = shapes.back().pool_w;
  std::vector<T> dx(static_cast<std::size_t>(channels) * width, T(0));
  for (int ch = 0; ch < channels; ++ch) {
    for (int i = 0; i < Architecture::kPooledTime; ++i) {
      const auto [start, end] = adaptive_bin(i, width);
      const T share = dflat[static_cast<std::size_t>(ch) * Architecture::kPooledTime + i] / static_cast<T>(end - start);
      for (int t = start; t < end; ++t) dx[static_cast<std::size_t>(ch) * width + t] += share;
    }
  }

  for (int s = Architecture::kConvStages - 1; s >= 0; --s) {
    const auto si = static_cast<std::size_t>(s);
    const auto& sh = shapes[si];
    const ConvGeom<T> geo{Architecture::kChannels[si], sh.in_h, sh.in_w, Architecture::kChannels[si + 1],
                          sh.conv_h, sh.conv_w, Architecture::kStride[si], Architecture::kPad[si]};
    if (!c.pool_mask[si].empty()) {
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= c.pool_mask[si][i];
    }
    std::vector<T> dconv(c.conv_out[si].size(), T(0));
    for (std::size_t i = 0; i < dx.size(); ++i) dconv[c.pool_argmax[si][i]] += dx[i];
    for (std::size_t i = 0; i < dconv.size(); ++i) {
      if (!(c.conv_out[si][i] > T(0))) dconv[i] = T(0);
    }
    std::vector<T> din;
    if (s > 0) din.assign(c.stage_input[si].size(), T(0));
    conv_backward(geo, c.stage_input[si].data(), params.data() + Architecture::tensor_offset(2 * si),
                  dconv.data(), g + Architecture::tensor_offset(2 * si),
                  g + Architecture::tensor_offset(2 * si + 1), s > 0 ? din.data() : nullptr,
                  conv_gradient_corruption);
    dx = std::move(din);
  }
}

template float forward<float>(std::span<const float>, std::span<const float>, int, ForwardCache<float>*,
                              const DropoutSpec*);
template double forward<double>(std::span<const double>, std::span<const double>, int,
                                ForwardCache<double>*, const DropoutSpec*);
template void backward<float>(std::span<const float>, const ForwardCache<float>&, float, std::span<float>);
template void backward<double>(std::span<const double>, const ForwardCache<double>&, double,
                               std::span<double>);

}  // namespace nn

double infer_logit(const DetectorModel& model, const MelSpectrogram& spec) {
  int frames = 0;
  const auto x = network_input(spec, frames);
  return static_cast<double>(
      nn::forward<float>(model.params, x, frames, nullptr, nullptr));
}

Score infer(const DetectorModel& model, const MelSpectrogram& spec) {
  const double z = infer_logit(model, spec);
  return Score::from_probability(1.0 / (1.0 + std::exp(-z)));
}

double bce_from_logit(double logit, int label) {
  // softplus(z) - y z, written to avoid overflow for large |z|.
  const double softplus = std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit)));
  return softplus - (label ? logit : 0.0);
}

GradientCheckResult gradient_check(const DetectorModel& model, std::span<const MelSpectrogram> batch,
                                   std::span<const int> labels, std::uint64_t seed, double h,
                                   double fraction) {
  if (batch.empty() || batch.size() != labels.size()) {
    throw InvalidArgument("gradient_check: batch and labels must be non-empty and equal length");
  }
  std::vector<double> params(model.params.begin(), model.params.end());
  std::vector<std::vector<double>> inputs;
  std::vector<int> frames;
  for (const auto& spec : batch) {
    int f = 0;
    const auto x = network_input(spec, f);
    inputs.emplace_back(x.begin(), x.end());
    frames.push_back(f);
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  auto loss = [&](const std::vector<double>& p) {
    double l = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      l += bce_from_logit(nn::forward<double>(p, inputs[i], frames[i], nullptr, nullptr), labels[i]);
    }
    return l * inv_n;
  };

  std::vector<double> analytic(params.size(), 0.0);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    nn::ForwardCache<double> cache;
    const double z = nn::forward<double>(params, inputs[i], frames[i], &cache, nullptr);
    const double p = 1.0 / (1.0 + std::exp(-z));
    nn::backward<double>(params, cache, (p - labels[i]) * inv_n, analytic);
  }

  GradientCheckResult result;
  constexpr double kScaleFloor = 1e-6;
  const auto& specs = Architecture::tensors();
  for (std::size_t t = 0; t < specs.size(); ++t) {
    const std::size_t offset = Architecture::tensor_offset(t);
    const std::size_t size = specs[t].size();
    const std::size_t want = std::min(size, std::max<std::size_t>(2, static_cast<std::size_t>(
                                                                         std::ceil(fraction * size))));
    Rng rng(seed, {0x67636865ull, t});
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t k = 0; k < want; ++k) std::swap(idx[k], idx[k + rng.below(size - k)]);
    for (std::size_t k = 0; k < want; ++k) {
      const std::size_t j = offset + idx[k];
      const double saved = params[j];
      params[j] = saved + h;
      const double up = loss(params);
      params[j] = saved - h;
      const double down = loss(params);
      params[j] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[j]), std::abs(numeric), kScaleFloor});
      const double rel = std::abs(analytic[j] - numeric) / denom;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_tensor = specs[t].name;
      }
      ++result.checked;
    }
  }
  return result;
}

}  // namespace snrdet
