#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace snrdet {

/// Mono sample buffer with its sample rate. Amplitudes are full scale +-1.
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

inline constexpr int kModelSampleRate = 8000;
inline constexpr double kModelClipSeconds = 0.66;
inline constexpr std::size_t kModelClipSamples = 5280;

enum class WavEncoding { Pcm16, Float32 };

/// Reads PCM 16-bit or IEEE float 32-bit WAV. Multichannel files yield the first channel.
AudioClip read_wav(const std::filesystem::path& path);
AudioClip decode_wav(std::span<const unsigned char> bytes);

void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               WavEncoding encoding = WavEncoding::Float32);
std::vector<unsigned char> encode_wav(const AudioClip& clip,
                                      WavEncoding encoding = WavEncoding::Float32);

}  // namespace snrdet
