#include "snrdet/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "snrdet/error.hpp"

namespace snrdet {
namespace {

static_assert(std::endian::native == std::endian::little,
              "WAV codec assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(std::span<const unsigned char> bytes, std::size_t offset) {
  if (offset + sizeof(T) > bytes.size()) throw DataError("wav: truncated header");
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

template <typename T>
void append_le(std::vector<unsigned char>& out, T value) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

void append_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

bool tag_is(std::span<const unsigned char> bytes, std::size_t offset, const char* tag) {
  return offset + 4 <= bytes.size() && std::memcmp(bytes.data() + offset, tag, 4) == 0;
}

}  // namespace

AudioClip decode_wav(std::span<const unsigned char> bytes) {
  if (!tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE")) {
    throw DataError("wav: not a RIFF/WAVE stream");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const auto chunk_size = read_le<std::uint32_t>(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (tag_is(bytes, pos, "fmt ")) {
      format = read_le<std::uint16_t>(bytes, body);
      channels = read_le<std::uint16_t>(bytes, body + 2);
      rate = read_le<std::uint32_t>(bytes, body + 4);
      bits = read_le<std::uint16_t>(bytes, body + 14);
      if (format == kFormatExtensible) {
        // SubFormat GUID starts 24 bytes into the chunk; its first two bytes carry the format tag.
        format = read_le<std::uint16_t>(bytes, body + 24);
      }
      have_fmt = true;
    } else if (tag_is(bytes, pos, "data")) {
      if (!have_fmt) throw DataError("wav: data chunk before fmt chunk");
      if (channels == 0 || rate == 0) throw DataError("wav: invalid fmt chunk");
      const bool pcm16 = format == kFormatPcm && bits == 16;
      const bool f32 = format == kFormatFloat && bits == 32;
      if (!pcm16 && !f32) {
        throw DataError("wav: unsupported encoding (format " + std::to_string(format) + ", " +
                        std::to_string(bits) + " bits)");
      }
      const std::size_t avail = std::min<std::size_t>(chunk_size, bytes.size() - body);
      const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
      const std::size_t frames = avail / frame_bytes;
      AudioClip clip;
      clip.sample_rate = static_cast<int>(rate);
      clip.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        const std::size_t at = body + i * frame_bytes;
        clip.samples[i] = pcm16 ? static_cast<float>(read_le<std::int16_t>(bytes, at)) / 32768.0f
                                : read_le<float>(bytes, at);
      }
      return clip;
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }
  throw DataError("wav: no data chunk");
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<unsigned char> encode_wav(const AudioClip& clip, WavEncoding encoding) {
  const bool f32 = encoding == WavEncoding::Float32;
  const std::uint16_t bits = f32 ? 32 : 16;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.samples.size() * (bits / 8));
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  append_tag(out, "RIFF");
  append_le<std::uint32_t>(out, 36 + data_bytes);
  append_tag(out, "WAVE");
  append_tag(out, "fmt ");
  append_le<std::uint32_t>(out, 16);
  append_le<std::uint16_t>(out, f32 ? kFormatFloat : kFormatPcm);
  append_le<std::uint16_t>(out, 1);
  append_le<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate));
  append_le<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate) * (bits / 8));
  append_le<std::uint16_t>(out, bits / 8);
  append_le<std::uint16_t>(out, bits);
  append_tag(out, "data");
  append_le<std::uint32_t>(out, data_bytes);
  for (float s : clip.samples) {
    if (f32) {
      append_le<float>(out, s);
    } else {
      const double scaled = std::round(static_cast<double>(s) * 32768.0);
      append_le<std::int16_t>(out, static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0)));
    }
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip, WavEncoding encoding) {
  const auto bytes = encode_wav(clip, encoding);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace snrdet
