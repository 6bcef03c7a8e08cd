#include "snrdet/weights_io.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "snrdet/error.hpp"

namespace snrdet {
namespace {

constexpr char kMagic[4] = {'P', 'T', 'R', 'M'};

template <typename T>
void put(std::vector<unsigned char>& out, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::span<const unsigned char> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size()) {
      std::ostringstream msg;
      msg << "weights: truncated file while reading " << what << " at byte " << pos_;
      throw DataError(msg.str());
    }
  }

  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

std::string dims_text(const std::vector<std::uint32_t>& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "," : "") + std::to_string(dims[i]);
  return s + "]";
}

}  // namespace

std::vector<unsigned char> save_weights(const DetectorModel& model) {
  const auto& specs = Architecture::tensors();
  std::vector<unsigned char> out(kMagic, kMagic + 4);
  put<std::uint32_t>(out, kWeightsFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(specs.size()));
  for (std::size_t t = 0; t < specs.size(); ++t) {
    const auto& spec = specs[t];
    put<std::uint16_t>(out, static_cast<std::uint16_t>(spec.name.size()));
    out.insert(out.end(), spec.name.begin(), spec.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(spec.dims.size()));
    for (auto d : spec.dims) put<std::uint32_t>(out, d);
    for (float v : model.tensor(t)) put<float>(out, v);
  }
  return out;
}

DetectorModel load_weights(std::span<const unsigned char> bytes) {
  Reader r(bytes);
  const auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw DataError("weights: bad magic (expected PTRM)");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kWeightsFormatVersion) {
    throw DataError("weights: unsupported format version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  const auto& specs = Architecture::tensors();
  if (count != specs.size()) {
    throw DataError("weights: expected " + std::to_string(specs.size()) + " tensors, file has " +
                    std::to_string(count));
  }
  DetectorModel model;
  for (std::size_t t = 0; t < specs.size(); ++t) {
    const auto name_len = r.get<std::uint16_t>("name length");
    const auto name_bytes = r.take(name_len, "name");
    const std::string name(name_bytes.begin(), name_bytes.end());
    if (name != specs[t].name) {
      throw DataError("weights: tensor " + std::to_string(t) + " is '" + name + "', expected '" +
                      specs[t].name + "'");
    }
    const auto rank = r.get<std::uint8_t>("rank");
    std::vector<std::uint32_t> dims(rank);
    for (auto& d : dims) d = r.get<std::uint32_t>("dims");
    if (dims != specs[t].dims) {
      throw DataError("weights: shape mismatch for layer '" + name + "': file " + dims_text(dims) +
                      ", architecture " + dims_text(specs[t].dims));
    }
    const auto data = r.take(specs[t].size() * sizeof(float), "tensor data");
    std::memcpy(model.tensor(t).data(), data.data(), data.size());
  }
  if (!r.at_end()) throw DataError("weights: trailing bytes after last tensor");
  return model;
}

void save_weights_file(const std::filesystem::path& path, const DetectorModel& model) {
  const auto bytes = save_weights(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

DetectorModel load_weights_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return load_weights(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace snrdet
