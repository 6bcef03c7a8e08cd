#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>

#include "snrdet/error.hpp"
#include "snrdet/weights_io.hpp"

using namespace snrdet;

namespace {

void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

// Encodes every tensor with the given lin1.weight input width.
std::vector<unsigned char> encode_with_lin1_width(std::uint32_t width) {
  std::vector<unsigned char> b{'P', 'T', 'R', 'M'};
  put_u32(b, 1);
  put_u32(b, static_cast<std::uint32_t>(Architecture::tensors().size()));
  for (auto spec : Architecture::tensors()) {
    if (spec.name == "lin1.weight") spec.dims[1] = width;
    b.push_back(static_cast<unsigned char>(spec.name.size()));
    b.push_back(0);
    b.insert(b.end(), spec.name.begin(), spec.name.end());
    b.push_back(static_cast<unsigned char>(spec.dims.size()));
    for (auto d : spec.dims) put_u32(b, d);
    b.insert(b.end(), spec.size() * 4, 0);
  }
  return b;
}

}  // namespace

TEST_SUITE("weights_io") {
  TEST_CASE("round trip is exact") {
    const auto m = DetectorModel::initialized(3);
    const auto bytes = save_weights(m);
    CHECK(load_weights(bytes).params == m.params);
    const auto path = std::filesystem::temp_directory_path() / "snrdet_weights_test.ptrm";
    save_weights_file(path, m);
    CHECK(load_weights_file(path).params == m.params);
    std::filesystem::remove(path);
  }

  TEST_CASE("hand-encoded file with the architecture shapes loads") {
    CHECK(load_weights(encode_with_lin1_width(224)).params == DetectorModel().params);
  }

  TEST_CASE("shape mismatch names the tensor") {
    try {
      load_weights(encode_with_lin1_width(225));
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("lin1.weight") != std::string::npos);
    }
  }

  TEST_CASE("truncated and corrupt files are rejected") {
    const auto bytes = save_weights(DetectorModel::initialized(1));
    for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{11}, std::size_t{40}, bytes.size() - 1}) {
      CHECK_THROWS_AS(load_weights(std::span(bytes.data(), cut)), DataError);
    }
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(load_weights(bad_magic), DataError);
    auto bad_version = bytes;
    bad_version[4] = 9;
    CHECK_THROWS_AS(load_weights(bad_version), DataError);
    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(load_weights(trailing), DataError);
    CHECK_THROWS_AS(load_weights_file("/nonexistent/w.ptrm"), DataError);
  }
}
