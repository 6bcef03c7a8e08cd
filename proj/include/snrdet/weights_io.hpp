#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "snrdet/cnn.hpp"

namespace snrdet {

/// Weight file layout (all integers little-endian):
///   "PTRM" | version u32 | tensor count u32 |
///   per tensor: name length u16, UTF-8 name, rank u8, dims u32 x rank, float32 data (row-major).
inline constexpr std::uint32_t kWeightsFormatVersion = 1;

std::vector<unsigned char> save_weights(const DetectorModel& model);

/// Validates magic, version, tensor names and shapes against the fixed architecture.
/// Throws DataError on any mismatch; no partially filled model is ever returned.
DetectorModel load_weights(std::span<const unsigned char> bytes);

void save_weights_file(const std::filesystem::path& path, const DetectorModel& model);
DetectorModel load_weights_file(const std::filesystem::path& path);

}  // namespace snrdet
