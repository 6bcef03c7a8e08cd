#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "snrdet/audio.hpp"
#include "snrdet/synth.hpp"

namespace snrdet {

/// One line of a dataset manifest: path, label, session_id, split, spec.
struct ManifestRow {
  std::string path;  // relative to the manifest's directory
  int label = 0;
  int session = 0;
  std::string split;
  std::string spec;  // generator spec as JSON
};

std::string csv_escape(const std::string& field);
/// RFC 4180 records (quoted fields may contain commas, quotes and newlines).
std::vector<std::vector<std::string>> parse_csv(std::istream& in);

/// Writes through a temporary file and renames it into place.
void write_manifest(const std::filesystem::path& file, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& file);

/// Writes every clip under `dir/wav/` and `dir/manifest.csv`.
void write_dataset(const std::filesystem::path& dir, const LabeledDataset& dataset);

AudioClip load_row_clip(const std::filesystem::path& manifest_file, const ManifestRow& row);

/// Writes an atomic text file (temporary sibling plus rename).
void write_text_atomic(const std::filesystem::path& file, const std::string& text);

}  // namespace snrdet
