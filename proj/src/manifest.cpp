#include "snrdet/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "snrdet/error.hpp"

namespace snrdet {
namespace fs = std::filesystem;

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get(c);
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && in.peek() == '\n') in.get(c);
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (quoted) throw DataError("csv: unterminated quoted field");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_text_atomic(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw DataError("write failed: " + tmp.string());
  }
  fs::rename(tmp, file);
}

void write_manifest(const fs::path& file, const std::vector<ManifestRow>& rows) {
  std::ostringstream os;
  os << "path,label,session_id,split,spec\n";
  for (const auto& r : rows)
    os << csv_escape(r.path) << ',' << r.label << ',' << r.session << ',' << csv_escape(r.split) << ','
       << csv_escape(r.spec) << '\n';
  write_text_atomic(file, os.str());
}

std::vector<ManifestRow> read_manifest(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + file.string());
  const auto records = parse_csv(in);
  if (records.empty()) throw DataError("manifest is empty: " + file.string());
  const std::vector<std::string> header{"path", "label", "session_id", "split", "spec"};
  if (records.front() != header) throw DataError("manifest header mismatch: " + file.string());
  std::vector<ManifestRow> rows;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.size() == 1 && r[0].empty()) continue;
    if (r.size() != 5)
      throw DataError("manifest line " + std::to_string(i + 1) + ": expected 5 fields");
    ManifestRow row;
    row.path = r[0];
    try {
      row.label = std::stoi(r[1]);
      row.session = std::stoi(r[2]);
    } catch (const std::exception&) {
      throw DataError("manifest line " + std::to_string(i + 1) + ": bad integer field");
    }
    if (row.label != 0 && row.label != 1)
      throw DataError("manifest line " + std::to_string(i + 1) + ": label must be 0 or 1");
    row.split = r[3];
    row.spec = r[4];
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_dataset(const fs::path& dir, const LabeledDataset& dataset) {
  dataset.check_session_disjoint();
  fs::create_directories(dir / "wav");
  std::vector<ManifestRow> rows;
  rows.reserve(dataset.clips.size());
  for (std::size_t i = 0; i < dataset.clips.size(); ++i) {
    const auto& c = dataset.clips[i];
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.wav", i);
    const fs::path rel = fs::path("wav") / name;
    write_wav(dir / rel, c.clip);
    rows.push_back({rel.generic_string(), c.label, c.session, to_string(c.split), c.spec_json()});
  }
  write_manifest(dir / "manifest.csv", rows);
}

AudioClip load_row_clip(const fs::path& manifest_file, const ManifestRow& row) {
  const fs::path p(row.path);
  return read_wav(p.is_absolute() ? p : manifest_file.parent_path() / p);
}

}  // namespace snrdet
