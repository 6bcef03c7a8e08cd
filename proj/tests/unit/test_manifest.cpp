#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "snrdet/error.hpp"
#include "snrdet/manifest.hpp"
#include "snrdet/synth.hpp"

using namespace snrdet;

TEST_SUITE("manifest") {
  TEST_CASE("csv escaping") {
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("a,b") == "\"a,b\"");
    CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  }

  TEST_CASE("csv parsing handles quoted fields") {
    std::istringstream in("a,b\n\"x,1\",\"q\"\"q\"\n\"multi\nline\",2\n");
    const auto rows = parse_csv(in);
    REQUIRE(rows.size() == 3);
    CHECK(rows[1] == std::vector<std::string>{"x,1", "q\"q"});
    CHECK(rows[2][0] == "multi\nline");
  }

  TEST_CASE("dataset round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "snrdet_manifest_test";
    std::filesystem::remove_all(dir);
    const auto ds = build_experiment_datasets(3, 3, 3, 4);
    write_dataset(dir, ds);
    const auto rows = read_manifest(dir / "manifest.csv");
    REQUIRE(rows.size() == 6);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i].label == ds.clips[i].label);
      CHECK(rows[i].session == ds.clips[i].session);
      CHECK(rows[i].split == to_string(ds.clips[i].split));
      CHECK(load_row_clip(dir / "manifest.csv", rows[i]).samples == ds.clips[i].clip.samples);
    }
    CHECK_FALSE(std::filesystem::exists(dir / "manifest.csv.tmp"));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("malformed manifests are rejected") {
    const auto file = std::filesystem::temp_directory_path() / "snrdet_bad_manifest.csv";
    write_text_atomic(file, "path,label\nx.wav,1\n");
    CHECK_THROWS_AS(read_manifest(file), DataError);
    write_text_atomic(file, "path,label,session_id,split,spec\nx.wav,2,0,train,{}\n");
    CHECK_THROWS_AS(read_manifest(file), DataError);
    std::filesystem::remove(file);
    CHECK_THROWS_AS(read_manifest(file), DataError);
  }
}
