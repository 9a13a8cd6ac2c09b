// Tests for dataset persistence: pixmap/graymap round-trips within
// quantization, parse errors with byte offsets, truncation reporting, box
// tables, flat key=value configs, and the dataset manifest.

#include "catch_amalgamated.hpp"
#include "coloc/image.hpp"
#include "coloc/pnm_io.hpp"
#include "coloc/rng.hpp"
#include "coloc/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace {

using namespace coloc;
namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("coloc_io_test_" + std::to_string(Catch::rngSeed()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("frames round-trip within 8-bit quantization") {
  TempDir dir;
  Rng rng(31);
  Frame frame(13, 17);
  for (double& v : frame.rgb) v = rng.uniform(0.0, 255.0);
  const fs::path p = dir.path / "frame.ppm";
  write_frame(frame, p);
  Frame back = read_frame(p);
  REQUIRE(back.height == 13);
  REQUIRE(back.width == 17);
  double worst = 0.0;
  for (std::size_t i = 0; i < frame.rgb.size(); ++i)
    worst = std::max(worst, std::abs(frame.rgb[i] - back.rgb[i]));
  CHECK(worst <= 0.5);

  SECTION("integer-valued frames come back exactly") {
    for (double& v : frame.rgb) v = std::floor(v);
    write_frame(frame, p);
    Frame exact = read_frame(p);
    CHECK(exact.rgb == frame.rgb);
  }

  SECTION("the header is the canonical magic-size-maxval form") {
    const std::string bytes = slurp(p);
    CHECK(bytes.rfind("P6\n17 13\n255\n", 0) == 0);
    CHECK(bytes.size() == 13 + 3 * 13 * 17);
  }
}

TEST_CASE("maps round-trip within 16-bit quantization") {
  TempDir dir;
  Rng rng(32);
  SeedCam map(9, 11);
  for (double& v : map.values) v = rng.uniform(0.0, 1.0);
  map.values[0] = 0.0;
  map.values[1] = 1.0;
  const fs::path p = dir.path / "map.pgm";
  write_map(map, p);
  SeedCam back = read_map(p);
  REQUIRE(back.height == 9);
  REQUIRE(back.width == 11);
  double worst = 0.0;
  for (std::size_t i = 0; i < map.values.size(); ++i)
    worst = std::max(worst, std::abs(map.values[i] - back.values[i]));
  CHECK(worst <= 0.5 / 65535.0);
  CHECK(back.values[0] == 0.0);
  CHECK(back.values[1] == 1.0);
}

TEST_CASE("pixmap parsers accept comments and report malformed headers") {
  TempDir dir;

  SECTION("header comments and extra whitespace are tolerated") {
    const fs::path p = dir.path / "commented.pgm";
    std::string bytes = "P5 # magic\n# a comment line\n 2\t1 #dims\n65535\n";
    bytes += std::string("\x00\x00\xff\xff", 4);
    std::ofstream(p, std::ios::binary) << bytes;
    SeedCam m = read_map(p);
    CHECK(m.width == 2);
    CHECK(m.height == 1);
    CHECK(m.values[0] == 0.0);
    CHECK(m.values[1] == 1.0);
  }

  SECTION("a wrong magic is rejected at the start of the file") {
    const fs::path p = dir.path / "bad_magic.ppm";
    std::ofstream(p, std::ios::binary) << "P3\n2 2\n255\n";
    try {
      read_frame(p);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.byte_offset() == 0);
      CHECK(std::string(e.what()).find("magic") != std::string::npos);
    }
  }

  SECTION("an unsupported maxval is rejected") {
    const fs::path p = dir.path / "maxval.ppm";
    std::ofstream(p, std::ios::binary) << "P6\n2 2\n15\n" << std::string(12, 'x');
    CHECK_THROWS_AS(read_frame(p), ParseError);
  }

  SECTION("truncated rasters name the missing byte count") {
    const fs::path p = dir.path / "short.ppm";
    // 2x2 pixmap needs 12 payload bytes; provide 5.
    std::ofstream(p, std::ios::binary) << "P6\n2 2\n255\n" << std::string(5, 'x');
    try {
      read_frame(p);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("7 bytes missing") !=
            std::string::npos);
    }

    const fs::path q = dir.path / "short.pgm";
    // 3x1 graymap needs 6 payload bytes; provide 4.
    std::ofstream(q, std::ios::binary) << "P5\n3 1\n65535\n"
                                       << std::string(4, 'x');
    try {
      read_map(q);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("2 bytes missing") !=
            std::string::npos);
    }
  }

  SECTION("a missing file is reported by name") {
    CHECK_THROWS_WITH(read_frame(dir.path / "absent.ppm"),
                      Catch::Matchers::ContainsSubstring("absent.ppm"));
  }
}

TEST_CASE("box tables round-trip and enforce frame order") {
  TempDir dir;
  std::vector<BBox> boxes = {BBox(1, 2, 5, 9), BBox(0, 0, 64, 64),
                             BBox(10, 20, 30, 40)};
  const fs::path p = dir.path / "boxes.txt";
  write_boxes(boxes, p);
  CHECK(slurp(p) == "0 1 2 5 9\n1 0 0 64 64\n2 10 20 30 40\n");
  CHECK(read_boxes(p) == boxes);

  SECTION("out-of-order frame indices are rejected") {
    std::ofstream(p, std::ios::trunc) << "0 1 2 5 9\n2 0 0 4 4\n";
    CHECK_THROWS_AS(read_boxes(p), ParseError);
  }

  SECTION("non-numeric fields are rejected") {
    std::ofstream(p, std::ios::trunc) << "0 1 2 five 9\n";
    CHECK_THROWS_AS(read_boxes(p), ParseError);
  }

  SECTION("trailing junk on a line is rejected") {
    std::ofstream(p, std::ios::trunc) << "0 1 2 5 9 extra\n";
    CHECK_THROWS_AS(read_boxes(p), ParseError);
  }
}

TEST_CASE("key=value configs parse with comments and strict duplicates") {
  const auto kv = parse_config(
      "alpha=1\n# a comment\n\n  beta = two words  \r\ngamma=3.5\n");
  REQUIRE(kv.size() == 3);
  CHECK(kv.at("alpha") == "1");
  CHECK(kv.at("beta") == "two words");
  CHECK(kv.at("gamma") == "3.5");

  CHECK_THROWS_AS(parse_config("a=1\na=2\n"), ParseError);
  CHECK_THROWS_AS(parse_config("just a line\n"), ParseError);
  CHECK_THROWS_AS(parse_config("=value\n"), ParseError);
}

TEST_CASE("manifests round-trip and validate a generated dataset") {
  TempDir dir;

  // Generate a small dataset on disk: two videos of four frames.
  SynthConfig scfg;
  scfg.frames = 4;
  scfg.height = 12;
  scfg.width = 12;
  scfg.radius = 2.0;
  DatasetManifest manifest;
  manifest.config_echo["frames"] = "4";
  manifest.config_echo["videos"] = "2";
  for (int v = 0; v < 2; ++v) {
    scfg.seed = 100 + static_cast<unsigned>(v);
    SynthResult data = generate(scfg);
    VideoEntry entry;
    entry.id = "video_" + std::to_string(v);
    entry.frame_count = scfg.frames;
    fs::create_directories(dir.path / entry.id);
    for (int t = 0; t < scfg.frames; ++t) {
      const std::string fp = entry.id + "/frame_" + std::to_string(t) + ".ppm";
      const std::string sp = entry.id + "/seed_" + std::to_string(t) + ".pgm";
      write_frame(data.frames[static_cast<std::size_t>(t)], dir.path / fp);
      write_map(data.seeds[static_cast<std::size_t>(t)], dir.path / sp);
      entry.frame_paths.push_back(fp);
      entry.seed_paths.push_back(sp);
    }
    entry.boxes_path = entry.id + "/boxes.txt";
    write_boxes(data.boxes, dir.path / entry.boxes_path);
    manifest.videos.push_back(std::move(entry));
  }

  const fs::path mp = dir.path / "manifest.txt";
  write_manifest(manifest, mp);
  DatasetManifest back = read_manifest(mp);
  CHECK(back.version == DatasetManifest::kVersion);
  CHECK(back.config_echo == manifest.config_echo);
  REQUIRE(back.videos.size() == 2);
  for (int v = 0; v < 2; ++v) {
    CHECK(back.videos[v].id == manifest.videos[v].id);
    CHECK(back.videos[v].frame_count == manifest.videos[v].frame_count);
    CHECK(back.videos[v].frame_paths == manifest.videos[v].frame_paths);
    CHECK(back.videos[v].seed_paths == manifest.videos[v].seed_paths);
    CHECK(back.videos[v].boxes_path == manifest.videos[v].boxes_path);
  }

  CHECK_NOTHROW(validate_dataset(back, dir.path, /*deep=*/true));

  SECTION("a missing referenced file fails validation") {
    fs::remove(dir.path / back.videos[1].seed_paths[2]);
    CHECK_THROWS_WITH(validate_dataset(back, dir.path),
                      Catch::Matchers::ContainsSubstring("seed_2.pgm"));
  }

  SECTION("inconsistent counts are rejected") {
    DatasetManifest broken = back;
    broken.videos[0].frame_paths.pop_back();
    CHECK_THROWS_AS(broken.validate(), std::invalid_argument);
  }

  SECTION("unknown versions are rejected") {
    DatasetManifest future = back;
    future.version = "999";
    CHECK_THROWS_AS(future.validate(), std::invalid_argument);
  }
}
