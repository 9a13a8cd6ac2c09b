#pragma once

// Dataset persistence: binary portable pixmaps ("P6", 8-bit) for frames,
// binary portable graymaps ("P5", 16-bit big-endian) for activation maps
// with values mapped linearly to [0,1], plain-text bounding-box tables,
// flat key=value config files, and the dataset manifest tying a generated
// dataset together.  All parsers report failures as ParseError carrying the
// byte offset of the problem.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "coloc/image.hpp"
#include "coloc/text.hpp"

namespace coloc {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, const std::string& msg,
             std::size_t byte_offset)
      : std::runtime_error(file + ": " + msg + " (byte " +
                           std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

namespace detail {

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path.string() +
                             " for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

inline void write_file_bytes(const std::filesystem::path& path,
                             std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot open " + path.string() +
                             " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

// Cursor over a pixmap/graymap byte buffer; understands the whitespace and
// '#'-comment rules of the header grammar.
struct PnmCursor {
  const std::string& file;
  std::string_view data;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(file, msg, pos);
  }

  void skip_space_and_comments() {
    while (pos < data.size()) {
      const char c = data[pos];
      if (c == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n' ||
                 c == '\f' || c == '\v') {
        ++pos;
      } else {
        break;
      }
    }
  }

  long number(const char* what) {
    skip_space_and_comments();
    if (pos >= data.size()) fail(std::string("missing ") + what);
    if (data[pos] < '0' || data[pos] > '9')
      fail(std::string("expected a decimal ") + what);
    long value = 0;
    while (pos < data.size() && data[pos] >= '0' && data[pos] <= '9') {
      value = value * 10 + (data[pos] - '0');
      if (value > 1'000'000'000L) fail(std::string(what) + " out of range");
      ++pos;
    }
    return value;
  }

  // The single whitespace byte separating the header from the raster.
  void raster_separator() {
    if (pos >= data.size() || !(data[pos] == ' ' || data[pos] == '\t' ||
                                data[pos] == '\r' || data[pos] == '\n'))
      fail("expected a whitespace byte before the raster");
    ++pos;
  }

  void require_payload(std::size_t needed) const {
    if (data.size() - pos < needed)
      throw ParseError(file,
                       "truncated raster: " +
                           std::to_string(needed - (data.size() - pos)) +
                           " bytes missing",
                       data.size());
  }
};

}  // namespace detail

// --------------------------------------------------------------------------
// Frames: binary pixmap, magic "P6", 8-bit channels, maxval 255.  Channel
// values are rounded to the nearest integer and clamped to [0, 255].

inline void write_frame(const Frame& frame,
                        const std::filesystem::path& path) {
  frame.validate();
  std::string bytes = "P6\n" + std::to_string(frame.width) + " " +
                      std::to_string(frame.height) + "\n255\n";
  bytes.reserve(bytes.size() + frame.rgb.size());
  for (double v : frame.rgb) {
    const long q = std::lround(std::clamp(v, 0.0, 255.0));
    bytes.push_back(static_cast<char>(static_cast<unsigned char>(q)));
  }
  detail::write_file_bytes(path, bytes);
}

inline Frame read_frame(const std::filesystem::path& path) {
  const std::string data = detail::read_file_bytes(path);
  const std::string name = path.string();
  detail::PnmCursor cur{name, data};
  if (data.size() < 2 || data[0] != 'P' || data[1] != '6')
    cur.fail("bad magic: expected P6");
  cur.pos = 2;
  const long w = cur.number("width");
  const long h = cur.number("height");
  const long maxval = cur.number("maxval");
  if (w < 1 || h < 1) cur.fail("dimensions must be >= 1");
  if (maxval != 255) cur.fail("unsupported maxval (8-bit frames use 255)");
  cur.raster_separator();
  const std::size_t needed = 3ull * static_cast<std::size_t>(w) *
                             static_cast<std::size_t>(h);
  cur.require_payload(needed);
  Frame frame(static_cast<int>(h), static_cast<int>(w));
  for (std::size_t i = 0; i < needed; ++i)
    frame.rgb[i] =
        static_cast<double>(static_cast<unsigned char>(data[cur.pos + i]));
  return frame;
}

// --------------------------------------------------------------------------
// Maps: binary graymap, magic "P5", 16-bit big-endian samples, maxval
// 65535.  Map values in [0, 1] are scaled linearly to the sample range.

inline void write_map(const SeedCam& map, const std::filesystem::path& path) {
  map.validate();
  std::string bytes = "P5\n" + std::to_string(map.width) + " " +
                      std::to_string(map.height) + "\n65535\n";
  bytes.reserve(bytes.size() + 2 * map.values.size());
  for (double v : map.values) {
    const long q = std::lround(std::clamp(v, 0.0, 1.0) * 65535.0);
    bytes.push_back(static_cast<char>((q >> 8) & 0xff));
    bytes.push_back(static_cast<char>(q & 0xff));
  }
  detail::write_file_bytes(path, bytes);
}

inline SeedCam read_map(const std::filesystem::path& path) {
  const std::string data = detail::read_file_bytes(path);
  const std::string name = path.string();
  detail::PnmCursor cur{name, data};
  if (data.size() < 2 || data[0] != 'P' || data[1] != '5')
    cur.fail("bad magic: expected P5");
  cur.pos = 2;
  const long w = cur.number("width");
  const long h = cur.number("height");
  const long maxval = cur.number("maxval");
  if (w < 1 || h < 1) cur.fail("dimensions must be >= 1");
  if (maxval != 65535) cur.fail("unsupported maxval (16-bit maps use 65535)");
  cur.raster_separator();
  const std::size_t count =
      static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  cur.require_payload(2 * count);
  SeedCam map(static_cast<int>(h), static_cast<int>(w));
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned hi = static_cast<unsigned char>(data[cur.pos + 2 * i]);
    const unsigned lo = static_cast<unsigned char>(data[cur.pos + 2 * i + 1]);
    map.values[i] = static_cast<double>((hi << 8) | lo) / 65535.0;
  }
  return map;
}

// --------------------------------------------------------------------------
// Ground-truth boxes: one text line per frame,
//   frame_index x_min y_min x_max y_max
// in frame order starting at 0.

inline void write_boxes(std::span<const BBox> boxes,
                        const std::filesystem::path& path) {
  std::string bytes;
  for (std::size_t t = 0; t < boxes.size(); ++t) {
    const BBox& b = boxes[t];
    bytes += std::to_string(t) + " " + std::to_string(b.x_min) + " " +
             std::to_string(b.y_min) + " " + std::to_string(b.x_max) + " " +
             std::to_string(b.y_max) + "\n";
  }
  detail::write_file_bytes(path, bytes);
}

inline std::vector<BBox> read_boxes(const std::filesystem::path& path) {
  const std::string data = detail::read_file_bytes(path);
  const std::string name = path.string();
  std::vector<BBox> boxes;
  std::size_t pos = 0;
  while (pos < data.size()) {
    // Allow a trailing newline; otherwise each line is five integers.
    while (pos < data.size() && (data[pos] == '\n' || data[pos] == '\r'))
      ++pos;
    if (pos >= data.size()) break;
    long fields[5];
    for (int f = 0; f < 5; ++f) {
      while (pos < data.size() && (data[pos] == ' ' || data[pos] == '\t'))
        ++pos;
      const std::size_t start = pos;
      bool negative = false;
      if (pos < data.size() && data[pos] == '-') {
        negative = true;
        ++pos;
      }
      long v = 0;
      while (pos < data.size() && data[pos] >= '0' && data[pos] <= '9') {
        v = v * 10 + (data[pos] - '0');
        ++pos;
      }
      if (pos == start + (negative ? 1u : 0u))
        throw ParseError(name, "expected an integer box field", pos);
      fields[f] = negative ? -v : v;
    }
    while (pos < data.size() && (data[pos] == ' ' || data[pos] == '\t'))
      ++pos;
    if (pos < data.size() && data[pos] != '\n' && data[pos] != '\r')
      throw ParseError(name, "unexpected trailing characters on a box line",
                       pos);
    if (fields[0] != static_cast<long>(boxes.size()))
      throw ParseError(name,
                       "frame indices must count up from 0 (got " +
                           std::to_string(fields[0]) + ", expected " +
                           std::to_string(boxes.size()) + ")",
                       pos);
    boxes.push_back(BBox(static_cast<int>(fields[1]),
                         static_cast<int>(fields[2]),
                         static_cast<int>(fields[3]),
                         static_cast<int>(fields[4])));
  }
  return boxes;
}

// --------------------------------------------------------------------------
// Flat key=value configuration text: one pair per line, '#' comments and
// blank lines ignored, whitespace trimmed around keys and values, duplicate
// keys rejected.

inline std::map<std::string, std::string> parse_config(
    std::string_view text, const std::string& name = "config") {
  std::map<std::string, std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto trim = [](std::string_view s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
        s.remove_suffix(1);
      return s;
    };
    std::string_view body = trim(line);
    if (!body.empty() && body.front() != '#') {
      const std::size_t eq = body.find('=');
      if (eq == std::string_view::npos)
        throw ParseError(name, "expected key=value", pos);
      const std::string key(trim(body.substr(0, eq)));
      const std::string value(trim(body.substr(eq + 1)));
      if (key.empty()) throw ParseError(name, "empty key", pos);
      if (!out.emplace(key, value).second)
        throw ParseError(name, "duplicate key '" + key + "'", pos);
    }
    pos = eol + 1;
  }
  return out;
}

inline std::map<std::string, std::string> read_config(
    const std::filesystem::path& path) {
  return parse_config(detail::read_file_bytes(path), path.string());
}

// --------------------------------------------------------------------------
// Dataset manifest: the version tag, the generator config echo, and one
// entry per video naming its files (paths relative to the manifest).

struct VideoEntry {
  std::string id;
  int frame_count = 0;
  std::vector<std::string> frame_paths;
  std::vector<std::string> seed_paths;
  std::string boxes_path;
};

struct DatasetManifest {
  static constexpr const char* kVersion = "1";
  std::string version = kVersion;
  std::map<std::string, std::string> config_echo;
  std::vector<VideoEntry> videos;

  void validate() const {
    if (version != kVersion)
      throw std::invalid_argument("DatasetManifest: unsupported version '" +
                                  version + "'");
    for (const VideoEntry& v : videos) {
      if (v.id.empty())
        throw std::invalid_argument("DatasetManifest: video without an id");
      if (v.frame_count < 1)
        throw std::invalid_argument("DatasetManifest: video '" + v.id +
                                    "' has no frames");
      if (v.frame_paths.size() != static_cast<std::size_t>(v.frame_count) ||
          v.seed_paths.size() != static_cast<std::size_t>(v.frame_count))
        throw std::invalid_argument(
            "DatasetManifest: path list lengths disagree with the frame "
            "count for video '" +
            v.id + "'");
      if (v.boxes_path.empty())
        throw std::invalid_argument("DatasetManifest: video '" + v.id +
                                    "' has no box file");
    }
  }
};

namespace detail {

inline std::string join_paths(const std::vector<std::string>& paths) {
  std::string out;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (i) out += ';';
    out += paths[i];
  }
  return out;
}

inline std::vector<std::string> split_paths(std::string_view joined) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= joined.size()) {
    std::size_t sep = joined.find(';', pos);
    if (sep == std::string_view::npos) sep = joined.size();
    if (sep > pos) out.emplace_back(joined.substr(pos, sep - pos));
    pos = sep + 1;
  }
  return out;
}

}  // namespace detail

inline void write_manifest(const DatasetManifest& manifest,
                           const std::filesystem::path& path) {
  manifest.validate();
  std::string text = "version=" + manifest.version + "\n";
  for (const auto& [k, v] : manifest.config_echo)
    text += "config." + k + "=" + v + "\n";
  text += "video_count=" + std::to_string(manifest.videos.size()) + "\n";
  for (std::size_t i = 0; i < manifest.videos.size(); ++i) {
    const VideoEntry& v = manifest.videos[i];
    const std::string p = "video." + std::to_string(i) + ".";
    text += p + "id=" + v.id + "\n";
    text += p + "frame_count=" + std::to_string(v.frame_count) + "\n";
    text += p + "frames=" + detail::join_paths(v.frame_paths) + "\n";
    text += p + "seeds=" + detail::join_paths(v.seed_paths) + "\n";
    text += p + "boxes=" + v.boxes_path + "\n";
  }
  detail::write_file_bytes(path, text);
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  const std::map<std::string, std::string> kv = read_config(path);
  const std::string name = path.string();
  const auto need = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end())
      throw std::runtime_error(name + ": missing manifest key '" + key + "'");
    return it->second;
  };
  DatasetManifest manifest;
  manifest.version = need("version");
  for (const auto& [k, v] : kv)
    if (k.rfind("config.", 0) == 0) manifest.config_echo[k.substr(7)] = v;
  const long count = std::stol(need("video_count"));
  for (long i = 0; i < count; ++i) {
    const std::string p = "video." + std::to_string(i) + ".";
    VideoEntry entry;
    entry.id = need(p + "id");
    entry.frame_count = static_cast<int>(std::stol(need(p + "frame_count")));
    entry.frame_paths = detail::split_paths(need(p + "frames"));
    entry.seed_paths = detail::split_paths(need(p + "seeds"));
    entry.boxes_path = need(p + "boxes");
    manifest.videos.push_back(std::move(entry));
  }
  manifest.validate();
  return manifest;
}

// Checks that every file the manifest references exists; with deep=true the
// files are also parsed and their shapes and counts cross-checked.
inline void validate_dataset(const DatasetManifest& manifest,
                             const std::filesystem::path& root,
                             bool deep = false) {
  manifest.validate();
  for (const VideoEntry& v : manifest.videos) {
    for (const std::string& rel : v.frame_paths) {
      const std::filesystem::path p = root / rel;
      if (!std::filesystem::exists(p))
        throw std::runtime_error("dataset: missing frame file " + p.string());
      if (deep) read_frame(p).validate();
    }
    for (const std::string& rel : v.seed_paths) {
      const std::filesystem::path p = root / rel;
      if (!std::filesystem::exists(p))
        throw std::runtime_error("dataset: missing seed file " + p.string());
      if (deep) read_map(p).validate();
    }
    const std::filesystem::path bp = root / v.boxes_path;
    if (!std::filesystem::exists(bp))
      throw std::runtime_error("dataset: missing box file " + bp.string());
    if (deep) {
      const std::vector<BBox> boxes = read_boxes(bp);
      if (boxes.size() != static_cast<std::size_t>(v.frame_count))
        throw std::runtime_error("dataset: video '" + v.id + "' lists " +
                                 std::to_string(v.frame_count) +
                                 " frames but " +
                                 std::to_string(boxes.size()) + " boxes");
    }
  }
}

}  // namespace coloc
