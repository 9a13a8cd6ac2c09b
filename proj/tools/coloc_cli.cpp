// coloc — command-line front end for the co-localization loss suite.
//
// Subcommands:
//   gen       synthesize a moving-object video dataset from a config file
//   train     fit per-pixel logits on a dataset; writes maps + training log
//   eval      score predicted maps against ground-truth boxes (CorLoc)
//   bench     time the co-localization loss as the window size grows
//   filter    apply the bilateral lattice filter to one map (inspection)
//   gradcheck finite-difference verification of every loss gradient
//
// Exit codes: 0 success; 2 usage errors (unknown subcommand/flag, malformed
// flag value, missing command-line file); 1 anything else.  Errors are one
// line on stderr: "error: <message>".
//
// Determinism contract: with fixed flags, fixed seed and --threads 1, every
// CSV this tool writes is byte-identical across runs.  Training logs
// therefore omit the wall-clock column unless --timing is given (timing is a
// measurement, not a function of the seed), and all floating-point
// serialization uses shortest round-trip formatting.

#include "coloc/eval.hpp"
#include "coloc/gradcheck.hpp"
#include "coloc/lattice.hpp"
#include "coloc/losses.hpp"
#include "coloc/pnm_io.hpp"
#include "coloc/synth.hpp"
#include "coloc/text.hpp"
#include "coloc/trainer.hpp"

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace coloc;

namespace {

// Usage-class failure: wrong invocation rather than bad data. Exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

[[noreturn]] void usage_fail(const std::string& msg) { throw UsageError(msg); }

const char kUsage[] =
    "usage: coloc <subcommand> [flags]\n"
    "\n"
    "subcommands:\n"
    "  gen --config <file> --out <dir> [--seed N]\n"
    "      synthesize videos (frames, seed maps, ground-truth boxes)\n"
    "  train --data <dir> --out <dir> [--config <file>] [--seed N]\n"
    "        [--threads N] [--timing]\n"
    "      optimize per-pixel logits per video; writes map_<t>.pgm + log.csv\n"
    "  eval --run <dir> --data <dir> [--out <dir>]\n"
    "      boxes from maps, IoU vs ground truth; writes frames.csv and\n"
    "      corloc.csv\n"
    "  bench --sizes n1,n2,... [--hw HxW] [--repeats N] [--seed N]\n"
    "        [--threads N] [--out <file>]\n"
    "      median co-localization loss wall time per window size (CSV)\n"
    "  filter --frame <ppm> --in <pgm> --out <pgm> [--spatial S] [--color C]\n"
    "         [--radius R] [--threads N]\n"
    "      normalized bilateral smoothing of a map, guided by the frame\n"
    "  gradcheck [--seed N] [--instances N]\n"
    "      finite-difference audit of the analytic gradients\n";

// ---------------------------------------------------------------------------
// Flag parsing: "--name value" pairs after the subcommand plus boolean
// switches.  Unknown names are usage errors.

struct Args {
  std::map<std::string, std::string> values;
  std::map<std::string, bool> switches;

  bool has(const std::string& k) const { return values.count(k) != 0; }
  bool on(const std::string& k) const {
    auto it = switches.find(k);
    return it != switches.end() && it->second;
  }
  const std::string& need(const std::string& k) const {
    auto it = values.find(k);
    if (it == values.end()) usage_fail("missing required flag --" + k);
    return it->second;
  }
  std::string get(const std::string& k, const std::string& fallback) const {
    auto it = values.find(k);
    return it == values.end() ? fallback : it->second;
  }
};

Args parse_args(int argc, char** argv, int first,
                const std::vector<std::string>& value_flags,
                const std::vector<std::string>& switch_flags = {}) {
  Args args;
  for (const std::string& s : switch_flags) args.switches[s] = false;
  for (int i = first; i < argc; ++i) {
    const std::string token = argv[i];
    if (token.rfind("--", 0) != 0)
      usage_fail("unexpected argument '" + token + "'");
    const std::string name = token.substr(2);
    if (args.switches.count(name)) {
      args.switches[name] = true;
      continue;
    }
    bool known = false;
    for (const std::string& v : value_flags) known = known || v == name;
    if (!known) usage_fail("unknown flag '--" + name + "'");
    if (i + 1 >= argc) usage_fail("flag --" + name + " needs a value");
    if (args.values.count(name)) usage_fail("duplicate flag --" + name);
    args.values[name] = argv[++i];
  }
  return args;
}

// Numeric parsing with full-consumption checks.

long long to_ll(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(what + ": not an integer: '" + s + "'");
  }
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(what + ": not a number: '" + s + "'");
  }
}

bool to_bool(const std::string& s, const std::string& what) {
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw std::runtime_error(what + ": not a boolean: '" + s + "'");
}

// Flag variants rethrow as usage errors (the bad value came from argv).

int flag_int(const Args& a, const std::string& k, int fallback) {
  if (!a.has(k)) return fallback;
  try {
    return static_cast<int>(to_ll(a.values.at(k), "--" + k));
  } catch (const std::exception& e) {
    usage_fail(e.what());
  }
}

double flag_double(const Args& a, const std::string& k, double fallback) {
  if (!a.has(k)) return fallback;
  try {
    return to_double(a.values.at(k), "--" + k);
  } catch (const std::exception& e) {
    usage_fail(e.what());
  }
}

std::uint64_t flag_seed(const Args& a, std::uint64_t fallback) {
  if (!a.has("seed")) return fallback;
  long long v = 0;
  try {
    v = to_ll(a.values.at("seed"), "--seed");
  } catch (const std::exception& e) {
    usage_fail(e.what());
  }
  if (v < 0) usage_fail("--seed: must be non-negative");
  return static_cast<std::uint64_t>(v);
}

std::vector<int> parse_int_list(const std::string& s,
                                const std::string& what) {
  std::vector<int> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    const std::string item = comma == std::string::npos
                                 ? s.substr(start)
                                 : s.substr(start, comma - start);
    if (item.empty()) throw std::runtime_error(what + ": empty list item");
    out.push_back(static_cast<int>(to_ll(item, what)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void parse_hw(const std::string& s, int* height, int* width) {
  const std::size_t x = s.find('x');
  if (x == std::string::npos || x == 0 || x + 1 >= s.size())
    usage_fail("--hw: expected <height>x<width>, got '" + s + "'");
  try {
    *height = static_cast<int>(to_ll(s.substr(0, x), "--hw height"));
    *width = static_cast<int>(to_ll(s.substr(x + 1), "--hw width"));
  } catch (const std::exception& e) {
    usage_fail(e.what());
  }
  if (*height < 1 || *width < 1) usage_fail("--hw: dimensions must be >= 1");
}

void require_cli_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p))
    usage_fail(what + ": no such file or directory: " + p.string());
}

void write_text_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out.flush()) throw std::runtime_error("short write to " + p.string());
}

// Zero-padded artifact names keep directory listings in frame order.
std::string index3(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", i);
  return buf;
}
std::string frame_name(int t) { return "frame_" + index3(t) + ".ppm"; }
std::string seed_name(int t) { return "seed_" + index3(t) + ".pgm"; }
std::string map_name(int t) { return "map_" + index3(t) + ".pgm"; }

// ---------------------------------------------------------------------------
// Config translation: typed getters over a key=value map that track which
// keys were consumed, so leftovers (typos) are reported instead of ignored.

struct ConfigReader {
  std::map<std::string, std::string> kv;
  std::set<std::string> used;
  std::string origin;

  ConfigReader(std::map<std::string, std::string> m, std::string from)
      : kv(std::move(m)), origin(std::move(from)) {}

  bool take(const std::string& k, std::string* out) {
    auto it = kv.find(k);
    if (it == kv.end()) return false;
    used.insert(k);
    *out = it->second;
    return true;
  }
  void take_int(const std::string& k, int* out) {
    std::string s;
    if (take(k, &s)) *out = static_cast<int>(to_ll(s, origin + ": " + k));
  }
  void take_u64(const std::string& k, std::uint64_t* out) {
    std::string s;
    if (!take(k, &s)) return;
    const long long v = to_ll(s, origin + ": " + k);
    if (v < 0)
      throw std::runtime_error(origin + ": " + k + " must be non-negative");
    *out = static_cast<std::uint64_t>(v);
  }
  void take_double(const std::string& k, double* out) {
    std::string s;
    if (take(k, &s)) *out = to_double(s, origin + ": " + k);
  }
  void take_bool(const std::string& k, bool* out) {
    std::string s;
    if (take(k, &s)) *out = to_bool(s, origin + ": " + k);
  }
  void take_rgb(const std::string& k, double out[3]) {
    std::string s;
    if (!take(k, &s)) return;
    std::vector<double> parts;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = s.find(',', start);
      const std::string item = comma == std::string::npos
                                   ? s.substr(start)
                                   : s.substr(start, comma - start);
      parts.push_back(to_double(item, origin + ": " + k));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (parts.size() != 3)
      throw std::runtime_error(origin + ": " + k +
                               " must be three comma-separated numbers");
    for (int i = 0; i < 3; ++i) out[i] = parts[static_cast<std::size_t>(i)];
  }
  template <typename E>
  void take_enum(const std::string& k, E* out,
                 const std::vector<std::pair<std::string, E>>& names) {
    std::string s;
    if (!take(k, &s)) return;
    for (const auto& [name, value] : names) {
      if (s == name) {
        *out = value;
        return;
      }
    }
    std::string allowed;
    for (const auto& [name, value] : names)
      allowed += (allowed.empty() ? "" : "|") + name;
    throw std::runtime_error(origin + ": " + k + " must be one of " + allowed +
                             ", got '" + s + "'");
  }
  void finish() const {
    for (const auto& [k, v] : kv)
      if (!used.count(k))
        throw std::runtime_error(origin + ": unknown key '" + k + "'");
  }
};

SynthConfig synth_config_from(ConfigReader& cfg, int* videos) {
  SynthConfig sc;
  cfg.take_int("videos", videos);
  cfg.take_int("frames", &sc.frames);
  cfg.take_int("height", &sc.height);
  cfg.take_int("width", &sc.width);
  cfg.take_enum<ObjectShape>("shape", &sc.shape,
                             {{"disk", ObjectShape::disk},
                              {"rectangle", ObjectShape::rectangle}});
  cfg.take_rgb("object_rgb", sc.object_rgb);
  cfg.take_double("radius", &sc.radius);
  cfg.take_double("half_width", &sc.half_width);
  cfg.take_double("half_height", &sc.half_height);
  cfg.take_double("color_drift", &sc.color_drift);
  cfg.take_enum<MotionModel>("motion", &sc.motion,
                             {{"linear", MotionModel::linear},
                              {"sinusoidal", MotionModel::sinusoidal},
                              {"teleport", MotionModel::teleport}});
  cfg.take_double("speed", &sc.speed);
  cfg.take_enum<BackgroundStyle>("background", &sc.background,
                                 {{"flat", BackgroundStyle::flat},
                                  {"two_tone", BackgroundStyle::two_tone},
                                  {"noise", BackgroundStyle::noise}});
  cfg.take_rgb("background_rgb", sc.background_rgb);
  cfg.take_rgb("background_rgb2", sc.background_rgb2);
  cfg.take_double("under_activation", &sc.under_activation);
  cfg.take_int("blur_radius", &sc.blur_radius);
  cfg.take_int("false_activations", &sc.false_activations);
  cfg.take_double("false_blob_radius", &sc.false_blob_radius);
  cfg.take_u64("seed", &sc.seed);
  cfg.finish();
  return sc;
}

TrainConfig train_config_from(ConfigReader& cfg) {
  TrainConfig tc;
  cfg.take_int("n_frames", &tc.n_frames);
  cfg.take_double("lambda", &tc.lambda);
  cfg.take_double("lambda_c", &tc.lambda_c);
  cfg.take_enum<LambdaCMode>("lambda_c_mode", &tc.lambda_c_mode,
                             {{"adaptive", LambdaCMode::adaptive},
                              {"constant", LambdaCMode::constant}});
  cfg.take_int("epochs", &tc.epochs);
  cfg.take_double("learning_rate", &tc.learning_rate);
  cfg.take_double("z_init", &tc.z_init);
  cfg.take_double("z_factor", &tc.z_factor);
  cfg.take_double("z_max", &tc.z_max);
  cfg.take_enum<SamplingScheme>("sampling", &tc.sampling,
                                {{"adjacent", SamplingScheme::adjacent},
                                 {"interval", SamplingScheme::interval},
                                 {"gaussian", SamplingScheme::gaussian}});
  cfg.take_enum<ConcatDirection>(
      "concat_direction", &tc.concat_direction,
      {{"horizontal", ConcatDirection::horizontal},
       {"vertical", ConcatDirection::vertical}});
  cfg.take_u64("seed", &tc.seed);
  cfg.take_int("steps_per_epoch", &tc.steps_per_epoch);
  cfg.take_int("samples_per_side", &tc.samples_per_side);
  cfg.take_bool("size_barrier", &tc.size_barrier);
  cfg.take_bool("temporal_max_baseline", &tc.temporal_max_baseline);
  cfg.take_double("spatial_bandwidth", &tc.kernel.spatial_bandwidth);
  cfg.take_double("color_bandwidth", &tc.kernel.color_bandwidth);
  cfg.take_enum<CrfBackend>(
      "backend", &tc.crf.backend,
      {{"lattice", CrfBackend::kLattice}, {"exact", CrfBackend::kExact}});
  cfg.take_int("lattice_radius", &tc.crf.lattice_radius);
  cfg.finish();
  return tc;
}

// ---------------------------------------------------------------------------
// Subcommands.

int cmd_gen(int argc, char** argv) {
  const Args args = parse_args(argc, argv, 2, {"config", "out", "seed"});
  const fs::path config_path = args.need("config");
  const fs::path out_dir = args.need("out");
  require_cli_file(config_path, "--config");

  ConfigReader cfg(read_config(config_path), config_path.string());
  int videos = 1;
  SynthConfig base = synth_config_from(cfg, &videos);
  base.seed = flag_seed(args, base.seed);
  if (videos < 1) throw std::runtime_error("gen: videos must be >= 1");
  base.validate();

  fs::create_directories(out_dir);
  DatasetManifest manifest;
  manifest.config_echo = cfg.kv;
  manifest.config_echo["seed"] = std::to_string(base.seed);
  manifest.config_echo["videos"] = std::to_string(videos);

  for (int v = 0; v < videos; ++v) {
    SynthConfig sc = base;
    sc.seed = base.seed + static_cast<std::uint64_t>(v);
    const SynthResult data = generate(sc);

    VideoEntry entry;
    entry.id = "video_" + index3(v);
    entry.frame_count = sc.frames;
    fs::create_directories(out_dir / entry.id);
    for (int t = 0; t < sc.frames; ++t) {
      const std::size_t ti = static_cast<std::size_t>(t);
      entry.frame_paths.push_back(entry.id + "/" + frame_name(t));
      entry.seed_paths.push_back(entry.id + "/" + seed_name(t));
      write_frame(data.frames[ti], out_dir / entry.frame_paths.back());
      write_map(data.seeds[ti], out_dir / entry.seed_paths.back());
    }
    entry.boxes_path = entry.id + "/boxes.txt";
    write_boxes(data.boxes, out_dir / entry.boxes_path);
    manifest.videos.push_back(std::move(entry));
  }

  write_manifest(manifest, out_dir / "manifest.txt");
  std::cout << "wrote " << videos << " videos to " << out_dir.string() << "\n";
  return 0;
}

int cmd_train(int argc, char** argv) {
  const Args args = parse_args(argc, argv, 2,
                               {"data", "out", "config", "seed", "threads"},
                               {"timing"});
  const fs::path data_dir = args.need("data");
  const fs::path out_dir = args.need("out");
  require_cli_file(data_dir, "--data");
  require_cli_file(data_dir / "manifest.txt", "--data manifest");

  TrainConfig base;
  if (args.has("config")) {
    const fs::path config_path = args.values.at("config");
    require_cli_file(config_path, "--config");
    ConfigReader cfg(read_config(config_path), config_path.string());
    base = train_config_from(cfg);
  }
  base.seed = flag_seed(args, base.seed);
  base.crf.threads = flag_int(args, "threads", base.crf.threads);
  base.validate();

  const DatasetManifest manifest = read_manifest(data_dir / "manifest.txt");
  validate_dataset(manifest, data_dir);

  fs::create_directories(out_dir);
  for (std::size_t v = 0; v < manifest.videos.size(); ++v) {
    const VideoEntry& entry = manifest.videos[v];
    FrameSequence video;
    video.direction = base.concat_direction;
    std::vector<SeedCam> seeds;
    for (int t = 0; t < entry.frame_count; ++t) {
      const std::size_t ti = static_cast<std::size_t>(t);
      video.items.push_back(read_frame(data_dir / entry.frame_paths[ti]));
      seeds.push_back(read_map(data_dir / entry.seed_paths[ti]));
    }

    TrainConfig tc = base;
    tc.seed = base.seed + v;  // one independent stream per video
    const TrainResult result = train(video, seeds, tc);

    const fs::path vdir = out_dir / entry.id;
    fs::create_directories(vdir);
    for (int t = 0; t < entry.frame_count; ++t) {
      const CamPair cam = softmax_maps(result.logits, static_cast<std::size_t>(t));
      SeedCam map(cam.height, cam.width);
      map.values = cam.p1;
      write_map(map, vdir / map_name(t));
    }
    std::ofstream log(vdir / "log.csv", std::ios::binary | std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write " + (vdir / "log.csv").string());
    result.log.to_csv(log, /*include_wall_ms=*/args.on("timing"));
    if (!log.flush())
      throw std::runtime_error("short write to " + (vdir / "log.csv").string());
    std::cout << entry.id << ": trained " << entry.frame_count << " frames, "
              << result.log.steps.size() << " steps\n";
  }
  return 0;
}

int cmd_eval(int argc, char** argv) {
  const Args args = parse_args(argc, argv, 2, {"run", "data", "out"});
  const fs::path run_dir = args.need("run");
  const fs::path data_dir = args.need("data");
  const fs::path out_dir = args.get("out", run_dir.string());
  require_cli_file(run_dir, "--run");
  require_cli_file(data_dir, "--data");
  require_cli_file(data_dir / "manifest.txt", "--data manifest");

  const DatasetManifest manifest = read_manifest(data_dir / "manifest.txt");
  fs::create_directories(out_dir);

  std::vector<double> all_ious;
  std::vector<char> all_hits;
  for (const VideoEntry& entry : manifest.videos) {
    const std::vector<BBox> gts = read_boxes(data_dir / entry.boxes_path);
    std::vector<BBox> preds;
    for (int t = 0; t < entry.frame_count; ++t) {
      const fs::path mp = run_dir / entry.id / map_name(t);
      require_cli_file(mp, "--run map");
      preds.push_back(extract_bbox(read_map(mp)).box);
    }
    const EvalReport rep = evaluate_boxes(preds, gts);
    fs::create_directories(out_dir / entry.id);
    write_text_file(out_dir / entry.id / "frames.csv", per_frame_csv(rep));
    all_ious.insert(all_ious.end(), rep.ious.begin(), rep.ious.end());
    all_hits.insert(all_hits.end(), rep.hits.begin(), rep.hits.end());
  }
  if (all_hits.empty()) throw std::runtime_error("eval: dataset has no frames");

  long hits = 0;
  for (char h : all_hits) hits += h ? 1 : 0;
  const double corloc =
      static_cast<double>(hits) / static_cast<double>(all_hits.size());
  write_text_file(out_dir / "corloc.csv",
                  "corloc\n" + coloc::detail::format_double(corloc) + "\n");
  std::cout << "corloc " << coloc::detail::format_double(corloc) << "\n";
  return 0;
}

int cmd_bench(int argc, char** argv) {
  const Args args = parse_args(
      argc, argv, 2, {"sizes", "hw", "repeats", "seed", "threads", "out"});
  std::vector<int> sizes;
  try {
    sizes = parse_int_list(args.need("sizes"), "--sizes");
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    usage_fail(e.what());
  }

  BenchConfig bc;
  parse_hw(args.get("hw", "64x64"), &bc.height, &bc.width);
  bc.repeats = flag_int(args, "repeats", bc.repeats);
  bc.seed = flag_seed(args, bc.seed);
  bc.crf.threads = flag_int(args, "threads", bc.crf.threads);

  const std::vector<BenchRow> rows = bench_coloc(sizes, bc);
  const std::string csv = bench_csv(rows);
  std::cout << csv;
  if (args.has("out")) write_text_file(args.values.at("out"), csv);
  return 0;
}

int cmd_filter(int argc, char** argv) {
  const Args args = parse_args(
      argc, argv, 2,
      {"frame", "in", "out", "spatial", "color", "radius", "threads"});
  const fs::path frame_path = args.need("frame");
  const fs::path in_path = args.need("in");
  const fs::path out_path = args.need("out");
  require_cli_file(frame_path, "--frame");
  require_cli_file(in_path, "--in");

  const Frame frame = read_frame(frame_path);
  SeedCam map = read_map(in_path);
  if (map.height != frame.height || map.width != frame.width)
    throw std::runtime_error("filter: map is " + std::to_string(map.width) +
                             "x" + std::to_string(map.height) + " but frame is " +
                             std::to_string(frame.width) + "x" +
                             std::to_string(frame.height));

  KernelConfig kernel;
  kernel.spatial_bandwidth = flag_double(args, "spatial", kernel.spatial_bandwidth);
  kernel.color_bandwidth = flag_double(args, "color", kernel.color_bandwidth);
  kernel.validate();
  const int radius = flag_int(args, "radius", 0);
  const int threads = flag_int(args, "threads", 1);

  const std::vector<double> features = bilateral_features(frame, kernel);
  const PermutohedralLattice lattice(features, 5, radius);
  map.values = lattice.filter_normalized(map.values, 1, threads);
  write_map(map, out_path);
  std::cout << "wrote " << out_path.string() << "\n";
  return 0;
}

int cmd_gradcheck(int argc, char** argv) {
  const Args args = parse_args(argc, argv, 2, {"seed", "instances"});
  const std::uint64_t seed = flag_seed(args, 1234);
  const int instances = flag_int(args, "instances", 20);
  if (instances < 1) usage_fail("--instances: must be >= 1");

  const std::vector<GradCheckResult> results = gradcheck_all(seed, instances);
  std::cout << "loss,max_rel_err,components\n";
  bool ok = true;
  for (const GradCheckResult& r : results) {
    std::cout << r.name << "," << coloc::detail::format_double(r.max_rel_err)
              << "," << r.components << "\n";
    ok = ok && r.max_rel_err <= 1e-4 && r.components > 0;
  }
  if (!ok)
    throw std::runtime_error("gradcheck: a gradient exceeded 1e-4 relative error");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    if (argc < 2) {
      std::cerr << kUsage;
      return 2;
    }
    const std::string cmd = argv[1];
    if (cmd == "help" || cmd == "--help" || cmd == "-h") {
      std::cout << kUsage;
      return 0;
    }
    if (cmd == "gen") return cmd_gen(argc, argv);
    if (cmd == "train") return cmd_train(argc, argv);
    if (cmd == "eval") return cmd_eval(argc, argv);
    if (cmd == "bench") return cmd_bench(argc, argv);
    if (cmd == "filter") return cmd_filter(argc, argv);
    if (cmd == "gradcheck") return cmd_gradcheck(argc, argv);
    usage_fail("unknown subcommand '" + cmd + "'");
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
