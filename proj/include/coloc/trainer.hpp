#pragma once

// Direct optimization of per-frame two-channel maps against the composite
// objective: partial cross-entropy on sampled pixel pseudo-labels, the
// bilateral dense-CRF smoothness energy, a log-barrier size term on both
// region masses, and the color-only co-localization coupling over a sampled
// frame window.
//
// The maps are parameterized as raw per-pixel logits; every loss gradient is
// taken with respect to the softmax probabilities and pulled back through
// the 2-way softmax Jacobian, so the maps satisfy the probability-pair
// invariants at every step without projection.  Updates are plain SGD with
// a fixed learning rate.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coloc/image.hpp"
#include "coloc/lattice.hpp"
#include "coloc/losses.hpp"
#include "coloc/pseudo_labels.hpp"
#include "coloc/rng.hpp"
#include "coloc/text.hpp"

namespace coloc {

// How the n window frames are drawn from the video (always without
// repetition).
enum class SamplingScheme {
  adjacent,  // a uniform anchor frame and its n-1 predecessors
  interval,  // one uniform draw from each of n equal disjoint intervals
  gaussian,  // n distinct draws centered on the middle of the video
};

// How the co-localization term enters the total loss.
enum class LambdaCMode {
  adaptive,  // rescaled by its own magnitude: contributes exactly +-lambda_c
  constant,  // plain fixed-coefficient weighting
};

struct TrainConfig {
  int n_frames = 4;       // window size n
  double lambda = 2e-9;   // per-frame CRF weight
  double lambda_c = 9.0;  // co-localization weight
  LambdaCMode lambda_c_mode = LambdaCMode::adaptive;
  int epochs = 10;
  double learning_rate = 0.1;  // typical grid: {0.1, 0.01, 0.001}
  double z_init = 1.0;         // log-barrier coefficient schedule
  double z_factor = 1.01;
  double z_max = 10.0;
  SamplingScheme sampling = SamplingScheme::adjacent;
  ConcatDirection concat_direction = ConcatDirection::horizontal;
  std::uint64_t seed = 1234;

  // Steps per epoch; 0 picks ceil(video_length / n_frames) so one epoch
  // draws about one video's worth of frames.
  int steps_per_epoch = 0;
  // Pseudo-label pixels drawn per side (foreground/background) per frame.
  int samples_per_side = 1;

  // Ablation switches.
  bool size_barrier = true;  // keep the log-barrier size term
  // Replaces the co-localization term by per-pixel temporal max-pooling of
  // the seed maps over the window: pseudo-labels are sampled from the pooled
  // seed and no cross-frame coupling is applied.
  bool temporal_max_baseline = false;

  KernelConfig kernel;  // affinity bandwidths shared by CRF and CoLoc
  CrfOptions crf;       // filter backend options

  void validate() const {
    if (n_frames < 1)
      throw std::invalid_argument("TrainConfig: n_frames must be >= 1");
    if (!(lambda >= 0.0))
      throw std::invalid_argument("TrainConfig: lambda must be >= 0");
    if (!(lambda_c >= 0.0))
      throw std::invalid_argument("TrainConfig: lambda_c must be >= 0");
    if (epochs < 1)
      throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (!(learning_rate > 0.0))
      throw std::invalid_argument(
          "TrainConfig: learning_rate must be positive");
    if (!(z_init > 0.0) || !(z_factor > 0.0) || !(z_max > 0.0))
      throw std::invalid_argument(
          "TrainConfig: z_init, z_factor, z_max must be positive");
    if (z_init > z_max)
      throw std::invalid_argument("TrainConfig: z_init must be <= z_max");
    if (steps_per_epoch < 0)
      throw std::invalid_argument(
          "TrainConfig: steps_per_epoch must be >= 0 (0 = automatic)");
    if (samples_per_side < 1)
      throw std::invalid_argument(
          "TrainConfig: samples_per_side must be >= 1");
    kernel.validate();
  }
};

// Per-frame H x W x 2 logits; channel 0 is background, channel 1 foreground,
// matching the CamPair channel order.
struct LogitField {
  int height = 0;
  int width = 0;
  std::vector<std::vector<double>> l0;  // one H*W plane per frame
  std::vector<std::vector<double>> l1;

  LogitField() = default;
  LogitField(std::size_t n_frames, int h, int w)
      : height(h),
        width(w),
        l0(n_frames, std::vector<double>(static_cast<std::size_t>(h) * w, 0.0)),
        l1(n_frames,
           std::vector<double>(static_cast<std::size_t>(h) * w, 0.0)) {
    if (h < 1 || w < 1)
      throw std::invalid_argument("LogitField: height and width must be >= 1");
  }

  std::size_t frames() const { return l0.size(); }

  void validate() const {
    if (height < 1 || width < 1)
      throw std::invalid_argument("LogitField: empty planes");
    if (l0.size() != l1.size())
      throw std::invalid_argument("LogitField: channel count mismatch");
    const std::size_t hw = static_cast<std::size_t>(height) * width;
    for (std::size_t t = 0; t < l0.size(); ++t) {
      if (l0[t].size() != hw || l1[t].size() != hw)
        throw std::invalid_argument("LogitField: plane size mismatch");
      for (std::size_t i = 0; i < hw; ++i)
        if (!std::isfinite(l0[t][i]) || !std::isfinite(l1[t][i]))
          throw std::invalid_argument("LogitField: non-finite logit");
    }
  }
};

// Per-pixel 2-way softmax of frame t's logits.  Numerically stable for any
// finite logits; the output satisfies the CamPair invariants exactly.
inline CamPair softmax_maps(const LogitField& logits, std::size_t t) {
  if (t >= logits.frames())
    throw std::invalid_argument("softmax_maps: frame index " +
                                std::to_string(t) + " out of range (" +
                                std::to_string(logits.frames()) + " frames)");
  CamPair cam(logits.height, logits.width);
  const std::vector<double>& l0 = logits.l0[t];
  const std::vector<double>& l1 = logits.l1[t];
  for (std::size_t i = 0; i < l0.size(); ++i) {
    const double m = std::max(l0[i], l1[i]);
    const double e0 = std::exp(l0[i] - m);
    const double e1 = std::exp(l1[i] - m);
    const double inv = 1.0 / (e0 + e1);
    cam.p0[i] = e0 * inv;
    cam.p1[i] = e1 * inv;
  }
  return cam;
}

// Draws the n distinct frame indices of one training window, ascending.
//
//  - adjacent: a uniform anchor t and the window {t-n+1, ..., t}; anchors
//    too close to the video start are clipped forward to {0, ..., n-1}.
//  - interval: the video is divided into n equal disjoint intervals
//    [floor(k L / n), floor((k+1) L / n)) and one index is drawn uniformly
//    from each.
//  - gaussian: n distinct draws from a normal centered on the middle frame
//    (mean (L-1)/2, sigma L/4), rounded to the nearest index and
//    rejection-resampled while out of range or already taken.
inline std::vector<int> sample_window(int video_length, int n,
                                      SamplingScheme scheme, Rng& rng) {
  if (video_length < 1)
    throw std::invalid_argument("sample_window: video_length must be >= 1");
  if (n < 1 || n > video_length)
    throw std::invalid_argument(
        "sample_window: window size " + std::to_string(n) +
        " must be in [1, video_length=" + std::to_string(video_length) + "]");
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n));
  switch (scheme) {
    case SamplingScheme::adjacent: {
      const int t = rng.uniform_int(video_length);
      const int first = std::max(0, t - n + 1);
      for (int i = 0; i < n; ++i) out.push_back(first + i);
      break;
    }
    case SamplingScheme::interval: {
      for (int k = 0; k < n; ++k) {
        const int lo = static_cast<int>(
            (static_cast<std::int64_t>(k) * video_length) / n);
        const int hi = static_cast<int>(
            (static_cast<std::int64_t>(k) + 1) * video_length / n);
        out.push_back(lo + rng.uniform_int(hi - lo));
      }
      break;
    }
    case SamplingScheme::gaussian: {
      const double mean = 0.5 * (video_length - 1);
      const double sigma = video_length / 4.0;
      std::vector<char> taken(static_cast<std::size_t>(video_length), 0);
      while (static_cast<int>(out.size()) < n) {
        const double g = rng.normal(mean, sigma);
        const long idx = std::lround(g);
        if (idx < 0 || idx >= video_length) continue;
        if (taken[static_cast<std::size_t>(idx)]) continue;
        taken[static_cast<std::size_t>(idx)] = 1;
        out.push_back(static_cast<int>(idx));
      }
      std::sort(out.begin(), out.end());
      break;
    }
  }
  return out;
}

// Log-barrier coefficient at a given epoch: min(z_init * z_factor^epoch,
// z_max).
inline double z_schedule(int epoch, double z_init = 1.0,
                         double z_factor = 1.01, double z_max = 10.0) {
  if (epoch < 0)
    throw std::invalid_argument("z_schedule: epoch must be >= 0");
  return std::min(z_init * std::pow(z_factor, epoch), z_max);
}

inline double z_schedule(int epoch, const TrainConfig& cfg) {
  return z_schedule(epoch, cfg.z_init, cfg.z_factor, cfg.z_max);
}

// One row of the training log; loss columns hold the values summed over the
// window of the step (R unweighted, the total applies lambda).
struct TrainStep {
  int step = 0;
  int epoch = 0;
  double z = 0.0;
  double h_p = 0.0;        // partial cross-entropy over the window frames
  double r = 0.0;          // per-frame CRF energies (unweighted sum)
  double r_s = 0.0;        // size barrier over the window frames
  double r_c_raw = 0.0;    // raw co-localization energy
  double r_c_scaled = 0.0; // its scaled loss contribution
  double total = 0.0;      // h_p + lambda * r + r_s + r_c_scaled
  double wall_ms = 0.0;    // wall-clock duration of the step
};

struct TrainingLog {
  std::vector<TrainStep> steps;

  // CSV with one row per step.  Wall-clock timing is a measurement, not a
  // function of the seed, so callers comparing logs for reproducibility
  // write with include_wall_ms = false.
  void to_csv(std::ostream& os, bool include_wall_ms = true) const {
    os << "step,epoch,z,H_p,R,R_s,R_c_raw,R_c_scaled,total";
    if (include_wall_ms) os << ",wall_ms";
    os << "\n";
    for (const TrainStep& s : steps) {
      os << s.step << ',' << s.epoch << ',' << detail::format_double(s.z)
         << ',' << detail::format_double(s.h_p) << ','
         << detail::format_double(s.r) << ',' << detail::format_double(s.r_s)
         << ',' << detail::format_double(s.r_c_raw) << ','
         << detail::format_double(s.r_c_scaled) << ','
         << detail::format_double(s.total);
      if (include_wall_ms) os << ',' << detail::format_double(s.wall_ms);
      os << "\n";
    }
  }

  std::string to_csv_string(bool include_wall_ms = true) const {
    std::ostringstream os;
    to_csv(os, include_wall_ms);
    return os.str();
  }
};

// Loss terms and per-frame gradients of one window evaluation.
struct WindowTerms {
  double h_p = 0.0;
  double r = 0.0;
  double r_s = 0.0;
  double r_c_raw = 0.0;
  double r_c_scaled = 0.0;
  double total = 0.0;
  std::vector<MapGrad> grads;  // one per window frame
  bool degenerate = false;
};

// Evaluates the full objective over one window: per-frame terms on every
// window frame, the co-localization term once over the whole window.
// `masks` holds one pseudo-label mask per window frame.  `lattices`, when
// non-empty, supplies one prebuilt bilateral lattice per window frame for
// the CRF term (aligned with the window); pass {} to build from the frames.
// `z` is the barrier coefficient; the barrier is skipped when
// cfg.size_barrier is false, the co-localization term when cfg.lambda_c is 0
// or the temporal max-pooling baseline is active.
inline WindowTerms window_loss(
    const FrameSequence& wframes, const CamSequence& wcams,
    const std::vector<PartialMask>& masks, double z, const TrainConfig& cfg,
    std::span<const PermutohedralLattice* const> lattices = {}) {
  detail::check_aligned(wframes, wcams);
  if (masks.size() != wframes.size())
    throw std::invalid_argument("window_loss: one mask per frame required");
  if (!lattices.empty() && lattices.size() != wframes.size())
    throw std::invalid_argument(
        "window_loss: lattice cache must align with the window");
  if (!(z > 0.0)) throw std::invalid_argument("window_loss: z must be > 0");

  const int h = wcams[0].height, w = wcams[0].width;
  WindowTerms out;
  out.grads.reserve(wframes.size());
  for (std::size_t k = 0; k < wframes.size(); ++k)
    out.grads.emplace_back(h, w);

  for (std::size_t k = 0; k < wframes.size(); ++k) {
    MapGrad& g = out.grads[k];
    LossValue ce = partial_cross_entropy(masks[k], wcams[k]);
    out.h_p += ce.value;
    out.degenerate = out.degenerate || ce.degenerate;
    for (std::size_t i = 0; i < g.s0.size(); ++i) {
      g.s0[i] += ce.grads[0].s0[i];
      g.s1[i] += ce.grads[0].s1[i];
    }
    if (cfg.lambda != 0.0) {
      LossValue crf =
          lattices.empty()
              ? crf_frame_loss(wcams[k], wframes[k], cfg.kernel, cfg.crf)
              : crf_frame_loss(wcams[k], *lattices[k], cfg.crf);
      out.r += crf.value;
      for (std::size_t i = 0; i < g.s0.size(); ++i) {
        g.s0[i] += cfg.lambda * crf.grads[0].s0[i];
        g.s1[i] += cfg.lambda * crf.grads[0].s1[i];
      }
    }
    if (cfg.size_barrier) {
      LossValue sb = size_barrier_loss(wcams[k], z);
      out.r_s += sb.value;
      for (std::size_t i = 0; i < g.s0.size(); ++i) {
        g.s0[i] += sb.grads[0].s0[i];
        g.s1[i] += sb.grads[0].s1[i];
      }
    }
  }

  if (cfg.lambda_c != 0.0 && !cfg.temporal_max_baseline) {
    LossValue raw = coloc_loss(wframes, wcams, cfg.kernel, cfg.crf);
    out.r_c_raw = raw.value;
    LossValue scaled;
    if (cfg.lambda_c_mode == LambdaCMode::adaptive) {
      scaled = adaptive_coloc_term(raw, cfg.lambda_c);
    } else {
      scaled = raw;
      scaled.value *= cfg.lambda_c;
      for (MapGrad& g : scaled.grads) {
        for (double& v : g.s0) v *= cfg.lambda_c;
        for (double& v : g.s1) v *= cfg.lambda_c;
      }
    }
    out.degenerate = out.degenerate || scaled.degenerate;
    out.r_c_scaled = scaled.value;
    for (std::size_t k = 0; k < wframes.size(); ++k) {
      MapGrad& g = out.grads[k];
      for (std::size_t i = 0; i < g.s0.size(); ++i) {
        g.s0[i] += scaled.grads[k].s0[i];
        g.s1[i] += scaled.grads[k].s1[i];
      }
    }
  }

  out.total = out.h_p + cfg.lambda * out.r + out.r_s + out.r_c_scaled;
  return out;
}

struct TrainResult {
  LogitField logits;
  TrainingLog log;
};

namespace detail {

// Per-pixel maximum of the seed maps over the window frames (the temporal
// max-pooling baseline's label source).
inline SeedCam pool_seeds(const std::vector<SeedCam>& seeds,
                          const std::vector<int>& window) {
  SeedCam pooled = seeds[static_cast<std::size_t>(window[0])];
  for (std::size_t k = 1; k < window.size(); ++k) {
    const SeedCam& s = seeds[static_cast<std::size_t>(window[k])];
    for (std::size_t i = 0; i < pooled.values.size(); ++i)
      pooled.values[i] = std::max(pooled.values[i], s.values[i]);
  }
  return pooled;
}

}  // namespace detail

// Optimizes one video's per-frame logits with SGD.  Each step draws a
// window, samples fresh pixel pseudo-labels for every window frame,
// evaluates the full objective, and pulls the map gradients back through
// the softmax:
//
//   d(loss)/d(l1) = s0 * s1 * (g_s1 - g_s0),   d(loss)/d(l0) = -that.
//
// Logits start at zero (uniform maps).  A non-finite total loss aborts with
// a diagnostic naming the step and the component values.
inline TrainResult train(const FrameSequence& video,
                         const std::vector<SeedCam>& seeds,
                         const TrainConfig& cfg) {
  cfg.validate();
  video.check_uniform();
  const int video_length = static_cast<int>(video.size());
  if (seeds.size() != video.size())
    throw std::invalid_argument("train: need one seed map per frame (" +
                                std::to_string(seeds.size()) + " seeds, " +
                                std::to_string(video.size()) + " frames)");
  const int h = video[0].height, w = video[0].width;
  for (const SeedCam& s : seeds) {
    s.validate();
    if (s.height != h || s.width != w)
      throw std::invalid_argument("train: seed/frame shape mismatch");
  }
  if (cfg.n_frames > video_length)
    throw std::invalid_argument("train: window of " +
                                std::to_string(cfg.n_frames) +
                                " frames exceeds the video length " +
                                std::to_string(video_length));

  // Thresholding the (frozen) seeds is deterministic; do it once.  The
  // temporal max-pooling baseline instead splits a pooled seed per window.
  std::vector<RegionSplit> splits;
  if (!cfg.temporal_max_baseline) {
    splits.reserve(seeds.size());
    for (const SeedCam& s : seeds) splits.push_back(split_regions(s));
  }

  // The bilateral affinity of a frame never changes; build each frame's
  // lattice once and reuse it every step that touches the frame.
  std::vector<std::unique_ptr<PermutohedralLattice>> bilateral(video.size());
  const bool cache_lattices =
      cfg.lambda != 0.0 && cfg.crf.backend == CrfBackend::kLattice;
  if (cache_lattices) {
    for (std::size_t t = 0; t < video.size(); ++t) {
      std::vector<double> f = bilateral_features(
          video[t], cfg.kernel, cfg.crf.x_origin, cfg.crf.y_origin);
      bilateral[t] = std::make_unique<PermutohedralLattice>(
          f, 5, cfg.crf.lattice_radius);
    }
  }

  Rng rng(cfg.seed);
  LogitField logits(video.size(), h, w);
  TrainingLog log;
  const int steps_per_epoch =
      cfg.steps_per_epoch > 0
          ? cfg.steps_per_epoch
          : (video_length + cfg.n_frames - 1) / cfg.n_frames;
  log.steps.reserve(static_cast<std::size_t>(cfg.epochs) * steps_per_epoch);

  int step_id = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double z = z_schedule(epoch, cfg);
    for (int s = 0; s < steps_per_epoch; ++s, ++step_id) {
      const auto t_start = std::chrono::steady_clock::now();

      const std::vector<int> window =
          sample_window(video_length, cfg.n_frames, cfg.sampling, rng);

      FrameSequence wframes;
      CamSequence wcams;
      wframes.direction = cfg.concat_direction;
      wcams.direction = cfg.concat_direction;
      std::vector<const PermutohedralLattice*> wlattices;
      for (int idx : window) {
        wframes.items.push_back(video[static_cast<std::size_t>(idx)]);
        wcams.items.push_back(
            softmax_maps(logits, static_cast<std::size_t>(idx)));
        if (cache_lattices)
          wlattices.push_back(bilateral[static_cast<std::size_t>(idx)].get());
      }

      std::vector<PartialMask> masks;
      masks.reserve(window.size());
      if (cfg.temporal_max_baseline) {
        const SeedCam pooled = detail::pool_seeds(seeds, window);
        const RegionSplit pooled_split = split_regions(pooled);
        for (std::size_t k = 0; k < window.size(); ++k)
          masks.push_back(
              sample_pixels(pooled, pooled_split, rng, cfg.samples_per_side));
      } else {
        for (int idx : window)
          masks.push_back(sample_pixels(seeds[static_cast<std::size_t>(idx)],
                                        splits[static_cast<std::size_t>(idx)],
                                        rng, cfg.samples_per_side));
      }

      WindowTerms terms = window_loss(
          wframes, wcams, masks, z, cfg,
          cache_lattices
              ? std::span<const PermutohedralLattice* const>(wlattices)
              : std::span<const PermutohedralLattice* const>{});

      if (!std::isfinite(terms.total))
        throw std::runtime_error(
            "train: non-finite total loss at step " + std::to_string(step_id) +
            " (epoch " + std::to_string(epoch) + "): H_p=" +
            std::to_string(terms.h_p) + " R=" + std::to_string(terms.r) +
            " R_s=" + std::to_string(terms.r_s) +
            " R_c_raw=" + std::to_string(terms.r_c_raw) +
            " R_c_scaled=" + std::to_string(terms.r_c_scaled));

      for (std::size_t k = 0; k < window.size(); ++k) {
        const std::size_t idx = static_cast<std::size_t>(window[k]);
        const CamPair& cam = wcams[k];
        const MapGrad& g = terms.grads[k];
        std::vector<double>& l0 = logits.l0[idx];
        std::vector<double>& l1 = logits.l1[idx];
        for (std::size_t i = 0; i < l0.size(); ++i) {
          const double gl1 =
              cam.p0[i] * cam.p1[i] * (g.s1[i] - g.s0[i]);
          l1[i] -= cfg.learning_rate * gl1;
          l0[i] += cfg.learning_rate * gl1;
        }
      }

      const auto t_end = std::chrono::steady_clock::now();
      TrainStep row;
      row.step = step_id;
      row.epoch = epoch;
      row.z = z;
      row.h_p = terms.h_p;
      row.r = terms.r;
      row.r_s = terms.r_s;
      row.r_c_raw = terms.r_c_raw;
      row.r_c_scaled = terms.r_c_scaled;
      row.total = terms.total;
      row.wall_ms =
          std::chrono::duration<double, std::milli>(t_end - t_start).count();
      log.steps.push_back(row);
    }
  }
  return {std::move(logits), std::move(log)};
}

}  // namespace coloc
