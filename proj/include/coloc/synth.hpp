#pragma once

// Synthetic video generation: one moving object (disk or rectangle) rendered
// over a configurable background, with per-frame ground-truth tight boxes and
// corrupted seed activation maps.  The corruption pipeline mirrors how real
// classifier heatmaps fail: a fraction of object pixels is dropped
// (under-activation of the less discriminative parts), spurious blobs appear
// on the background, and everything is smeared by a blur before min-max
// normalization.  All randomness flows from one generator seeded by the
// config, so generation is bit-deterministic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "image.hpp"
#include "pseudo_labels.hpp"
#include "rng.hpp"

namespace coloc {

enum class ObjectShape { disk, rectangle };
enum class MotionModel { linear, sinusoidal, teleport };
enum class BackgroundStyle { flat, two_tone, noise };

struct SynthConfig {
  int frames = 32;
  int height = 64;
  int width = 64;

  ObjectShape shape = ObjectShape::disk;
  double object_rgb[3] = {210.0, 70.0, 40.0};
  double radius = 10.0;       // disk radius, pixels
  double half_width = 10.0;   // rectangle half-extents, pixels
  double half_height = 7.0;
  // Per-frame additive drift of every object color channel; zero keeps the
  // object color constant across frames (the co-localization assumption),
  // nonzero probes how the losses degrade when that assumption breaks.
  double color_drift = 0.0;

  MotionModel motion = MotionModel::linear;
  // linear: pixels travelled per frame (direction drawn from the rng, walls
  // reflect).  sinusoidal: approximate peak pixels-per-frame of the
  // oscillation.  teleport: ignored (each frame draws a fresh position).
  double speed = 1.5;

  BackgroundStyle background = BackgroundStyle::flat;
  double background_rgb[3] = {40.0, 120.0, 190.0};
  double background_rgb2[3] = {70.0, 150.0, 60.0};  // two-tone / noise blend

  double under_activation = 0.0;  // u: fraction of object pixels zeroed
  int blur_radius = 0;            // box-blur radius applied to the seed
  int false_activations = 0;      // spurious background blobs in the seed
  double false_blob_radius = 2.0;

  std::uint64_t seed = 1234;

  double extent_x() const {
    return shape == ObjectShape::disk ? radius : half_width;
  }
  double extent_y() const {
    return shape == ObjectShape::disk ? radius : half_height;
  }

  void validate() const {
    if (frames < 1) throw std::invalid_argument("SynthConfig: frames must be >= 1");
    if (height < 1 || width < 1)
      throw std::invalid_argument("SynthConfig: frame dimensions must be >= 1");
    if (!(under_activation >= 0.0 && under_activation <= 1.0))
      throw std::invalid_argument("SynthConfig: under_activation must lie in [0,1]");
    if (blur_radius < 0) throw std::invalid_argument("SynthConfig: blur_radius must be >= 0");
    if (false_activations < 0)
      throw std::invalid_argument("SynthConfig: false_activations must be >= 0");
    if (false_blob_radius < 0.0)
      throw std::invalid_argument("SynthConfig: false_blob_radius must be >= 0");
    if (radius < 0.5 || half_width < 0.5 || half_height < 0.5)
      throw std::invalid_argument("SynthConfig: object extents must be >= 0.5 pixels");
    if (speed < 0.0) throw std::invalid_argument("SynthConfig: speed must be >= 0");
    if (2.0 * extent_x() + 1.0 > width || 2.0 * extent_y() + 1.0 > height)
      throw std::invalid_argument("SynthConfig: object does not fit inside the frame");
  }
};

struct SynthResult {
  FrameSequence frames;
  std::vector<BBox> boxes;      // tight ground-truth box per frame
  std::vector<SeedCam> seeds;   // corrupted, blurred, min-max normalized
  // True when a teleport destination had to be pulled back so the object
  // stays fully inside the frame (smooth motion never needs clamping).
  bool teleport_clamped = false;
};

namespace detail {

struct ObjectCenter {
  double x = 0.0, y = 0.0;
};

// Legal band for the object center such that the whole object stays inside
// [0, width-1] x [0, height-1] pixel centers.
struct CenterBand {
  double x_lo, x_hi, y_lo, y_hi;

  static CenterBand of(const SynthConfig& cfg) {
    return {cfg.extent_x(), cfg.width - 1 - cfg.extent_x(), cfg.extent_y(),
            cfg.height - 1 - cfg.extent_y()};
  }
  double clamp_x(double x) const { return std::min(std::max(x, x_lo), x_hi); }
  double clamp_y(double y) const { return std::min(std::max(y, y_lo), y_hi); }
};

// Reflect a coordinate into [lo, hi] (billiard-wall bounce), flipping the
// velocity sign when a wall is hit.
inline void bounce(double& p, double& v, double lo, double hi) {
  if (hi <= lo) {
    p = lo;
    v = 0.0;
    return;
  }
  while (p < lo || p > hi) {
    if (p < lo) p = 2.0 * lo - p;
    if (p > hi) p = 2.0 * hi - p;
    v = -v;
  }
}

// Per-frame object centers for the configured motion model.  Linear and
// sinusoidal trajectories are built to keep the object inside the frame at
// every step; teleport draws fresh positions and reports whether any draw
// needed clamping into the legal band.
inline std::vector<ObjectCenter> plan_motion(const SynthConfig& cfg, Rng& rng,
                                             bool* clamped) {
  const CenterBand band = CenterBand::of(cfg);
  std::vector<ObjectCenter> centers(static_cast<std::size_t>(cfg.frames));
  switch (cfg.motion) {
    case MotionModel::linear: {
      double x = rng.uniform(band.x_lo, band.x_hi);
      double y = rng.uniform(band.y_lo, band.y_hi);
      const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
      double vx = cfg.speed * std::cos(angle);
      double vy = cfg.speed * std::sin(angle);
      for (int t = 0; t < cfg.frames; ++t) {
        centers[t] = {x, y};
        x += vx;
        y += vy;
        bounce(x, vx, band.x_lo, band.x_hi);
        bounce(y, vy, band.y_lo, band.y_hi);
      }
      break;
    }
    case MotionModel::sinusoidal: {
      const double cx = 0.5 * (band.x_lo + band.x_hi);
      const double cy = 0.5 * (band.y_lo + band.y_hi);
      const double ax = 0.5 * (band.x_hi - band.x_lo);
      const double ay = 0.5 * (band.y_hi - band.y_lo);
      // Peak per-frame displacement of a*sin(w*t) is a*w; pick w so the
      // horizontal sweep moves at roughly cfg.speed pixels per frame, and
      // run the vertical sweep at double frequency (a Lissajous path, so the
      // object visits the whole frame instead of one diagonal).
      const double w = cfg.speed / std::max(ax, 1.0);
      const double phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
      for (int t = 0; t < cfg.frames; ++t) {
        centers[t] = {cx + ax * std::sin(w * t + phase),
                      cy + ay * std::sin(2.0 * w * t + 0.5 * phase)};
      }
      break;
    }
    case MotionModel::teleport: {
      for (int t = 0; t < cfg.frames; ++t) {
        const double rx = rng.uniform(0.0, cfg.width - 1.0);
        const double ry = rng.uniform(0.0, cfg.height - 1.0);
        const double x = band.clamp_x(rx);
        const double y = band.clamp_y(ry);
        if (clamped && (x != rx || y != ry)) *clamped = true;
        centers[t] = {x, y};
      }
      break;
    }
  }
  return centers;
}

inline bool inside_object(const SynthConfig& cfg, ObjectCenter c, int y, int x) {
  if (cfg.shape == ObjectShape::disk) {
    const double dx = x - c.x, dy = y - c.y;
    return dx * dx + dy * dy <= cfg.radius * cfg.radius;
  }
  return std::abs(x - c.x) <= cfg.half_width && std::abs(y - c.y) <= cfg.half_height;
}

// Smooth value-noise field in [0,1]: random values on a coarse grid,
// bilinearly interpolated to pixel resolution.
inline std::vector<double> noise_field(int height, int width, Rng& rng) {
  const int step = 8;
  const int gh = height / step + 2, gw = width / step + 2;
  std::vector<double> grid(static_cast<std::size_t>(gh) * gw);
  for (double& g : grid) g = rng.uniform(0.0, 1.0);
  std::vector<double> field(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    const double gy = static_cast<double>(y) / step;
    const int y0 = static_cast<int>(gy);
    const double fy = gy - y0;
    for (int x = 0; x < width; ++x) {
      const double gx = static_cast<double>(x) / step;
      const int x0 = static_cast<int>(gx);
      const double fx = gx - x0;
      const double v00 = grid[static_cast<std::size_t>(y0) * gw + x0];
      const double v01 = grid[static_cast<std::size_t>(y0) * gw + x0 + 1];
      const double v10 = grid[static_cast<std::size_t>(y0 + 1) * gw + x0];
      const double v11 = grid[static_cast<std::size_t>(y0 + 1) * gw + x0 + 1];
      field[static_cast<std::size_t>(y) * width + x] =
          (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
    }
  }
  return field;
}

// Separable box blur of integer radius; windows are truncated at the frame
// border and renormalized, so a signal in [0,1] stays in [0,1].
inline void box_blur(std::vector<double>& values, int height, int width, int radius) {
  if (radius <= 0) return;
  std::vector<double> tmp(values.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double sum = 0.0;
      int count = 0;
      for (int k = std::max(0, x - radius); k <= std::min(width - 1, x + radius); ++k) {
        sum += values[static_cast<std::size_t>(y) * width + k];
        ++count;
      }
      tmp[static_cast<std::size_t>(y) * width + x] = sum / count;
    }
  }
  for (int x = 0; x < width; ++x) {
    for (int y = 0; y < height; ++y) {
      double sum = 0.0;
      int count = 0;
      for (int k = std::max(0, y - radius); k <= std::min(height - 1, y + radius); ++k) {
        sum += tmp[static_cast<std::size_t>(k) * width + x];
        ++count;
      }
      values[static_cast<std::size_t>(y) * width + x] = sum / count;
    }
  }
}

inline BBox tight_box(const std::vector<std::uint8_t>& mask, int height, int width) {
  int x0 = width, y0 = height, x1 = -1, y1 = -1;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (mask[static_cast<std::size_t>(y) * width + x]) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return BBox{};  // empty mask: invalid box
  return BBox{x0, y0, x1 + 1, y1 + 1};
}

}  // namespace detail

// Renders the configured video.  Draw order from the config seed is fixed:
// background field, motion plan, then per-frame seed corruption (zeroed
// object pixels, then blob placement), so identical configs reproduce
// identical bytes.
inline SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SynthResult out;

  std::vector<double> field;
  if (cfg.background == BackgroundStyle::noise)
    field = detail::noise_field(cfg.height, cfg.width, rng);

  std::vector<detail::ObjectCenter> centers =
      detail::plan_motion(cfg, rng, &out.teleport_clamped);
  if (cfg.motion != MotionModel::teleport) out.teleport_clamped = false;

  out.frames.items.reserve(cfg.frames);
  out.boxes.reserve(cfg.frames);
  out.seeds.reserve(cfg.frames);

  std::vector<std::uint8_t> mask(static_cast<std::size_t>(cfg.height) * cfg.width);
  std::vector<int> object_pixels;
  for (int t = 0; t < cfg.frames; ++t) {
    const detail::ObjectCenter c = centers[static_cast<std::size_t>(t)];

    // Rasterize the object mask.
    object_pixels.clear();
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * cfg.width + x;
        mask[i] = detail::inside_object(cfg, c, y, x) ? 1 : 0;
        if (mask[i]) object_pixels.push_back(static_cast<int>(i));
      }

    // Render the frame: background style, then the object on top.
    Frame frame(cfg.height, cfg.width);
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * cfg.width + x;
        double* px = frame.px(y, x);
        if (mask[i]) {
          for (int k = 0; k < 3; ++k)
            px[k] = std::min(255.0, std::max(0.0, cfg.object_rgb[k] + cfg.color_drift * t));
        } else {
          switch (cfg.background) {
            case BackgroundStyle::flat:
              for (int k = 0; k < 3; ++k) px[k] = cfg.background_rgb[k];
              break;
            case BackgroundStyle::two_tone:
              for (int k = 0; k < 3; ++k)
                px[k] = x < cfg.width / 2 ? cfg.background_rgb[k] : cfg.background_rgb2[k];
              break;
            case BackgroundStyle::noise: {
              const double m = field[i];
              for (int k = 0; k < 3; ++k)
                px[k] = cfg.background_rgb[k] +
                        m * (cfg.background_rgb2[k] - cfg.background_rgb[k]);
              break;
            }
          }
        }
      }

    out.boxes.push_back(detail::tight_box(mask, cfg.height, cfg.width));

    // Seed: the mask with an exact ceil(u * |mask|)-sized random subset
    // zeroed, plus false-activation blobs on the background, then blur and
    // min-max normalization.
    SeedCam seed(cfg.height, cfg.width);
    for (int i : object_pixels) seed.values[static_cast<std::size_t>(i)] = 1.0;
    const auto n_obj = static_cast<long long>(object_pixels.size());
    const auto n_zero = static_cast<long long>(
        std::ceil(cfg.under_activation * static_cast<double>(n_obj)));
    for (long long z = 0; z < n_zero; ++z) {
      // Partial Fisher-Yates: draw one not-yet-zeroed object pixel.
      const long long pick = z + rng.uniform_int(static_cast<int>(n_obj - z));
      std::swap(object_pixels[static_cast<std::size_t>(z)],
                object_pixels[static_cast<std::size_t>(pick)]);
      seed.values[static_cast<std::size_t>(object_pixels[static_cast<std::size_t>(z)])] = 0.0;
    }
    for (int b = 0; b < cfg.false_activations; ++b) {
      int bx = 0, by = 0;
      bool found = false;
      for (int attempt = 0; attempt < 100 && !found; ++attempt) {
        bx = rng.uniform_int(cfg.width);
        by = rng.uniform_int(cfg.height);
        found = !mask[static_cast<std::size_t>(by) * cfg.width + bx];
      }
      if (!found) continue;  // background virtually nonexistent: skip blob
      const double r2 = cfg.false_blob_radius * cfg.false_blob_radius;
      for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * cfg.width + x;
          const double dx = x - bx, dy = y - by;
          if (!mask[i] && dx * dx + dy * dy <= r2) seed.values[i] = 1.0;
        }
    }
    detail::box_blur(seed.values, cfg.height, cfg.width, cfg.blur_radius);
    min_max_normalize(seed);
    seed.validate();
    out.seeds.push_back(std::move(seed));
    out.frames.items.push_back(std::move(frame));
  }
  return out;
}

}  // namespace coloc
