#pragma once

// Turns a frozen seed activation map into sparse stochastic pixel
// pseudo-labels, one training step at a time:
//
//   1. otsu_threshold — 256-bin Otsu threshold over the map's values;
//   2. split_regions  — foreground = {p : seed(p) > threshold}, background
//                       = complement;
//   3. sample_pixels  — per step, draw one (or k) foreground pixel(s) with
//                       probability proportional to the seed activation and
//                       one (or k) background pixel(s) uniformly.
//
// All randomness flows through an explicit caller-owned Rng, so sampled
// mask sequences are bit-reproducible for a fixed seed.

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "coloc/image.hpp"
#include "coloc/rng.hpp"

namespace coloc {

// Disjoint foreground/background pixel sets covering the image, with the
// threshold that produced them.
struct RegionSplit {
  std::vector<PixelCoord> foreground;
  std::vector<PixelCoord> background;
  double threshold = 0.0;
  // The map could not be split (all values fall into one histogram bin);
  // the threshold is then the map's maximum, leaving the foreground empty.
  bool degenerate = false;
};

// 256-bin-histogram Otsu threshold of the seed map: the first bin edge
// maximizing the between-class variance.  Values must lie in [0, 1] (bins
// are min(255, floor(v * 256))).  A map whose values all land in a single
// bin cannot be split: the returned threshold is the map's maximum (so a
// strict > comparison yields an empty foreground) and, when `degenerate`
// is non-null, *degenerate is set.
inline double otsu_threshold(const SeedCam& seed, bool* degenerate = nullptr) {
  seed.validate();
  if (degenerate) *degenerate = false;

  std::int64_t count[256] = {0};
  for (double v : seed.values) {
    int bin = static_cast<int>(v * 256.0);
    count[std::clamp(bin, 0, 255)] += 1;
  }

  const std::int64_t total = static_cast<std::int64_t>(seed.pixels());
  std::int64_t weighted_total = 0;
  for (int b = 0; b < 256; ++b) weighted_total += count[b] * b;

  // Between-class variance at cut t (class 0: bins <= t):
  //   sigma_B^2(t) = (s0 * N - S * c0)^2 / (N^2 * c0 * (N - c0))
  // with c0/s0 the class-0 count and bin-weighted sum, S/N the totals.
  // The constant N^2 is dropped; long double keeps the integer products
  // exact for any realistic image size.
  int best_t = -1;
  long double best_var = 0.0L;
  std::int64_t c0 = 0, s0 = 0;
  for (int t = 0; t < 255; ++t) {
    c0 += count[t];
    s0 += count[t] * t;
    const std::int64_t c1 = total - c0;
    if (c0 == 0 || c1 == 0) continue;
    const long double diff = static_cast<long double>(s0) * total -
                             static_cast<long double>(weighted_total) * c0;
    const long double var =
        diff * diff / (static_cast<long double>(c0) * c1);
    if (var > best_var) {
      best_var = var;
      best_t = t;
    }
  }

  if (best_t < 0) {
    if (degenerate) *degenerate = true;
    return *std::max_element(seed.values.begin(), seed.values.end());
  }
  return (best_t + 1) / 256.0;
}

// Splits the image at the Otsu threshold: foreground strictly above,
// background everything else (ties go to the background).
inline RegionSplit split_regions(const SeedCam& seed) {
  RegionSplit split;
  split.threshold = otsu_threshold(seed, &split.degenerate);
  for (int y = 0; y < seed.height; ++y)
    for (int x = 0; x < seed.width; ++x) {
      if (seed.at(y, x) > split.threshold)
        split.foreground.push_back({x, y});
      else
        split.background.push_back({x, y});
    }
  return split;
}

namespace detail {

// Draws up to `k` distinct pixels from `set` (weighted when `weights` is
// non-empty, uniform otherwise) and labels them in the mask.
inline void draw_side(const std::vector<PixelCoord>& set,
                      std::span<const double> weights, int k, PixelLabel label,
                      Rng& rng, PartialMask& mask) {
  const int avail = static_cast<int>(set.size());
  const int want = std::min(k, avail);
  int drawn = 0;
  while (drawn < want) {
    const std::size_t pick = weights.empty()
                                 ? static_cast<std::size_t>(
                                       rng.uniform_int(avail))
                                 : rng.pick_weighted(weights);
    const PixelCoord p = set[pick];
    if (mask.labels[mask.idx(p.y, p.x)] != PixelLabel::unknown) continue;
    mask.add_sample(p, label);
    ++drawn;
  }
}

}  // namespace detail

// Draws the per-step pseudo-label mask: `samples_per_side` foreground
// pixels with probability proportional to the seed activation over the
// foreground set, and as many background pixels uniformly over the
// background set (all draws distinct).  An empty side contributes no
// samples and raises the corresponding degenerate flag on the mask.
inline PartialMask sample_pixels(const SeedCam& seed, const RegionSplit& split,
                                 Rng& rng, int samples_per_side = 1) {
  if (samples_per_side < 1)
    throw std::invalid_argument(
        "sample_pixels: samples_per_side must be >= 1, got " +
        std::to_string(samples_per_side));
  if (split.foreground.size() + split.background.size() !=
      static_cast<std::size_t>(seed.pixels()))
    throw std::invalid_argument(
        "sample_pixels: split does not cover the seed map");
  PartialMask mask(seed.height, seed.width);

  if (split.foreground.empty()) {
    mask.fg_degenerate = true;
  } else {
    std::vector<double> weights;
    weights.reserve(split.foreground.size());
    for (const PixelCoord& p : split.foreground)
      weights.push_back(seed.at(p.y, p.x));
    detail::draw_side(split.foreground, weights, samples_per_side,
                      PixelLabel::foreground, rng, mask);
  }

  if (split.background.empty()) {
    mask.bg_degenerate = true;
  } else {
    detail::draw_side(split.background, {}, samples_per_side,
                      PixelLabel::background, rng, mask);
  }
  return mask;
}

// Ingestion helper: min-max normalizes raw activation values to [0, 1].
// A (near-)constant map carries no ordering information and becomes all
// zeros.  Applied when maps enter the system from files or generators;
// maps already in [0, 1] keep their ordering and endpoints.
inline void min_max_normalize(std::vector<double>& values) {
  if (values.empty()) return;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi - lo < 1e-12) {
    std::fill(values.begin(), values.end(), 0.0);
    return;
  }
  for (double& v : values) v = (v - lo) / (hi - lo);
}

inline void min_max_normalize(SeedCam& seed) { min_max_normalize(seed.values); }

}  // namespace coloc
