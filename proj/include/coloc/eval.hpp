#pragma once

// Localization scoring: box extraction from foreground maps (threshold,
// largest connected component, tight box), IoU and CorLoc over aligned box
// lists, and a wall-clock benchmark of the co-localization loss as a
// function of the window size.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "coloc/image.hpp"
#include "coloc/losses.hpp"
#include "coloc/pseudo_labels.hpp"
#include "coloc/rng.hpp"
#include "coloc/text.hpp"

namespace coloc {

struct BoxExtraction {
  BBox box;
  // No pixel lies strictly above the threshold (e.g. a constant map): the
  // box falls back to the full image.
  bool degenerate = false;
};

// Extracts one localization box from a foreground map: threshold at the
// between-class-variance optimum, keep the largest 8-connected component of
// the strictly-super-threshold set, return its tight (half-open) box.  Size
// ties between components are broken toward the earliest component in
// row-major scan order.
inline BoxExtraction extract_bbox(const SeedCam& fg) {
  fg.validate();
  const int h = fg.height, w = fg.width;
  const double thr = otsu_threshold(fg);

  std::vector<std::uint8_t> above(static_cast<std::size_t>(h) * w, 0);
  bool any = false;
  for (std::size_t i = 0; i < above.size(); ++i) {
    if (fg.values[i] > thr) {
      above[i] = 1;
      any = true;
    }
  }
  BoxExtraction out;
  if (!any) {
    out.box = BBox(0, 0, w, h);
    out.degenerate = true;
    return out;
  }

  // Flood-fill the super-threshold pixels; track the largest component's
  // tight bounds.  `above` doubles as the visited mask (cleared on visit).
  std::vector<std::int32_t> stack;
  long best_size = 0;
  BBox best;
  for (int sy = 0; sy < h; ++sy) {
    for (int sx = 0; sx < w; ++sx) {
      const std::size_t start = static_cast<std::size_t>(sy) * w + sx;
      if (!above[start]) continue;
      long size = 0;
      int x_min = sx, x_max = sx, y_min = sy, y_max = sy;
      above[start] = 0;
      stack.push_back(static_cast<std::int32_t>(start));
      while (!stack.empty()) {
        const std::int32_t idx = stack.back();
        stack.pop_back();
        const int y = idx / w, x = idx % w;
        ++size;
        x_min = std::min(x_min, x);
        x_max = std::max(x_max, x);
        y_min = std::min(y_min, y);
        y_max = std::max(y_max, y);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = y + dy, nx = x + dx;
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
            if (!above[nidx]) continue;
            above[nidx] = 0;
            stack.push_back(static_cast<std::int32_t>(nidx));
          }
        }
      }
      if (size > best_size) {
        best_size = size;
        best = BBox(x_min, y_min, x_max + 1, y_max + 1);
      }
    }
  }
  out.box = best;
  return out;
}

// Intersection over union of two half-open boxes.
inline double iou(const BBox& a, const BBox& b) {
  if (!a.valid() || !b.valid())
    throw std::invalid_argument("iou: boxes must be non-empty");
  const long long ix = std::max(
      0LL, static_cast<long long>(std::min(a.x_max, b.x_max)) -
               std::max(a.x_min, b.x_min));
  const long long iy = std::max(
      0LL, static_cast<long long>(std::min(a.y_max, b.y_max)) -
               std::max(a.y_min, b.y_min));
  const long long inter = ix * iy;
  const long long uni = a.area() + b.area() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Fraction of predictions overlapping their ground truth strictly above
// 0.5 IoU.
inline double corloc(const std::vector<BBox>& preds,
                     const std::vector<BBox>& gts) {
  if (preds.size() != gts.size())
    throw std::invalid_argument(
        "corloc: " + std::to_string(preds.size()) + " predictions vs " +
        std::to_string(gts.size()) + " ground-truth boxes");
  if (preds.empty())
    throw std::invalid_argument("corloc: need at least one box pair");
  long hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (iou(preds[i], gts[i]) > 0.5) ++hits;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

// Per-frame scores plus the aggregate, for report writing.
struct EvalReport {
  std::vector<double> ious;
  std::vector<char> hits;
  double corloc = 0.0;
};

inline EvalReport evaluate_boxes(const std::vector<BBox>& preds,
                                 const std::vector<BBox>& gts) {
  if (preds.size() != gts.size())
    throw std::invalid_argument(
        "evaluate_boxes: prediction/ground-truth length mismatch");
  if (preds.empty())
    throw std::invalid_argument("evaluate_boxes: need at least one pair");
  EvalReport rep;
  rep.ious.reserve(preds.size());
  rep.hits.reserve(preds.size());
  long hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double v = iou(preds[i], gts[i]);
    rep.ious.push_back(v);
    rep.hits.push_back(v > 0.5 ? 1 : 0);
    if (v > 0.5) ++hits;
  }
  rep.corloc = static_cast<double>(hits) / static_cast<double>(preds.size());
  return rep;
}

// CSV with one row per frame: frame index, IoU, hit flag.
inline std::string per_frame_csv(const EvalReport& rep) {
  std::ostringstream os;
  os << "frame,iou,hit\n";
  for (std::size_t i = 0; i < rep.ious.size(); ++i)
    os << i << ',' << detail::format_double(rep.ious[i]) << ','
       << static_cast<int>(rep.hits[i]) << "\n";
  return os.str();
}

inline std::string summary_csv(const EvalReport& rep) {
  return "corloc\n" + detail::format_double(rep.corloc) + "\n";
}

// ---------------------------------------------------------------------------
// Runtime benchmark of the co-localization loss.

struct BenchRow {
  int n = 0;          // frames in the window
  double wall_ms = 0; // median wall time of one loss evaluation
};

struct BenchConfig {
  int height = 64;
  int width = 64;
  int repeats = 5;  // median over this many timed evaluations
  std::uint64_t seed = 2024;
  KernelConfig kernel;
  CrfOptions crf;  // lattice backend, single-threaded by default

  void validate() const {
    if (height < 1 || width < 1)
      throw std::invalid_argument("BenchConfig: empty frames");
    if (repeats < 1)
      throw std::invalid_argument("BenchConfig: repeats must be >= 1");
    kernel.validate();
  }
};

// Times one full co-localization loss evaluation (features, filtering,
// value, gradients) over windows of `n` random frames with random maps,
// reporting the median of `repeats` runs per n.  Content is seeded, so the
// measured work is identical across processes; the times themselves are
// hardware-dependent measurements.
inline std::vector<BenchRow> bench_coloc(const std::vector<int>& n_values,
                                         const BenchConfig& bc = {}) {
  bc.validate();
  std::vector<BenchRow> rows;
  rows.reserve(n_values.size());
  for (int n : n_values) {
    if (n < 1)
      throw std::invalid_argument("bench_coloc: window sizes must be >= 1");
    Rng rng(bc.seed);
    FrameSequence frames;
    CamSequence cams;
    for (int k = 0; k < n; ++k) {
      Frame f(bc.height, bc.width);
      for (double& v : f.rgb) v = rng.uniform(0.0, 255.0);
      frames.items.push_back(std::move(f));
      CamPair cam(bc.height, bc.width);
      for (std::size_t i = 0; i < cam.p0.size(); ++i) {
        const double s1 = rng.uniform(0.0, 1.0);
        cam.p1[i] = s1;
        cam.p0[i] = 1.0 - s1;
      }
      cams.items.push_back(std::move(cam));
    }
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(bc.repeats));
    for (int rep = 0; rep < bc.repeats; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      LossValue loss = coloc_loss(frames, cams, bc.kernel, bc.crf);
      const auto t1 = std::chrono::steady_clock::now();
      if (!std::isfinite(loss.value))
        throw std::runtime_error("bench_coloc: non-finite loss value");
      times.push_back(
          std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    rows.push_back({n, times[times.size() / 2]});
  }
  return rows;
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "n,wall_ms\n";
  for (const BenchRow& r : rows)
    os << r.n << ',' << detail::format_double(r.wall_ms) << "\n";
  return os.str();
}

// Least-squares line fit with the coefficient of determination, for
// checking that the benchmark scales linearly in n.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 1.0;
};

inline LinearFit linear_fit(std::span<const double> x,
                            std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument(
        "linear_fit: need two aligned samples or more");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0)
    throw std::invalid_argument("linear_fit: x values are all equal");
  LinearFit fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double mean_y = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double pred = fit.slope * x[i] + fit.intercept;
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
  }
  fit.r2 = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
  return fit;
}

inline LinearFit linear_fit(const std::vector<BenchRow>& rows) {
  std::vector<double> x, y;
  x.reserve(rows.size());
  y.reserve(rows.size());
  for (const BenchRow& r : rows) {
    x.push_back(static_cast<double>(r.n));
    y.push_back(r.wall_ms);
  }
  return linear_fit(x, y);
}

}  // namespace coloc
