#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

// Core value types shared by every module. Pixel indexing is row-major with
// the origin at the top-left corner: index = y * width + x.

namespace coloc {

struct PixelCoord {
  int x = 0;
  int y = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

// RGB frame with real-valued channels in [0, 255]. Color is kept on the
// 0..255 scale so the default color bandwidth of 15 applies unscaled.
struct Frame {
  int height = 0;
  int width = 0;
  std::vector<double> rgb;  // 3 * height * width, [r,g,b] per pixel

  Frame() = default;
  Frame(int h, int w) : height(h), width(w), rgb(3u * pixel_count_of(h, w), 0.0) {
    if (h < 1 || w < 1) throw std::invalid_argument("Frame: height and width must be >= 1");
  }

  int pixels() const { return height * width; }
  double* px(int y, int x) { return rgb.data() + 3 * (static_cast<size_t>(y) * width + x); }
  const double* px(int y, int x) const {
    return rgb.data() + 3 * (static_cast<size_t>(y) * width + x);
  }
  void set(int y, int x, double r, double g, double b) {
    double* p = px(y, x);
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  void validate() const {
    if (height < 1 || width < 1) throw std::invalid_argument("Frame: empty");
    if (rgb.size() != 3u * static_cast<size_t>(height) * width)
      throw std::invalid_argument("Frame: rgb buffer size mismatch");
    for (double v : rgb)
      if (!(v >= 0.0 && v <= 255.0)) throw std::invalid_argument("Frame: channel outside [0,255]");
  }

 private:
  static size_t pixel_count_of(int h, int w) {
    return static_cast<size_t>(h < 0 ? 0 : h) * static_cast<size_t>(w < 0 ? 0 : w);
  }
};

// Two-channel softmax map: p0 = background, p1 = foreground probability.
// p0 + p1 = 1 at every pixel within kNormTolerance.
struct CamPair {
  static constexpr double kNormTolerance = 1e-6;

  int height = 0;
  int width = 0;
  std::vector<double> p0;  // background
  std::vector<double> p1;  // foreground

  CamPair() = default;
  CamPair(int h, int w)
      : height(h),
        width(w),
        p0(static_cast<size_t>(h) * w, 0.5),
        p1(static_cast<size_t>(h) * w, 0.5) {
    if (h < 1 || w < 1) throw std::invalid_argument("CamPair: height and width must be >= 1");
  }

  int pixels() const { return height * width; }
  size_t idx(int y, int x) const { return static_cast<size_t>(y) * width + x; }

  void validate() const {
    if (height < 1 || width < 1) throw std::invalid_argument("CamPair: empty");
    if (p0.size() != static_cast<size_t>(pixels()) || p1.size() != p0.size())
      throw std::invalid_argument("CamPair: channel size mismatch");
    for (size_t i = 0; i < p0.size(); ++i) {
      if (p0[i] < 0.0 || p1[i] < 0.0)
        throw std::invalid_argument("CamPair: negative probability");
      if (std::abs(p0[i] + p1[i] - 1.0) > kNormTolerance)
        throw std::invalid_argument("CamPair: channels do not sum to 1");
    }
  }
};

// Frozen classifier activation map, one scalar in [0,1] per pixel.
struct SeedCam {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  SeedCam() = default;
  SeedCam(int h, int w) : height(h), width(w), values(static_cast<size_t>(h) * w, 0.0) {
    if (h < 1 || w < 1) throw std::invalid_argument("SeedCam: height and width must be >= 1");
  }

  int pixels() const { return height * width; }
  size_t idx(int y, int x) const { return static_cast<size_t>(y) * width + x; }
  double at(int y, int x) const { return values[idx(y, x)]; }

  void validate() const {
    if (height < 1 || width < 1) throw std::invalid_argument("SeedCam: empty");
    if (values.size() != static_cast<size_t>(pixels()))
      throw std::invalid_argument("SeedCam: buffer size mismatch");
    for (double v : values)
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("SeedCam: value outside [0,1]");
  }
};

enum class PixelLabel : uint8_t { background = 0, foreground = 1, unknown = 2 };

// Sparse pseudo-label mask: a handful of labeled pixels, everything else
// unknown. In standard operation one foreground and one background pixel.
struct PartialMask {
  int height = 0;
  int width = 0;
  std::vector<PixelLabel> labels;
  std::vector<PixelCoord> sampled;  // exactly the non-unknown pixels
  bool fg_degenerate = false;       // no foreground region was available
  bool bg_degenerate = false;

  PartialMask() = default;
  PartialMask(int h, int w)
      : height(h), width(w), labels(static_cast<size_t>(h) * w, PixelLabel::unknown) {
    if (h < 1 || w < 1) throw std::invalid_argument("PartialMask: height and width must be >= 1");
  }

  size_t idx(int y, int x) const { return static_cast<size_t>(y) * width + x; }

  void add_sample(PixelCoord p, PixelLabel label) {
    if (label == PixelLabel::unknown)
      throw std::invalid_argument("PartialMask: cannot sample an unknown label");
    labels[idx(p.y, p.x)] = label;
    sampled.push_back(p);
  }

  void validate() const {
    size_t labeled = 0;
    for (PixelLabel l : labels)
      if (l != PixelLabel::unknown) ++labeled;
    if (labeled != sampled.size())
      throw std::invalid_argument("PartialMask: sampled set out of sync with labels");
  }
};

// Axis-aligned box, half-open: x_max/y_max are one past the last covered
// pixel, so area = (x_max - x_min) * (y_max - y_min).
struct BBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  BBox() = default;
  BBox(int x0, int y0, int x1, int y1) : x_min(x0), y_min(y0), x_max(x1), y_max(y1) {}

  bool valid() const { return x_min < x_max && y_min < y_max; }
  long long area() const {
    return static_cast<long long>(x_max - x_min) * static_cast<long long>(y_max - y_min);
  }
  friend bool operator==(const BBox&, const BBox&) = default;
};

enum class ConcatDirection { horizontal, vertical };

template <typename T>
struct Sequence {
  std::vector<T> items;
  ConcatDirection direction = ConcatDirection::horizontal;

  size_t size() const { return items.size(); }
  const T& operator[](size_t i) const { return items[i]; }
  T& operator[](size_t i) { return items[i]; }

  void check_uniform() const {
    if (items.empty()) throw std::invalid_argument("sequence: must contain at least one element");
    for (const T& it : items)
      if (it.height != items.front().height || it.width != items.front().width)
        throw std::invalid_argument("sequence: members differ in dimensions");
  }
};

using FrameSequence = Sequence<Frame>;
using CamSequence = Sequence<CamPair>;

// Lays the n frames of a sequence out as one composite frame, side by side
// (horizontal) or stacked (vertical).
inline Frame concat_frames(const FrameSequence& seq) {
  seq.check_uniform();
  const int n = static_cast<int>(seq.size());
  const int h = seq.items.front().height;
  const int w = seq.items.front().width;
  Frame out(seq.direction == ConcatDirection::vertical ? n * h : h,
            seq.direction == ConcatDirection::vertical ? w : n * w);
  for (int k = 0; k < n; ++k) {
    const Frame& f = seq.items[k];
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double* src = f.px(y, x);
        double* dst = seq.direction == ConcatDirection::vertical ? out.px(k * h + y, x)
                                                                 : out.px(y, k * w + x);
        dst[0] = src[0];
        dst[1] = src[1];
        dst[2] = src[2];
      }
  }
  return out;
}

// Inverse of concat_frames; recovers the original sequence bit-exactly.
inline FrameSequence split_frames(const Frame& composite, int n, ConcatDirection dir) {
  if (n < 1) throw std::invalid_argument("split_frames: n must be >= 1");
  const bool vertical = dir == ConcatDirection::vertical;
  if ((vertical ? composite.height : composite.width) % n != 0)
    throw std::invalid_argument("split_frames: composite size not divisible by n");
  const int h = vertical ? composite.height / n : composite.height;
  const int w = vertical ? composite.width : composite.width / n;
  FrameSequence seq;
  seq.direction = dir;
  for (int k = 0; k < n; ++k) {
    Frame f(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double* src = vertical ? composite.px(k * h + y, x) : composite.px(y, k * w + x);
        f.set(y, x, src[0], src[1], src[2]);
      }
    seq.items.push_back(std::move(f));
  }
  return seq;
}

// Per-pixel two-way softmax over a pair of logits.
inline void softmax2(double l0, double l1, double& s0, double& s1) {
  const double m = l0 > l1 ? l0 : l1;
  const double e0 = std::exp(l0 - m);
  const double e1 = std::exp(l1 - m);
  const double z = e0 + e1;
  s0 = e0 / z;
  s1 = e1 / z;
}

}  // namespace coloc
