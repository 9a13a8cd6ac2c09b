#pragma once

// Training loss terms and their exact analytic gradients with respect to
// the two-channel probability maps:
//
//   * partial_cross_entropy — supervision at a handful of sampled pixels;
//   * crf_frame_loss        — per-frame dense pairwise (CRF) energy with a
//                             bilateral position+color Gaussian affinity;
//   * coloc_loss            — the same energy with a color-only affinity
//                             over the pixels of several frames at once,
//                             coupling same-colored pixels across frames;
//   * size_barrier_loss     — log-barrier on the total mass of each map
//                             channel, keeping both regions non-empty;
//   * adaptive_coloc_term   — rescales the co-localization term by the
//                             reciprocal of its own magnitude so that its
//                             contribution to the objective is exactly
//                             +-lambda_c;
//   * total_loss            — the full training objective.
//
// The dense pairwise energy for maps s^r (r = 0 background, 1 foreground)
// over affinity W with zero diagonal is
//
//     E = sum_r  s_r^T W (1 - s_r),      dE/ds_r = W 1 - 2 W s_r
//
// (W symmetric).  W v is evaluated either exactly (O(N^2), for tests) or
// through the permutohedral lattice: the lattice filter has an exact unit
// diagonal, so W v = filter(v) - v subtracts the self-term exactly.
//
// Gradients are reported with respect to the probability maps; chaining
// through the softmax parameterization happens in the trainer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "coloc/image.hpp"
#include "coloc/lattice.hpp"

namespace coloc {

struct KernelConfig {
  double spatial_bandwidth = 100.0;  // pixels
  double color_bandwidth = 15.0;     // color units on the [0,255] scale

  void validate() const {
    if (!(spatial_bandwidth > 0.0) || !(color_bandwidth > 0.0))
      throw std::invalid_argument(
          "KernelConfig: bandwidths must be strictly positive");
  }
};

// How W v is evaluated.
enum class CrfBackend {
  kLattice,  // permutohedral-lattice approximation (fast, default)
  kExact,    // O(N^2) brute force (oracle for tests, small inputs only)
};

struct CrfOptions {
  CrfBackend backend = CrfBackend::kLattice;
  int threads = 1;         // channel-parallel filtering when > 1
  int lattice_radius = 0;  // blur stencil reach; 0 = automatic per dimension
  // Origin of the pixel coordinate system used by the bilateral affinity.
  // Positions enter the loss only through differences, so any choice gives
  // the same loss; exposed to make that invariance directly testable.
  double x_origin = 0.0;
  double y_origin = 0.0;
};

// Gradient with respect to one CamPair, matching its dimensions.
struct MapGrad {
  int height = 0;
  int width = 0;
  std::vector<double> s0;  // d(value)/d(s0(p)), row-major
  std::vector<double> s1;

  MapGrad() = default;
  MapGrad(int h, int w)
      : height(h),
        width(w),
        s0(static_cast<std::size_t>(h) * w, 0.0),
        s1(static_cast<std::size_t>(h) * w, 0.0) {}
};

struct LossValue {
  double value = 0.0;
  std::vector<MapGrad> grads;  // aligned with the input map sequence
  bool degenerate = false;     // a documented degenerate case was hit
};

// ---------------------------------------------------------------------------
// Feature builders (features are pre-divided by their bandwidths so the
// lattice/brute-force kernel runs at unit bandwidth).

// Bilateral features (x, y, r, g, b) / (sigma_s, sigma_s, sigma_c, ...),
// d = 5, one row per pixel in row-major order.  x_origin/y_origin shift
// the coordinate system; the affinity depends only on differences.
inline std::vector<double> bilateral_features(const Frame& frame,
                                              const KernelConfig& cfg,
                                              double x_origin = 0.0,
                                              double y_origin = 0.0) {
  cfg.validate();
  std::vector<double> f;
  f.reserve(static_cast<std::size_t>(frame.height) * frame.width * 5);
  const double inv_s = 1.0 / cfg.spatial_bandwidth;
  const double inv_c = 1.0 / cfg.color_bandwidth;
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      const double* px = frame.px(y, x);
      f.push_back((x + x_origin) * inv_s);
      f.push_back((y + y_origin) * inv_s);
      f.push_back(px[0] * inv_c);
      f.push_back(px[1] * inv_c);
      f.push_back(px[2] * inv_c);
    }
  }
  return f;
}

// Color-only features (r, g, b) / sigma_c, d = 3, for the pixels of every
// frame of the sequence in order.  Pixel positions never enter, so the
// result is independent of how frames would be laid out spatially.
inline std::vector<double> color_features(const FrameSequence& frames,
                                          const KernelConfig& cfg) {
  cfg.validate();
  frames.check_uniform();
  std::vector<double> f;
  f.reserve(frames.size() * static_cast<std::size_t>(frames[0].height) *
            frames[0].width * 3);
  const double inv_c = 1.0 / cfg.color_bandwidth;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const Frame& fr = frames[k];
    for (int y = 0; y < fr.height; ++y) {
      for (int x = 0; x < fr.width; ++x) {
        const double* px = fr.px(y, x);
        f.push_back(px[0] * inv_c);
        f.push_back(px[1] * inv_c);
        f.push_back(px[2] * inv_c);
      }
    }
  }
  return f;
}

namespace detail {

// W v for `channels` interleaved value vectors, where W is the unit-
// bandwidth Gaussian affinity over `features` with zero diagonal.  Both
// backends produce K v with an exact unit diagonal, so W v = K v - v.
inline std::vector<double> pairwise_transform(
    std::span<const double> features, int dimension,
    std::span<const double> values, int channels, const CrfOptions& opt,
    const PermutohedralLattice* prebuilt) {
  std::vector<double> out;
  if (opt.backend == CrfBackend::kExact) {
    if (prebuilt != nullptr)
      throw std::invalid_argument(
          "pairwise_transform: the exact backend cannot reuse a prebuilt "
          "lattice; call the overload taking frames instead");
    out = brute_force_filter(features, dimension, values, channels);
  } else if (prebuilt != nullptr) {
    out = prebuilt->filter(values, channels, opt.threads);
  } else {
    PermutohedralLattice lattice(features, dimension, opt.lattice_radius);
    out = lattice.filter(values, channels, opt.threads);
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= values[i];
  return out;
}

// Shared pairwise-energy core: value and per-pixel gradients of
// sum_r s_r^T W (1 - s_r) given stacked s0/s1 vectors of length n.
struct PairwiseEnergy {
  double value = 0.0;
  std::vector<double> grad0;  // W1 - 2 W s0
  std::vector<double> grad1;
};

inline PairwiseEnergy pairwise_energy(std::span<const double> features,
                                      int dimension,
                                      std::span<const double> s0,
                                      std::span<const double> s1,
                                      const CrfOptions& opt,
                                      const PermutohedralLattice* prebuilt) {
  const std::size_t n = s0.size();
  std::vector<double> stacked(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    stacked[i * 3 + 0] = s0[i];
    stacked[i * 3 + 1] = s1[i];
    stacked[i * 3 + 2] = 1.0;
  }
  std::vector<double> w =
      pairwise_transform(features, dimension, stacked, 3, opt, prebuilt);
  PairwiseEnergy e;
  e.grad0.resize(n);
  e.grad1.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w0 = w[i * 3 + 0];   // (W s0)_i
    const double w1 = w[i * 3 + 1];   // (W s1)_i
    const double w_one = w[i * 3 + 2];  // (W 1)_i
    e.value += s0[i] * (w_one - w0) + s1[i] * (w_one - w1);
    e.grad0[i] = w_one - 2.0 * w0;
    e.grad1[i] = w_one - 2.0 * w1;
  }
  return e;
}

inline void check_same_shape(int h1, int w1, int h2, int w2,
                             const char* what) {
  if (h1 != h2 || w1 != w2)
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(h1) + "x" + std::to_string(w1) +
                                " vs " + std::to_string(h2) + "x" +
                                std::to_string(w2) + ")");
}

constexpr double kLogClamp = 1e-8;

}  // namespace detail

// ---------------------------------------------------------------------------
// Loss terms.

// Cross-entropy at the labeled pixels of the mask only:
//   value = sum_{p labeled} -(1-Y(p)) log s0(p) - Y(p) log s1(p),
// with log arguments clamped at 1e-8.  An empty sampled set yields a zero
// loss with the degenerate flag set (not an error).
inline LossValue partial_cross_entropy(const PartialMask& mask,
                                       const CamPair& cam) {
  detail::check_same_shape(mask.height, mask.width, cam.height, cam.width,
                           "partial_cross_entropy");
  LossValue out;
  out.grads.emplace_back(cam.height, cam.width);
  if (mask.sampled.empty()) {
    out.degenerate = true;
    return out;
  }
  MapGrad& g = out.grads[0];
  for (const PixelCoord& p : mask.sampled) {
    const std::size_t i = cam.idx(p.y, p.x);
    const bool fg = mask.labels[i] == PixelLabel::foreground;
    const double s = fg ? cam.p1[i] : cam.p0[i];
    const double clamped = std::max(s, detail::kLogClamp);
    out.value -= std::log(clamped);
    (fg ? g.s1 : g.s0)[i] += -1.0 / clamped;
  }
  return out;
}

// Per-frame dense CRF energy with the bilateral position+color affinity
// W_ij = exp(-|p_i-p_j|^2/(2 sigma_s^2) - |c_i-c_j|^2/(2 sigma_c^2)),
// W_ii = 0.  Builds the bilateral lattice internally; see the overload
// below to reuse a prebuilt lattice across calls.
inline LossValue crf_frame_loss(const CamPair& cam, const Frame& frame,
                                const KernelConfig& cfg = {},
                                const CrfOptions& opt = {}) {
  detail::check_same_shape(cam.height, cam.width, frame.height, frame.width,
                           "crf_frame_loss");
  std::vector<double> features =
      bilateral_features(frame, cfg, opt.x_origin, opt.y_origin);
  detail::PairwiseEnergy e =
      detail::pairwise_energy(features, 5, cam.p0, cam.p1, opt, nullptr);
  LossValue out;
  out.value = e.value;
  out.grads.emplace_back(cam.height, cam.width);
  out.grads[0].s0 = std::move(e.grad0);
  out.grads[0].s1 = std::move(e.grad1);
  return out;
}

// Same loss over a lattice the caller built once (from
// bilateral_features(frame, cfg)) and reuses across steps.
inline LossValue crf_frame_loss(const CamPair& cam,
                                const PermutohedralLattice& lattice,
                                const CrfOptions& opt = {}) {
  if (lattice.point_count() !=
      static_cast<std::size_t>(cam.height) * cam.width)
    throw std::invalid_argument(
        "crf_frame_loss: lattice was built for a different pixel count");
  detail::PairwiseEnergy e =
      detail::pairwise_energy({}, lattice.dimension(), cam.p0, cam.p1, opt,
                              &lattice);
  LossValue out;
  out.value = e.value;
  out.grads.emplace_back(cam.height, cam.width);
  out.grads[0].s0 = std::move(e.grad0);
  out.grads[0].s1 = std::move(e.grad1);
  return out;
}

namespace detail {

inline LossValue coloc_from_energy(const CamSequence& cams,
                                   PairwiseEnergy&& e) {
  LossValue out;
  out.value = e.value;
  const std::size_t hw =
      static_cast<std::size_t>(cams[0].height) * cams[0].width;
  for (std::size_t k = 0; k < cams.size(); ++k) {
    MapGrad g(cams[0].height, cams[0].width);
    for (std::size_t i = 0; i < hw; ++i) {
      g.s0[i] = e.grad0[k * hw + i];
      g.s1[i] = e.grad1[k * hw + i];
    }
    out.grads.push_back(std::move(g));
  }
  return out;
}

inline void check_aligned(const FrameSequence& frames,
                          const CamSequence& cams) {
  frames.check_uniform();
  cams.check_uniform();
  if (frames.size() != cams.size())
    throw std::invalid_argument(
        "coloc_loss: frame and map sequences differ in length");
  check_same_shape(frames[0].height, frames[0].width, cams[0].height,
                   cams[0].width, "coloc_loss");
}

inline std::vector<double> stack_channel(const CamSequence& cams,
                                         const std::vector<double> CamPair::*m) {
  const std::size_t hw =
      static_cast<std::size_t>(cams[0].height) * cams[0].width;
  std::vector<double> s(cams.size() * hw);
  for (std::size_t k = 0; k < cams.size(); ++k)
    for (std::size_t i = 0; i < hw; ++i) s[k * hw + i] = (cams[k].*m)[i];
  return s;
}

}  // namespace detail

// Co-localization loss: the same pairwise energy with a color-only (d = 3)
// affinity over all n*H*W pixels of the frame sequence, so activations are
// coupled between same-colored pixels regardless of frame or position.
// Gradients are returned per frame in sequence order.
inline LossValue coloc_loss(const FrameSequence& frames,
                            const CamSequence& cams,
                            const KernelConfig& cfg = {},
                            const CrfOptions& opt = {}) {
  detail::check_aligned(frames, cams);
  std::vector<double> features = color_features(frames, cfg);
  std::vector<double> s0 = detail::stack_channel(cams, &CamPair::p0);
  std::vector<double> s1 = detail::stack_channel(cams, &CamPair::p1);
  detail::PairwiseEnergy e =
      detail::pairwise_energy(features, 3, s0, s1, opt, nullptr);
  return detail::coloc_from_energy(cams, std::move(e));
}

// Co-localization loss over a lattice the caller built once (from
// color_features(frames, cfg)) and reuses while the window is unchanged.
inline LossValue coloc_loss(const CamSequence& cams,
                            const PermutohedralLattice& lattice,
                            const CrfOptions& opt = {}) {
  cams.check_uniform();
  const std::size_t total =
      cams.size() * static_cast<std::size_t>(cams[0].height) * cams[0].width;
  if (lattice.point_count() != total)
    throw std::invalid_argument(
        "coloc_loss: lattice was built for a different pixel count");
  std::vector<double> s0 = detail::stack_channel(cams, &CamPair::p0);
  std::vector<double> s1 = detail::stack_channel(cams, &CamPair::p1);
  detail::PairwiseEnergy e = detail::pairwise_energy(
      {}, lattice.dimension(), s0, s1, opt, &lattice);
  return detail::coloc_from_energy(cams, std::move(e));
}

// Log-barrier on the size psi(s_r) = sum_p s_r(p) of both regions:
//   value = -(1/z) * (log psi(s0) + log psi(s1)),
// pushing both channels to keep mass.  Gradient is uniform over pixels:
// d/ds_r(p) = -1 / (z * psi(s_r)).  Log arguments are clamped at 1e-8;
// a channel with exactly zero mass is a degenerate-map error.
inline LossValue size_barrier_loss(const CamPair& cam, double z) {
  if (!(z > 0.0))
    throw std::invalid_argument("size_barrier_loss: z must be > 0, got " +
                                std::to_string(z));
  double psi0 = 0.0, psi1 = 0.0;
  for (std::size_t i = 0; i < cam.p0.size(); ++i) {
    psi0 += cam.p0[i];
    psi1 += cam.p1[i];
  }
  if (psi0 == 0.0 || psi1 == 0.0)
    throw std::domain_error(
        "size_barrier_loss: a map channel has zero total mass");
  const double c0 = std::max(psi0, detail::kLogClamp);
  const double c1 = std::max(psi1, detail::kLogClamp);
  LossValue out;
  out.value = -(std::log(c0) + std::log(c1)) / z;
  out.grads.emplace_back(cam.height, cam.width);
  MapGrad& g = out.grads[0];
  const double g0 = -1.0 / (z * c0);
  const double g1 = -1.0 / (z * c1);
  for (std::size_t i = 0; i < g.s0.size(); ++i) {
    g.s0[i] = g0;
    g.s1[i] = g1;
  }
  return out;
}

// Rescales the raw co-localization loss by the reciprocal of its own
// magnitude (treated as a constant): value becomes exactly +-lambda_c and
// grad becomes (lambda_c / |raw.value|) * raw.grad.  raw.value == 0 yields
// the zero LossValue with the degenerate flag (documented corner case).
inline LossValue adaptive_coloc_term(const LossValue& raw, double lambda_c) {
  if (!(lambda_c >= 1.0))
    throw std::invalid_argument(
        "adaptive_coloc_term: lambda_c must be >= 1, got " +
        std::to_string(lambda_c));
  LossValue out;
  if (raw.value == 0.0) {
    out.degenerate = true;
    for (const MapGrad& g : raw.grads)
      out.grads.emplace_back(g.height, g.width);
    return out;
  }
  const double mag = std::abs(raw.value);
  out.value = raw.value > 0.0 ? lambda_c : -lambda_c;
  const double scale = lambda_c / mag;
  for (const MapGrad& g : raw.grads) {
    MapGrad sg(g.height, g.width);
    for (std::size_t i = 0; i < g.s0.size(); ++i) {
      sg.s0[i] = scale * g.s0[i];
      sg.s1[i] = scale * g.s1[i];
    }
    out.grads.push_back(std::move(sg));
  }
  return out;
}

// Full objective for window frame t:
//
//   sum_p H_p(mask, cam_t) + lambda * R(cam_t, frame_t) + R_s(cam_t, z)
//     + adaptive(R_c(frames, cams), lambda_c)
//
// `t_index` locates cam_t/frame_t inside the window sequences; the
// co-localization gradient lands on every frame of the window, the other
// terms only on grads[t_index].  lambda_c == 0 disables the
// co-localization term entirely.
inline LossValue total_loss(const PartialMask& mask, const CamPair& cam_t,
                            const Frame& frame_t, const FrameSequence& frames,
                            const CamSequence& cams, const KernelConfig& cfg,
                            double lambda, double lambda_c, double z,
                            std::size_t t_index,
                            const CrfOptions& opt = {}) {
  if (t_index >= cams.size())
    throw std::invalid_argument("total_loss: t_index " +
                                std::to_string(t_index) +
                                " outside the window of " +
                                std::to_string(cams.size()) + " frames");
  detail::check_aligned(frames, cams);
  detail::check_same_shape(cam_t.height, cam_t.width, cams[0].height,
                           cams[0].width, "total_loss");
  LossValue ce = partial_cross_entropy(mask, cam_t);
  LossValue crf = crf_frame_loss(cam_t, frame_t, cfg, opt);
  LossValue size = size_barrier_loss(cam_t, z);

  LossValue out;
  out.degenerate = ce.degenerate;
  for (std::size_t k = 0; k < cams.size(); ++k)
    out.grads.emplace_back(cams[0].height, cams[0].width);

  out.value = ce.value + lambda * crf.value + size.value;
  MapGrad& gt = out.grads[t_index];
  for (std::size_t i = 0; i < gt.s0.size(); ++i) {
    gt.s0[i] = ce.grads[0].s0[i] + lambda * crf.grads[0].s0[i] +
               size.grads[0].s0[i];
    gt.s1[i] = ce.grads[0].s1[i] + lambda * crf.grads[0].s1[i] +
               size.grads[0].s1[i];
  }

  if (lambda_c != 0.0) {
    LossValue coloc = coloc_loss(frames, cams, cfg, opt);
    LossValue scaled = adaptive_coloc_term(coloc, lambda_c);
    out.degenerate = out.degenerate || scaled.degenerate;
    out.value += scaled.value;
    for (std::size_t k = 0; k < cams.size(); ++k) {
      MapGrad& g = out.grads[k];
      for (std::size_t i = 0; i < g.s0.size(); ++i) {
        g.s0[i] += scaled.grads[k].s0[i];
        g.s1[i] += scaled.grads[k].s1[i];
      }
    }
  }
  return out;
}

}  // namespace coloc
