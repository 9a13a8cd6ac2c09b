#pragma once

// Finite-difference verification of every analytic loss gradient.
//
// Each check builds random small instances, parameterizes the maps by
// per-pixel logits (the trainer's parameterization), chains the analytic
// map-space gradient through the softmax, and compares it against central
// finite differences of the scalar loss with step 1e-4 on the logits,
// using the exact O(N^2) pairwise backend.  Reported is the maximum
// relative error over all components with |gradient| > 1e-8.
//
// For the total objective the co-localization normalizer |R_c| is frozen
// at the base point: the adaptive term treats its own magnitude as a
// constant, so the differentiable surrogate is (lambda_c / |R_c(base)|)
// * R_c(theta), whose gradient at the base point is exactly the one the
// adaptive term emits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "coloc/image.hpp"
#include "coloc/losses.hpp"
#include "coloc/rng.hpp"

namespace coloc {

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  long components = 0;  // gradient components compared
};

namespace gradcheck_detail {

// softmax over one pixel's logit pair applied to a whole field.
inline CamPair softmax_field(const std::vector<double>& logits, int h, int w) {
  CamPair cam(h, w);
  for (std::size_t i = 0; i < cam.p0.size(); ++i)
    softmax2(logits[i * 2], logits[i * 2 + 1], cam.p0[i], cam.p1[i]);
  return cam;
}

// d(loss)/d(logits) from d(loss)/d(maps) via the softmax Jacobian:
// dE/dl0 = s0 s1 (g0 - g1), dE/dl1 = s0 s1 (g1 - g0).
inline std::vector<double> chain_through_softmax(const CamPair& cam,
                                                 const MapGrad& g) {
  std::vector<double> out(cam.p0.size() * 2);
  for (std::size_t i = 0; i < cam.p0.size(); ++i) {
    const double j = cam.p0[i] * cam.p1[i];
    out[i * 2] = j * (g.s0[i] - g.s1[i]);
    out[i * 2 + 1] = j * (g.s1[i] - g.s0[i]);
  }
  return out;
}

inline std::vector<double> random_logits(Rng& rng, int h, int w) {
  std::vector<double> l(static_cast<std::size_t>(h) * w * 2);
  for (double& x : l) x = rng.uniform(-2.0, 2.0);
  return l;
}

// Two color regions plus mild per-pixel noise: the regime the fast filter's
// accuracy contract targets. Structured colors also keep the pairwise terms
// well conditioned for finite-difference probes; iid per-pixel colors would
// push most pair couplings into the kernel's dead zone, leaving differences
// near the arithmetic noise floor.
inline Frame random_frame(Rng& rng, int h, int w) {
  Frame f(h, w);
  double base[2][3];
  for (int k = 0; k < 3; ++k) {
    base[0][k] = rng.uniform(20.0, 110.0);
    base[1][k] = rng.uniform(145.0, 235.0);
  }
  const bool vertical_cut = rng.uniform(0.0, 1.0) < 0.5;
  const int cut = (vertical_cut ? w : h) / 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int region = ((vertical_cut ? x : y) >= cut) ? 1 : 0;
      for (int k = 0; k < 3; ++k) {
        const double v = base[region][k] + rng.normal(0.0, 4.0);
        f.px(y, x)[k] = std::min(255.0, std::max(0.0, v));
      }
    }
  }
  return f;
}

inline PartialMask random_mask(Rng& rng, int h, int w) {
  PartialMask m(h, w);
  const int fg = rng.uniform_int(h * w);
  int bg = rng.uniform_int(h * w);
  while (bg == fg) bg = rng.uniform_int(h * w);
  m.add_sample({fg % w, fg / w}, PixelLabel::foreground);
  m.add_sample({bg % w, bg / w}, PixelLabel::background);
  return m;
}

// Compares the analytic logit-space gradient of `energy` against central
// finite differences, folding the result into `res`.
inline void fd_compare(const std::function<double(const std::vector<double>&)>&
                           energy,
                       std::vector<double> logits,
                       const std::vector<double>& analytic,
                       GradCheckResult& res) {
  const double step = 1e-4;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (std::abs(analytic[i]) <= 1e-8) continue;
    const double saved = logits[i];
    logits[i] = saved + step;
    const double up = energy(logits);
    logits[i] = saved - step;
    const double down = energy(logits);
    logits[i] = saved;
    const double fd = (up - down) / (2.0 * step);
    const double rel =
        std::abs(analytic[i] - fd) / std::max(std::abs(analytic[i]),
                                              std::abs(fd));
    res.max_rel_err = std::max(res.max_rel_err, rel);
    ++res.components;
  }
}

}  // namespace gradcheck_detail

inline GradCheckResult gradcheck_partial_ce(std::uint64_t seed,
                                            int instances = 20, int h = 6,
                                            int w = 6) {
  namespace gd = gradcheck_detail;
  Rng rng(seed);
  GradCheckResult res{"partial_cross_entropy"};
  for (int it = 0; it < instances; ++it) {
    auto logits = gd::random_logits(rng, h, w);
    PartialMask mask = gd::random_mask(rng, h, w);
    CamPair cam = gd::softmax_field(logits, h, w);
    LossValue loss = partial_cross_entropy(mask, cam);
    auto analytic = gd::chain_through_softmax(cam, loss.grads[0]);
    gd::fd_compare(
        [&](const std::vector<double>& l) {
          return partial_cross_entropy(mask, gd::softmax_field(l, h, w)).value;
        },
        logits, analytic, res);
  }
  return res;
}

inline GradCheckResult gradcheck_crf(std::uint64_t seed, int instances = 20,
                                     int h = 6, int w = 6) {
  namespace gd = gradcheck_detail;
  Rng rng(seed);
  GradCheckResult res{"crf_frame_loss"};
  const KernelConfig cfg;
  CrfOptions opt;
  opt.backend = CrfBackend::kExact;
  for (int it = 0; it < instances; ++it) {
    auto logits = gd::random_logits(rng, h, w);
    Frame frame = gd::random_frame(rng, h, w);
    CamPair cam = gd::softmax_field(logits, h, w);
    LossValue loss = crf_frame_loss(cam, frame, cfg, opt);
    auto analytic = gd::chain_through_softmax(cam, loss.grads[0]);
    gd::fd_compare(
        [&](const std::vector<double>& l) {
          return crf_frame_loss(gd::softmax_field(l, h, w), frame, cfg, opt)
              .value;
        },
        logits, analytic, res);
  }
  return res;
}

inline GradCheckResult gradcheck_coloc(std::uint64_t seed, int instances = 20,
                                       int h = 6, int w = 6, int n = 2) {
  namespace gd = gradcheck_detail;
  Rng rng(seed);
  GradCheckResult res{"coloc_loss"};
  const KernelConfig cfg;
  CrfOptions opt;
  opt.backend = CrfBackend::kExact;
  for (int it = 0; it < instances; ++it) {
    FrameSequence frames;
    std::vector<std::vector<double>> logits(n);
    for (int k = 0; k < n; ++k) {
      frames.items.push_back(gd::random_frame(rng, h, w));
      logits[k] = gd::random_logits(rng, h, w);
    }
    auto cams_of = [&](const std::vector<std::vector<double>>& l) {
      CamSequence cams;
      for (int k = 0; k < n; ++k)
        cams.items.push_back(gd::softmax_field(l[k], h, w));
      return cams;
    };
    CamSequence cams = cams_of(logits);
    LossValue loss = coloc_loss(frames, cams, cfg, opt);
    for (int k = 0; k < n; ++k) {
      auto analytic = gd::chain_through_softmax(cams[k], loss.grads[k]);
      gd::fd_compare(
          [&](const std::vector<double>& l) {
            auto perturbed = logits;
            perturbed[k] = l;
            return coloc_loss(frames, cams_of(perturbed), cfg, opt).value;
          },
          logits[k], analytic, res);
    }
  }
  return res;
}

inline GradCheckResult gradcheck_size(std::uint64_t seed, int instances = 20,
                                      int h = 6, int w = 6) {
  namespace gd = gradcheck_detail;
  Rng rng(seed);
  GradCheckResult res{"size_barrier_loss"};
  for (int it = 0; it < instances; ++it) {
    auto logits = gd::random_logits(rng, h, w);
    const double z = rng.uniform(1.0, 10.0);
    CamPair cam = gd::softmax_field(logits, h, w);
    LossValue loss = size_barrier_loss(cam, z);
    auto analytic = gd::chain_through_softmax(cam, loss.grads[0]);
    gd::fd_compare(
        [&](const std::vector<double>& l) {
          return size_barrier_loss(gd::softmax_field(l, h, w), z).value;
        },
        logits, analytic, res);
  }
  return res;
}

inline GradCheckResult gradcheck_total(std::uint64_t seed, int instances = 20,
                                       int h = 6, int w = 6, int n = 2) {
  namespace gd = gradcheck_detail;
  Rng rng(seed);
  GradCheckResult res{"total_loss"};
  const KernelConfig cfg;
  CrfOptions opt;
  opt.backend = CrfBackend::kExact;
  const double lambda = 0.5;    // large enough for the CRF term to register
  const double lambda_c = 3.0;
  for (int it = 0; it < instances; ++it) {
    FrameSequence frames;
    std::vector<std::vector<double>> logits(n);
    for (int k = 0; k < n; ++k) {
      frames.items.push_back(gd::random_frame(rng, h, w));
      logits[k] = gd::random_logits(rng, h, w);
    }
    PartialMask mask = gd::random_mask(rng, h, w);
    const double z = rng.uniform(1.0, 10.0);
    const std::size_t t_index = n - 1;
    auto cams_of = [&](const std::vector<std::vector<double>>& l) {
      CamSequence cams;
      for (int k = 0; k < n; ++k)
        cams.items.push_back(gd::softmax_field(l[k], h, w));
      return cams;
    };
    CamSequence cams = cams_of(logits);
    LossValue loss =
        total_loss(mask, cams[t_index], frames[t_index], frames, cams, cfg,
                   lambda, lambda_c, z, t_index, opt);
    // Differentiable surrogate with the co-localization normalizer frozen
    // at the base point (the adaptive term's stop-gradient semantics).
    const double frozen_mag =
        std::abs(coloc_loss(frames, cams, cfg, opt).value);
    auto energy = [&](const std::vector<std::vector<double>>& l) {
      CamSequence c = cams_of(l);
      double e = partial_cross_entropy(mask, c[t_index]).value;
      e += lambda *
           crf_frame_loss(c[t_index], frames[t_index], cfg, opt).value;
      e += size_barrier_loss(c[t_index], z).value;
      e += lambda_c / frozen_mag * coloc_loss(frames, c, cfg, opt).value;
      return e;
    };
    for (int k = 0; k < n; ++k) {
      auto analytic = gd::chain_through_softmax(cams[k], loss.grads[k]);
      gd::fd_compare(
          [&](const std::vector<double>& l) {
            auto perturbed = logits;
            perturbed[k] = l;
            return energy(perturbed);
          },
          logits[k], analytic, res);
    }
  }
  return res;
}

// Runs every gradient check; all max_rel_err values should be <= 1e-4.
inline std::vector<GradCheckResult> gradcheck_all(std::uint64_t seed,
                                                  int instances = 20) {
  return {gradcheck_partial_ce(seed + 1, instances),
          gradcheck_crf(seed + 2, instances),
          gradcheck_coloc(seed + 3, instances),
          gradcheck_size(seed + 4, instances),
          gradcheck_total(seed + 5, instances)};
}

}  // namespace coloc
