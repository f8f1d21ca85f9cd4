#include "tinc/augment.hpp"

#include <algorithm>
#include <cmath>

#include "tinc/preprocess.hpp"

namespace tinc {

void AugmentConfig::validate() const {
  if (!(crop_area_range.first > 0.0 && crop_area_range.first <= crop_area_range.second &&
        crop_area_range.second <= 1.0))
    throw std::invalid_argument("augment: crop_area_range must satisfy 0 < low <= high <= 1");
  if (blur_kernel % 2 == 0 || blur_kernel < 1) throw std::invalid_argument("augment: blur_kernel must be odd");
  if (slice_shift_max < 0) throw std::invalid_argument("augment: slice_shift_max must be >= 0");
  for (int d : output_shape)
    if (d <= 0) throw std::invalid_argument("augment: output_shape must be positive");
}

namespace {

// Bilinear in-plane resize of every slice to (oh, ow).
Volume resize_inplane(const Volume& v, int oh, int ow) {
  if (v.h == oh && v.w == ow) return v;
  Volume out(v.s, oh, ow);
  const double sy = double(v.h) / oh, sx = double(v.w) / ow;
  for (int z = 0; z < v.s; ++z) {
    auto src = v.slice(z);
    auto dst = out.slice(z);
    for (int y = 0; y < oh; ++y) {
      const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(v.h - 1));
      const int y0 = int(fy), y1 = std::min(y0 + 1, v.h - 1);
      const double wy = fy - y0;
      for (int x = 0; x < ow; ++x) {
        const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(v.w - 1));
        const int x0 = int(fx), x1 = std::min(x0 + 1, v.w - 1);
        const double wx = fx - x0;
        dst(y, x) = (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x1)) +
                    wy * ((1 - wx) * src(y1, x0) + wx * src(y1, x1));
      }
    }
  }
  return out;
}

// Mirror index into [0, n) with the edge sample included in the fold.
int mirror(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

}  // namespace

Volume random_crop_resize(const Volume& v, const AugmentConfig& cfg, Rng& rng, AppliedOps* ops) {
  double area = 1.0, aspect = 1.0;
  int ch = v.h, cw = v.w;
  bool fitted = false;
  for (int attempt = 0; attempt < 10 && !fitted; ++attempt) {
    area = rng.uniform(cfg.crop_area_range.first, cfg.crop_area_range.second);
    aspect = rng.uniform(3.0 / 4.0, 4.0 / 3.0);  // w/h
    ch = int(std::lround(std::sqrt(area * v.h * v.w / aspect)));
    cw = int(std::lround(std::sqrt(area * v.h * v.w * aspect)));
    fitted = ch >= 1 && ch <= v.h && cw >= 1 && cw <= v.w;
  }
  if (!fitted) {  // fall back to the full plane
    area = 1.0;
    aspect = double(v.w) / double(v.h);
    ch = v.h;
    cw = v.w;
  }
  const int cy = int(rng.uniform_int(0, v.h - ch));
  const int cx = int(rng.uniform_int(0, v.w - cw));
  if (ops) {
    ops->crop_area_frac = area;
    ops->crop_aspect = aspect;
    ops->crop_y = cy;
    ops->crop_x = cx;
    ops->crop_h = ch;
    ops->crop_w = cw;
  }
  Volume crop(v.s, ch, cw);
  for (int z = 0; z < v.s; ++z) crop.slice(z) = v.slice(z).block(cy, cx, ch, cw);
  return resize_inplane(crop, cfg.output_shape[1], cfg.output_shape[2]);
}

Volume random_hflip(const Volume& v, const AugmentConfig& cfg, Rng& rng, AppliedOps* ops) {
  const bool flip = rng.bernoulli(cfg.hflip_prob);
  if (ops) ops->hflip = flip;
  if (!flip) return v;
  Volume out(v.s, v.h, v.w);
  for (int z = 0; z < v.s; ++z) out.slice(z) = v.slice(z).rowwise().reverse();
  return out;
}

Volume intensity_jitter(const Volume& v, const AugmentConfig& cfg, Rng& rng, AppliedOps* ops) {
  const bool apply = rng.bernoulli(cfg.jitter_prob);
  const double b = rng.uniform(0.6, 1.4);
  const double k = rng.uniform(0.6, 1.4);
  if (ops) {
    ops->jitter = apply;
    ops->brightness = apply ? b : 1.0;
    ops->contrast = apply ? k : 1.0;
  }
  if (!apply) return v;
  Volume out(v.s, v.h, v.w);
  const double m = b * v.voxels.mean();
  out.voxels = (k * (b * v.voxels.array() - m) + m).cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

Volume gaussian_blur(const Volume& v, const AugmentConfig& cfg, Rng& rng, AppliedOps* ops) {
  if (cfg.blur_kernel > v.h || cfg.blur_kernel > v.w)
    throw std::invalid_argument("gaussian_blur: kernel exceeds slice extent");
  const double sigma = rng.uniform(cfg.blur_sigma_range.first, cfg.blur_sigma_range.second);
  if (ops) ops->blur_sigma = sigma;
  const int r = cfg.blur_kernel / 2;
  Eigen::VectorXd kern(cfg.blur_kernel);
  for (int i = -r; i <= r; ++i) kern[i + r] = std::exp(-0.5 * double(i) * double(i) / (sigma * sigma));
  kern /= kern.sum();

  Volume out(v.s, v.h, v.w);
  Eigen::MatrixXd tmp(v.h, v.w);
  for (int z = 0; z < v.s; ++z) {
    auto src = v.slice(z);
    // horizontal pass
    for (int y = 0; y < v.h; ++y)
      for (int x = 0; x < v.w; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += kern[i + r] * src(y, mirror(x + i, v.w));
        tmp(y, x) = acc;
      }
    // vertical pass
    auto dst = out.slice(z);
    for (int y = 0; y < v.h; ++y)
      for (int x = 0; x < v.w; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += kern[i + r] * tmp(mirror(y + i, v.h), x);
        dst(y, x) = acc;
      }
  }
  // a unit-sum nonnegative kernel cannot leave the input's range; clamp away
  // the last-ulp overshoot from kernel renormalization
  const double lo = v.voxels.minCoeff(), hi = v.voxels.maxCoeff();
  out.voxels = out.voxels.cwiseMax(lo).cwiseMin(hi);
  return out;
}

Volume solarize(const Volume& v, const AugmentConfig& cfg, Rng& rng, AppliedOps* ops) {
  const bool apply = rng.bernoulli(cfg.solarize_prob);
  if (ops) ops->solarized = apply;
  if (!apply) return v;
  Volume out(v.s, v.h, v.w);
  out.voxels = (v.voxels.array() >= cfg.solarize_threshold).select(1.0 - v.voxels.array(), v.voxels.array());
  return out;
}

Volume slice_shift(const Volume& v, const AugmentConfig& cfg, Rng& rng, AppliedOps* ops) {
  const int k = int(rng.uniform_int(-cfg.slice_shift_max, cfg.slice_shift_max));
  if (ops) ops->slice_shift = k;
  if (k == 0) return v;
  Volume out(v.s, v.h, v.w);
  for (int z = 0; z < v.s; ++z) {
    const int src = std::clamp(z - k, 0, v.s - 1);  // vacated slices replicate the edge
    out.slice(z) = v.slice(src);
  }
  return out;
}

View make_view(const Volume& v, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  const int out_s = cfg.output_shape[0];
  if (v.s < out_s)
    throw std::invalid_argument("make_view: input has fewer slices than output_shape");
  View view;
  Volume cur = v.s == out_s ? v : central_slab(v, out_s);
  cur = slice_shift(cur, cfg, rng, &view.applied_ops);
  cur = random_crop_resize(cur, cfg, rng, &view.applied_ops);
  cur = random_hflip(cur, cfg, rng, &view.applied_ops);
  cur = intensity_jitter(cur, cfg, rng, &view.applied_ops);
  cur = gaussian_blur(cur, cfg, rng, &view.applied_ops);
  cur = solarize(cur, cfg, rng, &view.applied_ops);
  view.voxels = std::move(cur);
  return view;
}

}  // namespace tinc
