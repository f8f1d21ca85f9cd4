#pragma once

#include <array>
#include <utility>

#include "tinc/rng.hpp"
#include "tinc/volume.hpp"

namespace tinc {

struct AugmentConfig {
  std::pair<double, double> crop_area_range{0.4, 0.8};
  double hflip_prob = 0.5;
  double jitter_prob = 0.8;
  int blur_kernel = 21;
  std::pair<double, double> blur_sigma_range{0.1, 2.0};
  double solarize_threshold = 0.42;
  double solarize_prob = 0.2;
  int slice_shift_max = 5;
  std::array<int, 3> output_shape{16, 64, 64};

  void validate() const;
};

// Sampled parameters of one view, kept for reproducibility and property
// tests over recorded draws.
struct AppliedOps {
  int slice_shift = 0;
  double crop_area_frac = 1.0;
  double crop_aspect = 1.0;
  int crop_y = 0, crop_x = 0, crop_h = 0, crop_w = 0;
  bool hflip = false;
  bool jitter = false;
  double brightness = 1.0, contrast = 1.0;
  double blur_sigma = 0.0;
  bool solarized = false;
};

struct View {
  Volume voxels;
  AppliedOps applied_ops;
};

// Individual transforms. Each consumes draws from `rng` in a fixed order.
Volume random_crop_resize(const Volume& v, const AugmentConfig& cfg, Rng& rng, AppliedOps* ops = nullptr);
Volume random_hflip(const Volume& v, const AugmentConfig& cfg, Rng& rng, AppliedOps* ops = nullptr);
Volume intensity_jitter(const Volume& v, const AugmentConfig& cfg, Rng& rng, AppliedOps* ops = nullptr);
Volume gaussian_blur(const Volume& v, const AugmentConfig& cfg, Rng& rng, AppliedOps* ops = nullptr);
Volume solarize(const Volume& v, const AugmentConfig& cfg, Rng& rng, AppliedOps* ops = nullptr);
Volume slice_shift(const Volume& v, const AugmentConfig& cfg, Rng& rng, AppliedOps* ops = nullptr);

// Full pipeline: slice_shift, crop+resize, hflip, jitter, blur, solarize.
View make_view(const Volume& v, const AugmentConfig& cfg, Rng& rng);

}  // namespace tinc
