#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace tinc {

// One 3D scan, row-major (slice S, height H, width W), intensities in [0,1]
// after normalization. Stored densely; slices are contiguous H*W planes.
struct Volume {
  Eigen::VectorXd voxels;
  int s = 0, h = 0, w = 0;

  Volume() = default;
  Volume(int s_, int h_, int w_) : voxels(Eigen::VectorXd::Zero(std::int64_t(s_) * h_ * w_)), s(s_), h(h_), w(w_) {
    if (s_ <= 0 || h_ <= 0 || w_ <= 0) throw std::invalid_argument("Volume: non-positive shape");
  }

  std::int64_t size() const { return voxels.size(); }
  double& at(int z, int y, int x) { return voxels[(std::int64_t(z) * h + y) * w + x]; }
  double at(int z, int y, int x) const { return voxels[(std::int64_t(z) * h + y) * w + x]; }

  // View of slice z as an H x W matrix.
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> slice(int z) {
    return {voxels.data() + std::int64_t(z) * h * w, h, w};
  }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> slice(int z) const {
    return {voxels.data() + std::int64_t(z) * h * w, h, w};
  }

  bool same_shape(const Volume& o) const { return s == o.s && h == o.h && w == o.w; }
};

inline std::string shape_str(int s, int h, int w) {
  return std::to_string(s) + "x" + std::to_string(h) + "x" + std::to_string(w);
}

}  // namespace tinc
