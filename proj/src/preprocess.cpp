#include "tinc/preprocess.hpp"

namespace tinc {

Volume normalize_volume(const Volume& raw) {
  if (raw.size() == 0) throw std::invalid_argument("normalize_volume: empty input");
  Volume out(raw.s, raw.h, raw.w);
  const double lo = raw.voxels.minCoeff();
  const double hi = raw.voxels.maxCoeff();
  if (hi == lo) return out;  // constant input -> all zeros
  out.voxels = (raw.voxels.array() - lo) / (hi - lo);
  return out;
}

Volume central_slab(const Volume& v, int count) {
  if (count < 1) throw std::invalid_argument("central_slab: count must be >= 1");
  if (count > v.s)
    throw std::invalid_argument("central_slab: count " + std::to_string(count) + " exceeds slice count " +
                                std::to_string(v.s));
  const int start = (v.s - count) / 2;  // odd remainder: extra slice dropped high
  Volume out(count, v.h, v.w);
  const std::int64_t plane = std::int64_t(v.h) * v.w;
  out.voxels = v.voxels.segment(std::int64_t(start) * plane, std::int64_t(count) * plane);
  return out;
}

}  // namespace tinc
