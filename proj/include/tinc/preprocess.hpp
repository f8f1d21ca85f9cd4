#pragma once

#include "tinc/volume.hpp"

namespace tinc {

// Min-max scaling to [0,1]. A constant input maps to all zeros.
Volume normalize_volume(const Volume& raw);

// The `count` slices centered on the slice axis; when S - count is odd the
// extra slice is dropped from the high-index side.
Volume central_slab(const Volume& v, int count);

// Placeholder for curvature flattening; currently the identity so a real
// flattener can be swapped in behind the same interface.
inline Volume flatten_retina(Volume v) { return v; }

// Standard ingest path for one visit: flatten, min-max normalize, slab.
inline Volume preprocess(const Volume& raw, int slab_count) {
  return central_slab(normalize_volume(flatten_retina(raw)), slab_count);
}

}  // namespace tinc
