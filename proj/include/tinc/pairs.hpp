#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tinc/augment.hpp"
#include "tinc/cohort.hpp"

namespace tinc {

struct SamplerConfig {
  int dt_min_days = 90;
  int dt_max_days = 540;
  int batch_size = 32;
  enum class EpochMode { per_patient, per_image };
  EpochMode steps_per_epoch_mode = EpochMode::per_patient;

  void validate() const {
    if (!(0 < dt_min_days && dt_min_days < dt_max_days))
      throw std::invalid_argument("sampler: need 0 < dt_min_days < dt_max_days");
    if (batch_size < 1) throw std::invalid_argument("sampler: batch_size must be >= 1");
  }
};

// Two visits of the same eye with their normalized time difference.
struct VisitPair {
  VisitRecord visit_a, visit_b;
  int dt_days = 0;
  double dt_norm = 0.0;  // (dt_days - dt_min) / (dt_max - dt_min)
};

struct PairBatch {
  std::vector<View> views_a, views_b;
  std::vector<double> dt_norm;
  std::vector<std::string> patient_ids;  // all distinct within a batch

  std::size_t size() const { return dt_norm.size(); }
};

// All unordered same-eye visit pairs with day difference in
// [dt_min_days, dt_max_days].
std::vector<VisitPair> eligible_pairs(const EyeSeries& eye, const SamplerConfig& cfg);

// Loads a visit's volume, preprocessed to `slab` slices. Injectable so tests
// can substitute synthetic volumes without touching disk.
using VolumeLoader = std::function<Volume(const VisitRecord&)>;
VolumeLoader disk_loader(int slab_count);

// One batch: batch_size distinct patients, one uniformly chosen eligible pair
// each, both volumes independently augmented.
PairBatch sample_batch(const Cohort& cohort, const SamplerConfig& cfg, const AugmentConfig& aug_cfg, Rng& rng,
                       const VolumeLoader& loader);

int steps_per_epoch(const Cohort& cohort, const SamplerConfig& cfg);

// Number of distinct patients with at least one eligible pair.
int eligible_patient_count(const Cohort& cohort, const SamplerConfig& cfg);

}  // namespace tinc
