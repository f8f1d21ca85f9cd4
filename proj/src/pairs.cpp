#include "tinc/pairs.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tinc/preprocess.hpp"

namespace tinc {

std::vector<VisitPair> eligible_pairs(const EyeSeries& eye, const SamplerConfig& cfg) {
  cfg.validate();
  std::vector<VisitPair> out;
  const int n = int(eye.visits.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const int dt = eye.visits[j].visit_day - eye.visits[i].visit_day;
      if (dt < cfg.dt_min_days || dt > cfg.dt_max_days) continue;
      VisitPair p;
      p.visit_a = eye.visits[i];
      p.visit_b = eye.visits[j];
      p.dt_days = dt;
      p.dt_norm = double(dt - cfg.dt_min_days) / double(cfg.dt_max_days - cfg.dt_min_days);
      out.push_back(std::move(p));
    }
  return out;
}

namespace {

// patient_id -> pooled eligible pairs over that patient's eyes
std::map<std::string, std::vector<VisitPair>> pairs_by_patient(const Cohort& cohort, const SamplerConfig& cfg) {
  std::map<std::string, std::vector<VisitPair>> by_patient;
  for (const auto& eye : cohort.eyes) {
    auto ps = eligible_pairs(eye, cfg);
    if (ps.empty()) continue;
    auto& dst = by_patient[eye.patient_id()];
    dst.insert(dst.end(), ps.begin(), ps.end());
  }
  return by_patient;
}

}  // namespace

int eligible_patient_count(const Cohort& cohort, const SamplerConfig& cfg) {
  return int(pairs_by_patient(cohort, cfg).size());
}

VolumeLoader disk_loader(int slab_count) {
  return [slab_count](const VisitRecord& r) {
    return preprocess(read_visit_volume(r), slab_count);
  };
}

PairBatch sample_batch(const Cohort& cohort, const SamplerConfig& cfg, const AugmentConfig& aug_cfg, Rng& rng,
                       const VolumeLoader& loader) {
  const auto by_patient = pairs_by_patient(cohort, cfg);
  const int n_eligible = int(by_patient.size());
  if (n_eligible < cfg.batch_size)
    throw std::runtime_error("sample_batch: only " + std::to_string(n_eligible) + " eligible patients for batch_size " +
                             std::to_string(cfg.batch_size) + " (short by " +
                             std::to_string(cfg.batch_size - n_eligible) + ")");

  std::vector<const std::pair<const std::string, std::vector<VisitPair>>*> pool;
  pool.reserve(by_patient.size());
  for (const auto& kv : by_patient) pool.push_back(&kv);

  // partial Fisher-Yates: batch_size distinct patients, uniform without replacement
  for (int i = 0; i < cfg.batch_size; ++i)
    std::swap(pool[i], pool[rng.uniform_int(i, n_eligible - 1)]);

  PairBatch batch;
  for (int i = 0; i < cfg.batch_size; ++i) {
    const auto& [pid, pairs] = *pool[i];
    const VisitPair& p = pairs[rng.uniform_int(0, std::int64_t(pairs.size()) - 1)];
    Rng rng_a(derive_seed(rng.gen(), p.visit_a.patient_id, p.visit_a.visit_day, 0));
    Rng rng_b(derive_seed(rng.gen(), p.visit_b.patient_id, p.visit_b.visit_day, 1));
    batch.views_a.push_back(make_view(loader(p.visit_a), aug_cfg, rng_a));
    batch.views_b.push_back(make_view(loader(p.visit_b), aug_cfg, rng_b));
    batch.dt_norm.push_back(p.dt_norm);
    batch.patient_ids.push_back(pid);
  }
  return batch;
}

int steps_per_epoch(const Cohort& cohort, const SamplerConfig& cfg) {
  cfg.validate();
  if (cohort.eyes.empty()) throw std::invalid_argument("steps_per_epoch: empty cohort");
  std::int64_t units = 0;
  if (cfg.steps_per_epoch_mode == SamplerConfig::EpochMode::per_patient)
    units = eligible_patient_count(cohort, cfg);
  else
    units = std::int64_t(cohort.total_visits());
  return int((units + cfg.batch_size - 1) / cfg.batch_size);
}

}  // namespace tinc
