#include <set>

#include "doctest.h"
#include "tinc/pairs.hpp"

using namespace tinc;

namespace {

EyeSeries eye_at_days(const std::string& pid, const std::string& eid, const std::vector<int>& days) {
  EyeSeries eye;
  for (int d : days) {
    VisitRecord r;
    r.patient_id = pid;
    r.eye_id = eid;
    r.visit_day = d;
    r.visit_month = month_of_day(d);
    r.shape = {4, 8, 8};
    eye.visits.push_back(r);
  }
  eye.study_length_months = month_of_day(days.back()) + 1;
  return eye;
}

Cohort grid_cohort(int n_patients, const std::vector<int>& days) {
  Cohort c;
  for (int p = 0; p < n_patients; ++p) c.eyes.push_back(eye_at_days("p" + std::to_string(p), "OD", days));
  return c;
}

VolumeLoader stub_loader(int s, int h, int w) {
  return [=](const VisitRecord& r) {
    Volume v(s, h, w);
    v.voxels.setConstant(double(r.visit_day % 100) / 100.0);
    return v;
  };
}

AugmentConfig tiny_aug() {
  AugmentConfig cfg;
  cfg.output_shape = {4, 8, 8};
  cfg.blur_kernel = 3;
  return cfg;
}

}  // namespace

TEST_CASE("eligible_pairs: bounds and dt_norm endpoints") {
  SamplerConfig cfg;

  auto pairs = eligible_pairs(eye_at_days("p", "OD", {0, 90, 600}), cfg);
  REQUIRE(pairs.size() == 2);  // (0,90) and (90,600); (0,600) is out of bounds
  CHECK(pairs[0].dt_days == 90);
  CHECK(pairs[0].dt_norm == doctest::Approx(0.0));
  CHECK(pairs[1].dt_days == 510);

  pairs = eligible_pairs(eye_at_days("p", "OD", {0, 540}), cfg);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].dt_norm == doctest::Approx(1.0));

  pairs = eligible_pairs(eye_at_days("p", "OD", {0, 315}), cfg);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].dt_norm == doctest::Approx(0.5));

  CHECK(eligible_pairs(eye_at_days("p", "OD", {0, 30}), cfg).empty());
  CHECK(eligible_pairs(eye_at_days("p", "OD", {0, 541}), cfg).empty());
}

TEST_CASE("eligible_pairs: all emitted pairs satisfy the invariants") {
  SamplerConfig cfg;
  const EyeSeries eye = eye_at_days("p", "OD", {0, 60, 150, 240, 400, 700, 1000});
  for (const auto& p : eligible_pairs(eye, cfg)) {
    CHECK(p.dt_days >= cfg.dt_min_days);
    CHECK(p.dt_days <= cfg.dt_max_days);
    CHECK(p.dt_norm ==
          doctest::Approx(double(p.dt_days - cfg.dt_min_days) / double(cfg.dt_max_days - cfg.dt_min_days)));
  }
}

TEST_CASE("sample_batch: distinct patients, valid dt, deterministic") {
  SamplerConfig cfg;
  cfg.batch_size = 4;
  const Cohort cohort = grid_cohort(10, {0, 120, 270, 420});
  const VolumeLoader loader = stub_loader(4, 8, 8);
  Rng rng(42);
  const PairBatch batch = sample_batch(cohort, cfg, tiny_aug(), rng, loader);
  REQUIRE(batch.size() == 4);
  std::set<std::string> ids(batch.patient_ids.begin(), batch.patient_ids.end());
  CHECK(ids.size() == 4);
  for (double dt : batch.dt_norm) {
    CHECK(dt >= 0.0);
    CHECK(dt <= 1.0);
  }

  Rng rng2(42);
  const PairBatch again = sample_batch(cohort, cfg, tiny_aug(), rng2, loader);
  CHECK(again.patient_ids == batch.patient_ids);
  CHECK(again.views_a[0].voxels.voxels == batch.views_a[0].voxels.voxels);
}

TEST_CASE("sample_batch: 1000 batches, zero collisions") {
  SamplerConfig cfg;
  cfg.batch_size = 8;
  const Cohort cohort = grid_cohort(20, {0, 100, 250, 500});
  const VolumeLoader loader = stub_loader(4, 8, 8);
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const PairBatch batch = sample_batch(cohort, cfg, tiny_aug(), rng, loader);
    std::set<std::string> ids(batch.patient_ids.begin(), batch.patient_ids.end());
    CHECK(ids.size() == batch.size());
    for (double dt : batch.dt_norm) {
      CHECK(dt >= 0.0);
      CHECK(dt <= 1.0);
    }
  }
}

TEST_CASE("sample_batch: insufficiency error names the shortfall") {
  SamplerConfig cfg;
  cfg.batch_size = 4;
  const Cohort cohort = grid_cohort(3, {0, 120, 270});
  Rng rng(1);
  CHECK_THROWS_WITH_AS(sample_batch(cohort, cfg, tiny_aug(), rng, stub_loader(4, 8, 8)), doctest::Contains("3"),
                       std::runtime_error);
}

TEST_CASE("sample_batch: cross-eye pairs are pooled per patient") {
  SamplerConfig cfg;
  cfg.batch_size = 1;
  Cohort cohort;
  EyeSeries od = eye_at_days("p0", "OD", {0, 120});
  EyeSeries os = eye_at_days("p0", "OS", {0, 300});
  cohort.eyes = {od, os};
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const PairBatch batch = sample_batch(cohort, cfg, tiny_aug(), rng, stub_loader(4, 8, 8));
    REQUIRE(batch.size() == 1);
    CHECK(batch.patient_ids[0] == "p0");
  }
}

TEST_CASE("steps_per_epoch: paper-scale counts") {
  SamplerConfig cfg;
  cfg.batch_size = 32;

  cfg.steps_per_epoch_mode = SamplerConfig::EpochMode::per_patient;
  const Cohort patients = grid_cohort(463, {0, 120});
  CHECK(steps_per_epoch(patients, cfg) == 15);  // ceil(463 / 32)

  cfg.steps_per_epoch_mode = SamplerConfig::EpochMode::per_image;
  std::vector<int> days;
  for (int i = 0; i < 4; ++i) days.push_back(i * 100);
  Cohort scans = grid_cohort(2527, days);  // 2527 * 4 = 10108 scans
  CHECK(steps_per_epoch(scans, cfg) == 316);  // ceil(10108 / 32)

  cfg.steps_per_epoch_mode = SamplerConfig::EpochMode::per_patient;
  cfg.batch_size = 1;
  const Cohort one = grid_cohort(1, {0, 120});
  CHECK(steps_per_epoch(one, cfg) == 1);
}

TEST_CASE("eligible_patient_count") {
  SamplerConfig cfg;
  Cohort cohort = grid_cohort(5, {0, 120});
  cohort.eyes.push_back(eye_at_days("pz", "OD", {0, 30}));  // no eligible pair
  CHECK(eligible_patient_count(cohort, cfg) == 5);
}

TEST_CASE("sampler config validation") {
  SamplerConfig cfg;
  cfg.dt_min_days = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SamplerConfig{};
  cfg.dt_max_days = cfg.dt_min_days;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
