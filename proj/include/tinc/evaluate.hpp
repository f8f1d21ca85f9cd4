#pragma once

#include <string>
#include <vector>

#include "tinc/labels.hpp"
#include "tinc/metrics.hpp"
#include "tinc/model.hpp"
#include "tinc/pairs.hpp"
#include "tinc/pretrain.hpp"

namespace tinc {

struct EvalConfig {
  enum class Mode { linear, finetune };
  Mode mode = Mode::linear;
  int epochs = 50;  // 100 is the fine-tuning default at paper scale
  double lr = 1e-4;
  double positive_class_weight = 5.0;
  int batch_size = 16;
  std::uint64_t seed = 0;
  double val_fraction = 0.25;  // of training patients, for best-epoch selection
  // downstream augmentations (fine-tuning only)
  int translate_max = 4;
  double rotate_degrees = 15.0;
  double hflip_prob = 0.5;

  void validate() const {
    if (!(positive_class_weight > 0)) throw std::invalid_argument("eval: positive_class_weight must be > 0");
    if (epochs < 0 || batch_size < 1) throw std::invalid_argument("eval: invalid epochs/batch_size");
  }
};

struct MetricsReport {
  double rocauc = 0, prauc = 0, bacc = 0;
  double prauc_baseline = 0;  // positive-class prevalence in the test split
  int n_pos = 0, n_neg = 0;
};

struct EquivarianceReport {
  struct Trajectory {
    std::string patient_id, eye_id;
    std::vector<int> months;
    std::vector<double> distances;  // to the baseline visit; starts at 0
    double ci = 0;
  };
  std::vector<Trajectory> trajectories;
  double mean_ci = 0;
};

// Labelled scans of a cohort with excluded-label visits dropped.
std::vector<LabelledScan> usable_scans(const Cohort& cohort, int horizon_months = 6);

// Patient-wise, stratified by whether the patient has any positive scan.
struct Split {
  std::vector<LabelledScan> train, test;
};
Split train_test_split(const std::vector<LabelledScan>& scans, double test_fraction, std::uint64_t seed);

// k stratified patient-wise folds; element i holds fold i's held-out scans.
std::vector<std::vector<LabelledScan>> stratified_folds(const std::vector<LabelledScan>& scans, int k,
                                                        std::uint64_t seed);

// Frozen encoder + class-weighted logistic head trained on representations.
MetricsReport linear_eval(Model<real>& model, const std::vector<LabelledScan>& train,
                          const std::vector<LabelledScan>& test, const EvalConfig& cfg, const VolumeLoader& loader);

// End-to-end training with downstream augmentations; best epoch by
// validation ROCAUC.
MetricsReport fine_tune(Model<real>& model, const std::vector<LabelledScan>& train,
                        const std::vector<LabelledScan>& test, const EvalConfig& cfg, const VolumeLoader& loader);

// Per-patient distance-to-baseline trajectories and concordance indices.
// Patients are sampled uniformly without replacement among those with >= 3
// visits; representations come from the encoder, never the projector.
EquivarianceReport equivariance_report(Model<real>& model, const Cohort& cohort, int n_patients, std::uint64_t seed,
                                       const VolumeLoader& loader);

void write_metrics_report(const std::string& path, const MetricsReport& report);
void write_equivariance_report(const std::string& json_path, const std::string& table_path,
                               const EquivarianceReport& report);

}  // namespace tinc
