#pragma once

#include <optional>
#include <string>

#include "tinc/losses.hpp"
#include "tinc/model.hpp"
#include "tinc/optimizer.hpp"
#include "tinc/pairs.hpp"

namespace tinc {

// Training-side scalar. Gradient-check tests instantiate the templated core
// with double; the training loop runs in single precision for speed.
using real = float;

struct PretrainConfig {
  int epochs = 400;
  int warmup_epochs = 10;
  double base_lr = 5e-4;
  double weight_decay = 1e-4;
  // learning-rate multiplier for projector parameters; < 1 slows projector
  // adaptation so the loss shapes the representation space itself
  double projector_lr_scale = 1.0;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // additionally to the final checkpoint; 0 = final only
  // per-patient epochs are multiplied by round(#scans/#patients) so the step
  // budget matches a per-image schedule when comparing methods
  bool equalize_steps = false;
  enum class LossKind { vicreg_family, barlow_twins };
  LossKind loss_kind = LossKind::vicreg_family;
  LossConfig loss;
  SamplerConfig sampler;
  AugmentConfig augment;
  EncoderConfig encoder;
  ProjectorConfig projector;

  void validate() const;
};

// Identifies the (architecture, data schedule) a checkpoint belongs to.
std::uint64_t config_fingerprint(const PretrainConfig& cfg);

struct LossHistoryRow {
  std::int64_t step = 0;
  int epoch = 0;
  double lr = 0;
  LossBreakdown loss;
};

struct PretrainResult {
  std::string final_checkpoint;
  std::vector<LossHistoryRow> history;
};

// Runs the full schedule, writing ckpt_{epoch}.bin/.meta and loss_history.tsv
// under out_dir. Loader defaults to disk volumes preprocessed to the
// encoder's input slab.
PretrainResult pretrain(const Cohort& cohort, const PretrainConfig& cfg, const std::string& out_dir,
                        const VolumeLoader* loader = nullptr);

// Continues from a checkpoint written by pretrain() with the same config.
PretrainResult resume(const std::string& checkpoint_path, const Cohort& cohort, const PretrainConfig& cfg,
                      const std::string& out_dir, const VolumeLoader* loader = nullptr);

// Checkpoint IO shared with the evaluation side.
void load_model_weights(const std::string& checkpoint_path, Model<real>& model, std::uint64_t expect_fingerprint);

void write_loss_history(const std::string& path, const std::vector<LossHistoryRow>& rows);

}  // namespace tinc
