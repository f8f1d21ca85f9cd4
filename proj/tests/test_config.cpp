#include <cstdlib>

#include "doctest.h"
#include "tinc/config.hpp"

using namespace tinc;

namespace {

// minimal valid document; defaults elsewhere
const char* kBase = R"({
  "seed": 7,
  "synth": {"n_patients": 10, "volume_shape": [8, 24, 24]},
  "pretrain": {"epochs": 4, "warmup_epochs": 1}
})";

}  // namespace

TEST_CASE("parse_run_config: sections land on the module configs") {
  const RunConfig cfg = parse_run_config(R"({
    "seed": 3,
    "out_dir": "runs/a",
    "synth": {"n_patients": 5, "visits_per_patient": [4, 6], "volume_shape": [8, 24, 24], "noise_level": 0.1},
    "sampler": {"dt_min_days": 60, "dt_max_days": 400, "batch_size": 8},
    "augment": {"blur_kernel": 5, "crop_area_range": [0.5, 0.9], "output_shape": [8, 16, 16]},
    "model": {"encoder": {"input_shape": [8, 16, 16], "stem_channels": 8, "representation_dim": 32},
              "projector": {"hidden_dims": [16, 16], "output_dim": 12}},
    "loss": {"lambda": 10, "similarity_mode": "vicreg_invariance", "loss": "vicreg_family"},
    "pretrain": {"epochs": 20, "warmup_epochs": 2, "base_lr": 1e-3},
    "eval": {"mode": "finetune", "epochs": 30, "lr": 5e-4}
  })");
  CHECK(cfg.seed == 3);
  CHECK(cfg.out_dir == "runs/a");
  CHECK(cfg.synth.n_patients == 5);
  CHECK(cfg.synth.visits_per_patient == std::pair<int, int>{4, 6});
  CHECK(cfg.synth.noise_level == doctest::Approx(0.1));
  CHECK(cfg.pretrain.sampler.dt_min_days == 60);
  CHECK(cfg.pretrain.sampler.batch_size == 8);
  CHECK(cfg.pretrain.augment.blur_kernel == 5);
  CHECK(cfg.pretrain.augment.crop_area_range.first == doctest::Approx(0.5));
  CHECK(cfg.pretrain.encoder.stem_channels == 8);
  CHECK(cfg.pretrain.encoder.representation_dim == 32);
  CHECK(cfg.pretrain.projector.output_dim == 12);
  CHECK(cfg.pretrain.loss.lambda_ == doctest::Approx(10));
  CHECK(cfg.pretrain.loss.similarity_mode == LossConfig::Similarity::vicreg_invariance);
  CHECK(cfg.pretrain.epochs == 20);
  CHECK(cfg.pretrain.base_lr == doctest::Approx(1e-3));
  CHECK(cfg.eval.mode == EvalConfig::Mode::finetune);
  CHECK(cfg.eval.epochs == 30);
}

TEST_CASE("unknown keys raise with the offending dotted name") {
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"bogus": 1})"), doctest::Contains("'<root>.bogus'"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"synth": {"patients": 3}})"), doctest::Contains("'synth.patients'"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"model": {"encoder": {"stem": 4}}})"),
                       doctest::Contains("'model.encoder.stem'"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"eval": {"learning_rate": 0.1}})"),
                       doctest::Contains("'eval.learning_rate'"), std::runtime_error);
}

TEST_CASE("sections inherit the global seed unless they set their own") {
  const RunConfig inherit = parse_run_config(kBase);
  CHECK(inherit.seed == 7);
  CHECK(inherit.synth.seed == 7);
  CHECK(inherit.pretrain.seed == 7);
  CHECK(inherit.eval.seed == 7);

  const RunConfig own = parse_run_config(R"({
    "seed": 7,
    "synth": {"seed": 11},
    "pretrain": {"epochs": 4, "warmup_epochs": 1, "seed": 13},
    "eval": {"seed": 17}
  })");
  CHECK(own.synth.seed == 11);
  CHECK(own.pretrain.seed == 13);
  CHECK(own.eval.seed == 17);
}

TEST_CASE("dotted overrides reach nested sections and parse JSON values") {
  const RunConfig cfg = parse_run_config(
      kBase, {"pretrain.epochs=9", "synth.n_patients=3", "loss.similarity_mode=tinc", "sampler.batch_size=4",
              "model.encoder.representation_dim=16", "out_dir=elsewhere", "synth.severity_rate=[0.1, 0.2]"});
  CHECK(cfg.pretrain.epochs == 9);
  CHECK(cfg.synth.n_patients == 3);
  CHECK(cfg.pretrain.loss.similarity_mode == LossConfig::Similarity::tinc);
  CHECK(cfg.pretrain.sampler.batch_size == 4);
  CHECK(cfg.pretrain.encoder.representation_dim == 16);
  CHECK(cfg.out_dir == "elsewhere");
  CHECK(cfg.synth.severity_rate.first == doctest::Approx(0.1));
  CHECK(cfg.synth.severity_rate.second == doctest::Approx(0.2));
}

TEST_CASE("malformed overrides and enums are rejected") {
  CHECK_THROWS_AS(parse_run_config(kBase, {"no_equals_sign"}), std::runtime_error);
  CHECK_THROWS_AS(parse_run_config(kBase, {"=5"}), std::runtime_error);
  CHECK_THROWS_AS(parse_run_config(kBase, {"pretrain..epochs=2"}), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_run_config(kBase, {"loss.similarity_mode=cosine"}),
                       doctest::Contains("similarity_mode"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_run_config(kBase, {"loss.loss=simclr"}), doctest::Contains("loss.loss"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_run_config(kBase, {"eval.mode=zero_shot"}), doctest::Contains("eval.mode"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_run_config(kBase, {"sampler.steps_per_epoch_mode=per_eye"}),
                       doctest::Contains("steps_per_epoch_mode"), std::runtime_error);
}

TEST_CASE("parsed configs are validated") {
  // warmup >= epochs violates the pretrain schedule invariant
  CHECK_THROWS_AS(parse_run_config(R"({"pretrain": {"epochs": 2, "warmup_epochs": 2}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config(kBase, {"synth.converter_fraction=1.5"}), std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config(kBase, {"sampler.dt_min_days=600"}), std::invalid_argument);
}

TEST_CASE("load_run_config reports missing and malformed files") {
  CHECK_THROWS_WITH_AS(load_run_config("/nonexistent/cfg.json"), doctest::Contains("cannot read"),
                       std::runtime_error);
}

TEST_CASE("resolve_out_dir precedence: flag, config, environment, cwd") {
  RunConfig cfg = parse_run_config(kBase);

  unsetenv("TINC_OUT_DIR");
  CHECK(resolve_out_dir(cfg, "flagged") == "flagged");
  CHECK(resolve_out_dir(cfg, "") == ".");

  cfg.out_dir = "from_config";
  CHECK(resolve_out_dir(cfg, "flagged") == "flagged");
  CHECK(resolve_out_dir(cfg, "") == "from_config");

  setenv("TINC_OUT_DIR", "from_env", 1);
  CHECK(resolve_out_dir(cfg, "") == "from_config");
  cfg.out_dir.clear();
  CHECK(resolve_out_dir(cfg, "") == "from_env");
  unsetenv("TINC_OUT_DIR");
}
