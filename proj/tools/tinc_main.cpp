#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "tinc/config.hpp"
#include "tinc/evaluate.hpp"
#include "tinc/glcm.hpp"
#include "tinc/preprocess.hpp"
#include "tinc/synthgen.hpp"

namespace fs = std::filesystem;
using namespace tinc;

namespace {

std::string resolve_manifest(const std::string& data) {
  if (fs::is_directory(data)) return (fs::path(data) / "manifest.json").string();
  return data;
}

Model<real> build_model(const RunConfig& cfg) {
  return Model<real>(cfg.pretrain.encoder, cfg.pretrain.projector, cfg.pretrain.seed);
}

void apply_method(RunConfig& cfg, const std::string& method) {
  if (method == "tinc") {
    cfg.pretrain.loss_kind = PretrainConfig::LossKind::vicreg_family;
    cfg.pretrain.loss.similarity_mode = LossConfig::Similarity::tinc;
  } else if (method == "vicreg") {
    cfg.pretrain.loss_kind = PretrainConfig::LossKind::vicreg_family;
    cfg.pretrain.loss.similarity_mode = LossConfig::Similarity::vicreg_invariance;
  } else if (method == "barlow") {
    cfg.pretrain.loss_kind = PretrainConfig::LossKind::barlow_twins;
  } else {
    throw std::runtime_error("--method must be tinc, vicreg or barlow");
  }
}

int cmd_synth(const RunConfig& cfg, const std::string& out_flag) {
  const std::string out = resolve_out_dir(cfg, out_flag);
  const std::string manifest = generate_cohort(cfg.synth, out);
  const Cohort cohort = load_manifest(manifest);
  int converters = 0;
  for (const auto& eye : cohort.eyes)
    if (eye.conversion_month) ++converters;
  std::cout << "manifest: " << manifest << "\n"
            << "patients: " << cohort.eyes.size() << "\n"
            << "scans: " << cohort.total_visits() << "\n"
            << "converters: " << converters << "\n";
  return 0;
}

int cmd_pretrain(const RunConfig& cfg, const std::string& data, const std::string& out_flag) {
  const Cohort cohort = load_manifest(resolve_manifest(data));
  const std::string out = resolve_out_dir(cfg, out_flag);
  const PretrainResult result = pretrain(cohort, cfg.pretrain, out);
  std::cout << "checkpoint: " << result.final_checkpoint << "\n"
            << "steps: " << (result.history.empty() ? 0 : result.history.back().step) << "\n"
            << "final_loss: " << (result.history.empty() ? 0.0 : result.history.back().loss.total) << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& data,
             const std::string& out_flag) {
  const Cohort cohort = load_manifest(resolve_manifest(data));
  Model<real> model = build_model(cfg);
  load_model_weights(checkpoint, model, 0);
  const auto scans = usable_scans(cohort);
  const Split split = train_test_split(scans, 0.25, cfg.eval.seed);
  const VolumeLoader loader = disk_loader(cfg.pretrain.encoder.input_shape[0]);
  const MetricsReport report = cfg.eval.mode == EvalConfig::Mode::linear
                                   ? linear_eval(model, split.train, split.test, cfg.eval, loader)
                                   : fine_tune(model, split.train, split.test, cfg.eval, loader);
  const std::string out = resolve_out_dir(cfg, out_flag);
  fs::create_directories(out);
  const std::string path = (fs::path(out) / "metrics.json").string();
  write_metrics_report(path, report);
  std::cout << "report: " << path << "\n"
            << "rocauc: " << report.rocauc << "\nprauc: " << report.prauc << "\nbacc: " << report.bacc << "\n";
  return 0;
}

int cmd_equivariance(const RunConfig& cfg, const std::string& checkpoint, const std::string& data, int patients,
                     const std::string& out_flag) {
  const Cohort cohort = load_manifest(resolve_manifest(data));
  Model<real> model = build_model(cfg);
  load_model_weights(checkpoint, model, 0);
  const VolumeLoader loader = disk_loader(cfg.pretrain.encoder.input_shape[0]);
  const EquivarianceReport report = equivariance_report(model, cohort, patients, cfg.seed, loader);
  const std::string out = resolve_out_dir(cfg, out_flag);
  fs::create_directories(out);
  const std::string jpath = (fs::path(out) / "equivariance.json").string();
  const std::string tpath = (fs::path(out) / "equivariance_table.tsv").string();
  write_equivariance_report(jpath, tpath, report);
  std::cout << "report: " << jpath << "\ntable: " << tpath << "\nmean_ci: " << report.mean_ci << "\n";
  return 0;
}

int cmd_glcm(const std::string& data) {
  const Cohort cohort = load_manifest(resolve_manifest(data));
  if (cohort.total_visits() == 0) throw std::runtime_error("glcm: cohort has no scans");
  double sum = 0;
  std::size_t n = 0;
  for (const auto& eye : cohort.eyes)
    for (const auto& visit : eye.visits) {
      const Volume v = normalize_volume(read_visit_volume(visit));
      sum += glcm_contrast(v.slice(v.s / 2), 32, 0, 1);
      ++n;
    }
  std::cout << "scans: " << n << "\nmean_contrast: " << sum / double(n) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"longitudinal 3D self-supervised pretraining toolkit"};
  app.require_subcommand(1);

  std::string config_path, data, out, checkpoint, method = "tinc", mode;
  std::vector<std::string> overrides;
  std::int64_t seed_flag = -1;
  int patients = 10;

  auto add_common = [&](CLI::App* cmd, bool need_config) {
    auto* c = cmd->add_option("--config", config_path, "run config file (JSON)");
    if (need_config) c->required();
    cmd->add_option("--set", overrides, "dotted-path override, key.path=value");
    cmd->add_option("--seed", seed_flag, "override the global seed");
    cmd->add_option("--out", out, "output directory (default: config out_dir, then TINC_OUT_DIR)");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  add_common(synth, true);

  auto* pretrain_cmd = app.add_subcommand("pretrain", "self-supervised pretraining");
  add_common(pretrain_cmd, true);
  pretrain_cmd->add_option("--data", data, "cohort directory or manifest path")->required();
  pretrain_cmd->add_option("--method", method, "tinc, vicreg or barlow");

  auto* eval_cmd = app.add_subcommand("eval", "downstream evaluation");
  add_common(eval_cmd, true);
  eval_cmd->add_option("--data", data, "cohort directory or manifest path")->required();
  eval_cmd->add_option("--checkpoint", checkpoint, "pretraining checkpoint")->required();
  eval_cmd->add_option("--mode", mode, "linear or finetune");

  auto* equiv = app.add_subcommand("equivariance", "time-equivariance analysis");
  add_common(equiv, true);
  equiv->add_option("--data", data, "cohort directory or manifest path")->required();
  equiv->add_option("--checkpoint", checkpoint, "pretraining checkpoint")->required();
  equiv->add_option("--patients", patients, "patients to sample");

  auto* glcm_cmd = app.add_subcommand("glcm", "mean GLCM contrast of a cohort");
  glcm_cmd->add_option("--data", data, "cohort directory or manifest path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (glcm_cmd->parsed()) return cmd_glcm(data);

    if (seed_flag >= 0) overrides.push_back("seed=" + std::to_string(seed_flag));
    RunConfig cfg = load_run_config(config_path, overrides);

    if (synth->parsed()) return cmd_synth(cfg, out);
    if (pretrain_cmd->parsed()) {
      apply_method(cfg, method);
      return cmd_pretrain(cfg, data, out);
    }
    if (eval_cmd->parsed()) {
      if (!mode.empty()) {
        if (mode == "linear")
          cfg.eval.mode = EvalConfig::Mode::linear;
        else if (mode == "finetune")
          cfg.eval.mode = EvalConfig::Mode::finetune;
        else
          throw std::runtime_error("--mode must be linear or finetune");
      }
      return cmd_eval(cfg, checkpoint, data, out);
    }
    if (equiv->parsed()) return cmd_equivariance(cfg, checkpoint, data, patients, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
