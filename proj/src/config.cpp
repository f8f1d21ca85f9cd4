#include "tinc/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace tinc {

using nlohmann::json;

namespace {

void expect_keys(const json& obj, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw std::runtime_error("config: section '" + section + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) throw std::runtime_error("config: unknown key '" + section + "." + key + "'");
  }
}

template <class T>
void get(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) obj.at(key).get_to(out);
}

void get_pair_i(const json& obj, const char* key, std::pair<int, int>& out) {
  if (!obj.contains(key)) return;
  const auto& a = obj.at(key);
  if (!a.is_array() || a.size() != 2) throw std::runtime_error(std::string("config: '") + key + "' must be [lo, hi]");
  out = {a[0].get<int>(), a[1].get<int>()};
}

void get_pair_d(const json& obj, const char* key, std::pair<double, double>& out) {
  if (!obj.contains(key)) return;
  const auto& a = obj.at(key);
  if (!a.is_array() || a.size() != 2) throw std::runtime_error(std::string("config: '") + key + "' must be [lo, hi]");
  out = {a[0].get<double>(), a[1].get<double>()};
}

void get_shape(const json& obj, const char* key, std::array<int, 3>& out) {
  if (!obj.contains(key)) return;
  const auto& a = obj.at(key);
  if (!a.is_array() || a.size() != 3) throw std::runtime_error(std::string("config: '") + key + "' must be [s, h, w]");
  for (int i = 0; i < 3; ++i) out[std::size_t(i)] = a[std::size_t(i)].get<int>();
}

void parse_synth(const json& obj, SynthConfig& cfg, std::uint64_t global_seed) {
  expect_keys(obj, "synth",
              {"n_patients", "visits_per_patient", "visit_interval_days", "volume_shape", "converter_fraction",
               "severity_rate", "noise_level", "seed"});
  get(obj, "n_patients", cfg.n_patients);
  get_pair_i(obj, "visits_per_patient", cfg.visits_per_patient);
  get_pair_i(obj, "visit_interval_days", cfg.visit_interval_days);
  get_shape(obj, "volume_shape", cfg.volume_shape);
  get(obj, "converter_fraction", cfg.converter_fraction);
  get_pair_d(obj, "severity_rate", cfg.severity_rate);
  get(obj, "noise_level", cfg.noise_level);
  cfg.seed = obj.value("seed", global_seed);
}

void parse_sampler(const json& obj, SamplerConfig& cfg) {
  expect_keys(obj, "sampler", {"dt_min_days", "dt_max_days", "batch_size", "steps_per_epoch_mode"});
  get(obj, "dt_min_days", cfg.dt_min_days);
  get(obj, "dt_max_days", cfg.dt_max_days);
  get(obj, "batch_size", cfg.batch_size);
  if (obj.contains("steps_per_epoch_mode")) {
    const std::string mode = obj.at("steps_per_epoch_mode").get<std::string>();
    if (mode == "per_patient")
      cfg.steps_per_epoch_mode = SamplerConfig::EpochMode::per_patient;
    else if (mode == "per_image")
      cfg.steps_per_epoch_mode = SamplerConfig::EpochMode::per_image;
    else
      throw std::runtime_error("config: sampler.steps_per_epoch_mode must be per_patient or per_image");
  }
}

void parse_augment(const json& obj, AugmentConfig& cfg) {
  expect_keys(obj, "augment",
              {"crop_area_range", "hflip_prob", "jitter_prob", "blur_kernel", "blur_sigma_range", "solarize_threshold",
               "solarize_prob", "slice_shift_max", "output_shape"});
  get_pair_d(obj, "crop_area_range", cfg.crop_area_range);
  get(obj, "hflip_prob", cfg.hflip_prob);
  get(obj, "jitter_prob", cfg.jitter_prob);
  get(obj, "blur_kernel", cfg.blur_kernel);
  get_pair_d(obj, "blur_sigma_range", cfg.blur_sigma_range);
  get(obj, "solarize_threshold", cfg.solarize_threshold);
  get(obj, "solarize_prob", cfg.solarize_prob);
  get(obj, "slice_shift_max", cfg.slice_shift_max);
  get_shape(obj, "output_shape", cfg.output_shape);
}

void parse_model(const json& obj, EncoderConfig& enc, ProjectorConfig& proj) {
  expect_keys(obj, "model", {"encoder", "projector"});
  if (obj.contains("encoder")) {
    const auto& e = obj.at("encoder");
    expect_keys(e, "model.encoder",
                {"input_shape", "stem_channels", "stem_stride", "stage_channels", "blocks_per_stage",
                 "representation_dim"});
    get_shape(e, "input_shape", enc.input_shape);
    get(e, "stem_channels", enc.stem_channels);
    get_shape(e, "stem_stride", enc.stem_stride);
    get(e, "stage_channels", enc.stage_channels);
    get(e, "blocks_per_stage", enc.blocks_per_stage);
    get(e, "representation_dim", enc.representation_dim);
  }
  if (obj.contains("projector")) {
    const auto& p = obj.at("projector");
    expect_keys(p, "model.projector", {"hidden_dims", "output_dim"});
    get(p, "hidden_dims", proj.hidden_dims);
    get(p, "output_dim", proj.output_dim);
  }
}

void parse_loss(const json& obj, LossConfig& cfg, PretrainConfig::LossKind& kind) {
  expect_keys(obj, "loss",
              {"lambda", "mu", "nu", "gamma", "eps", "bt_off_diag_weight", "similarity_mode", "loss"});
  get(obj, "lambda", cfg.lambda_);
  get(obj, "mu", cfg.mu);
  get(obj, "nu", cfg.nu);
  get(obj, "gamma", cfg.gamma);
  get(obj, "eps", cfg.eps);
  get(obj, "bt_off_diag_weight", cfg.bt_off_diag_weight);
  if (obj.contains("similarity_mode")) {
    const std::string mode = obj.at("similarity_mode").get<std::string>();
    if (mode == "tinc")
      cfg.similarity_mode = LossConfig::Similarity::tinc;
    else if (mode == "vicreg_invariance")
      cfg.similarity_mode = LossConfig::Similarity::vicreg_invariance;
    else
      throw std::runtime_error("config: loss.similarity_mode must be tinc or vicreg_invariance");
  }
  if (obj.contains("loss")) {
    const std::string k = obj.at("loss").get<std::string>();
    if (k == "vicreg_family")
      kind = PretrainConfig::LossKind::vicreg_family;
    else if (k == "barlow_twins")
      kind = PretrainConfig::LossKind::barlow_twins;
    else
      throw std::runtime_error("config: loss.loss must be vicreg_family or barlow_twins");
  }
}

void parse_pretrain(const json& obj, PretrainConfig& cfg, std::uint64_t global_seed) {
  expect_keys(obj, "pretrain",
              {"epochs", "warmup_epochs", "base_lr", "weight_decay", "projector_lr_scale", "seed", "checkpoint_every",
               "equalize_steps"});
  get(obj, "epochs", cfg.epochs);
  get(obj, "warmup_epochs", cfg.warmup_epochs);
  get(obj, "base_lr", cfg.base_lr);
  get(obj, "weight_decay", cfg.weight_decay);
  get(obj, "projector_lr_scale", cfg.projector_lr_scale);
  get(obj, "checkpoint_every", cfg.checkpoint_every);
  get(obj, "equalize_steps", cfg.equalize_steps);
  cfg.seed = obj.value("seed", global_seed);
}

void parse_eval(const json& obj, EvalConfig& cfg, std::uint64_t global_seed) {
  expect_keys(obj, "eval",
              {"mode", "epochs", "lr", "positive_class_weight", "batch_size", "seed", "val_fraction", "translate_max",
               "rotate_degrees", "hflip_prob"});
  if (obj.contains("mode")) {
    const std::string mode = obj.at("mode").get<std::string>();
    if (mode == "linear")
      cfg.mode = EvalConfig::Mode::linear;
    else if (mode == "finetune")
      cfg.mode = EvalConfig::Mode::finetune;
    else
      throw std::runtime_error("config: eval.mode must be linear or finetune");
  }
  get(obj, "epochs", cfg.epochs);
  get(obj, "lr", cfg.lr);
  get(obj, "positive_class_weight", cfg.positive_class_weight);
  get(obj, "batch_size", cfg.batch_size);
  get(obj, "val_fraction", cfg.val_fraction);
  get(obj, "translate_max", cfg.translate_max);
  get(obj, "rotate_degrees", cfg.rotate_degrees);
  get(obj, "hflip_prob", cfg.hflip_prob);
  cfg.seed = obj.value("seed", global_seed);
}

void apply_override(json& root, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::runtime_error("config: override '" + spec + "' is not key.path=value");
  const std::string path = spec.substr(0, eq), raw = spec.substr(eq + 1);
  json* node = &root;
  std::stringstream ss(path);
  std::string part, prev;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw std::runtime_error("config: override '" + spec + "' has an empty path segment");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;  // unquoted strings
  (*node)[parts.back()] = value;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::vector<std::string>& overrides) {
  json root = json::parse(text);
  for (const auto& o : overrides) apply_override(root, o);

  expect_keys(root, "<root>", {"seed", "out_dir", "synth", "sampler", "augment", "model", "loss", "pretrain", "eval"});
  RunConfig cfg;
  get(root, "seed", cfg.seed);
  get(root, "out_dir", cfg.out_dir);
  if (root.contains("synth")) parse_synth(root.at("synth"), cfg.synth, cfg.seed);
  cfg.synth.seed = root.contains("synth") ? cfg.synth.seed : cfg.seed;
  if (root.contains("sampler")) parse_sampler(root.at("sampler"), cfg.pretrain.sampler);
  if (root.contains("augment")) parse_augment(root.at("augment"), cfg.pretrain.augment);
  if (root.contains("model")) parse_model(root.at("model"), cfg.pretrain.encoder, cfg.pretrain.projector);
  if (root.contains("loss")) parse_loss(root.at("loss"), cfg.pretrain.loss, cfg.pretrain.loss_kind);
  cfg.pretrain.seed = cfg.seed;
  if (root.contains("pretrain")) parse_pretrain(root.at("pretrain"), cfg.pretrain, cfg.seed);
  cfg.eval.seed = cfg.seed;
  if (root.contains("eval")) parse_eval(root.at("eval"), cfg.eval, cfg.seed);

  cfg.synth.validate();
  cfg.pretrain.validate();
  cfg.eval.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_run_config(buf.str(), overrides);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config: " + path + ": " + e.what());
  }
}

std::string resolve_out_dir(const RunConfig& cfg, const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  if (const char* env = std::getenv("TINC_OUT_DIR"); env && *env) return env;
  return ".";
}

}  // namespace tinc
