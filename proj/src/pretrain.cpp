#include "tinc/pretrain.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tinc/preprocess.hpp"

namespace tinc {

namespace fs = std::filesystem;
using nlohmann::json;

void PretrainConfig::validate() const {
  if (!(warmup_epochs < epochs)) throw std::invalid_argument("pretrain: warmup_epochs must be < epochs");
  if (!(base_lr > 0)) throw std::invalid_argument("pretrain: base_lr must be > 0");
  if (weight_decay < 0) throw std::invalid_argument("pretrain: weight_decay must be >= 0");
  if (!(projector_lr_scale > 0)) throw std::invalid_argument("pretrain: projector_lr_scale must be > 0");
  loss.validate();
  sampler.validate();
  augment.validate();
  encoder.validate();
  projector.validate();
}

std::uint64_t config_fingerprint(const PretrainConfig& cfg) {
  std::ostringstream ss;
  ss << cfg.epochs << '|' << cfg.warmup_epochs << '|' << cfg.base_lr << '|' << cfg.weight_decay << '|'
     << cfg.projector_lr_scale << '|'
     << cfg.equalize_steps << '|' << int(cfg.loss_kind) << '|' << int(cfg.loss.similarity_mode) << '|'
     << cfg.loss.lambda_ << '|' << cfg.loss.mu << '|' << cfg.loss.nu << '|' << cfg.loss.gamma << '|' << cfg.loss.eps
     << '|' << cfg.loss.bt_off_diag_weight << '|' << cfg.sampler.dt_min_days << '|' << cfg.sampler.dt_max_days << '|'
     << cfg.sampler.batch_size << '|' << int(cfg.sampler.steps_per_epoch_mode) << '|';
  for (int d : cfg.encoder.input_shape) ss << d << ',';
  ss << '|' << cfg.encoder.stem_channels << '|';
  for (int d : cfg.encoder.stem_stride) ss << d << ',';
  ss << '|';
  for (int d : cfg.encoder.stage_channels) ss << d << ',';
  ss << '|';
  for (int d : cfg.encoder.blocks_per_stage) ss << d << ',';
  ss << '|' << cfg.encoder.representation_dim << '|';
  for (int d : cfg.projector.hidden_dims) ss << d << ',';
  ss << '|' << cfg.projector.output_dim << '|' << cfg.seed;
  return hash_str(ss.str());
}

namespace {

constexpr std::uint64_t kMagic = 0x54494e43434b5031ULL;  // "TINCCKP1"

void write_u64(std::ostream& o, std::uint64_t v) { o.write(reinterpret_cast<const char*>(&v), sizeof(v)); }
void write_i64(std::ostream& o, std::int64_t v) { o.write(reinterpret_cast<const char*>(&v), sizeof(v)); }
std::uint64_t read_u64(std::istream& i) {
  std::uint64_t v = 0;
  i.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::int64_t read_i64(std::istream& i) {
  std::int64_t v = 0;
  i.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

template <class Vec>
void write_vec64(std::ostream& o, const Vec& v) {
  write_i64(o, v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double d = double(v[i]);
    o.write(reinterpret_cast<const char*>(&d), sizeof(d));
  }
}
template <class Vec>
void read_vec64(std::istream& in, Vec& v) {
  const std::int64_t n = read_i64(in);
  if (!in || n != v.size()) throw std::runtime_error("checkpoint: vector size mismatch");
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    double d;
    in.read(reinterpret_cast<char*>(&d), sizeof(d));
    v[i] = typename Vec::Scalar(d);
  }
}

struct TrainState {
  Model<real> model;
  AdamW<real> opt;
  Rng rng;
  std::int64_t global_step = 0;
  int epoch = 0;  // completed epochs

  TrainState(const PretrainConfig& cfg)
      : model(cfg.encoder, cfg.projector, cfg.seed),
        opt((apply_lr_scales(model, cfg), model.params()), cfg.weight_decay),
        rng(mix64(cfg.seed ^ 0x5eedULL)) {}

  static void apply_lr_scales(Model<real>& m, const PretrainConfig& cfg) {
    for (auto* p : m.projector_params()) p->lr_scale = cfg.projector_lr_scale;
  }
};

void save_checkpoint(const std::string& path, TrainState& st, const PretrainConfig& cfg) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + tmp);
    write_u64(out, kMagic);
    write_u64(out, config_fingerprint(cfg));
    write_i64(out, st.epoch);
    write_i64(out, st.global_step);
    write_i64(out, st.opt.step_count());
    std::ostringstream rs;
    rs << st.rng.gen;
    const std::string rng_state = rs.str();
    write_i64(out, std::int64_t(rng_state.size()));
    out.write(rng_state.data(), std::streamsize(rng_state.size()));
    st.model.save_weights(out);
    st.opt.save([&](const auto& v) { write_vec64(out, v); });
    if (!out) throw std::runtime_error("checkpoint: write failed for " + tmp);
  }
  fs::rename(tmp, path);

  json meta;
  meta["fingerprint"] = config_fingerprint(cfg);
  meta["epoch"] = st.epoch;
  meta["global_step"] = st.global_step;
  meta["seed"] = cfg.seed;
  meta["loss_history"] = "loss_history.tsv";
  std::ofstream mout(path.substr(0, path.size() - 4) + ".meta");
  mout << meta.dump(2) << "\n";
}

void load_checkpoint(const std::string& path, TrainState& st, const PretrainConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  if (read_u64(in) != kMagic) throw std::runtime_error("checkpoint: bad magic in " + path);
  const std::uint64_t fp = read_u64(in);
  if (fp != config_fingerprint(cfg))
    throw std::runtime_error("checkpoint: config fingerprint mismatch for " + path);
  st.epoch = int(read_i64(in));
  st.global_step = read_i64(in);
  const std::int64_t adam_t = read_i64(in);
  const std::int64_t rng_len = read_i64(in);
  std::string rng_state(std::size_t(rng_len), '\0');
  in.read(rng_state.data(), rng_len);
  std::istringstream rs(rng_state);
  rs >> st.rng.gen;
  st.model.load_weights(in);
  st.opt.load([&](auto& v) { read_vec64(in, v); }, adam_t);
  if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
}

using Mat = Model<real>::Mat;
using Vec = Eigen::Matrix<real, Eigen::Dynamic, 1>;

PretrainResult run(const Cohort& cohort, const PretrainConfig& cfg, const std::string& out_dir,
                   const VolumeLoader* loader_in, const std::string* resume_from) {
  cfg.validate();
  fs::create_directories(out_dir);
  const VolumeLoader loader = loader_in ? *loader_in : disk_loader(cfg.encoder.input_shape[0]);

  const int steps = steps_per_epoch(cohort, cfg.sampler);
  int epochs_eff = cfg.epochs;
  if (cfg.equalize_steps && cfg.sampler.steps_per_epoch_mode == SamplerConfig::EpochMode::per_patient) {
    const int patients = eligible_patient_count(cohort, cfg.sampler);
    if (patients == 0) throw std::runtime_error("pretrain: no eligible patients");
    const int factor = std::max(1, int(std::lround(double(cohort.total_visits()) / patients)));
    epochs_eff = cfg.epochs * factor;
  }
  const std::int64_t total_steps = std::int64_t(epochs_eff) * steps;
  const std::int64_t warmup_steps = std::int64_t(cfg.warmup_epochs) * steps;

  TrainState st(cfg);
  if (resume_from) load_checkpoint(*resume_from, st, cfg);

  std::ofstream hist(fs::path(out_dir) / "loss_history.tsv", resume_from ? std::ios::app : std::ios::out);
  if (!resume_from)
    hist << "step\tepoch\tlr\tsimilarity\tvariance_a\tvariance_b\tcovariance_a\tcovariance_b\ttotal\n";

  PretrainResult result;
  const int n = cfg.sampler.batch_size;

  for (int epoch = st.epoch; epoch < epochs_eff; ++epoch) {
    for (int s = 0; s < steps; ++s) {
      PairBatch batch = sample_batch(cohort, cfg.sampler, cfg.augment, st.rng, loader);
      std::vector<const Volume*> vols(2 * n);
      for (int i = 0; i < n; ++i) {
        vols[i] = &batch.views_a[i].voxels;
        vols[n + i] = &batch.views_b[i].voxels;
      }
      st.model.zero_grad();
      const Mat rep = st.model.encode(vols, true);
      const Mat zfull = st.model.project(rep, true);
      const Mat z = zfull.topRows(n), zp = zfull.bottomRows(n);
      Vec dt(n);
      for (int i = 0; i < n; ++i) dt[i] = real(batch.dt_norm[i]);

      LossBreakdown breakdown;
      Mat dz(n, zfull.cols()), dzp(n, zfull.cols());
      if (cfg.loss_kind == PretrainConfig::LossKind::barlow_twins) {
        const real l = barlow_twins_loss<real>(z, zp, cfg.loss);
        breakdown.similarity = double(l);
        breakdown.total = double(l);
        auto g = barlow_twins_grad<real>(z, zp, cfg.loss);
        dz = g.dz;
        dzp = g.dzp;
      } else {
        const auto b = combined_loss<real>(z, zp, dt, cfg.loss);
        breakdown = {double(b.similarity), double(b.variance_a), double(b.variance_b),
                     double(b.covariance_a), double(b.covariance_b), double(b.total)};
        auto g = combined_grad<real>(z, zp, dt, cfg.loss);
        dz = g.dz;
        dzp = g.dzp;
      }
      if (!std::isfinite(breakdown.total))
        throw std::runtime_error("pretrain: non-finite loss at step " + std::to_string(st.global_step));

      Mat dproj(2 * n, zfull.cols());
      dproj.topRows(n) = dz;
      dproj.bottomRows(n) = dzp;
      st.model.encoder_backward(st.model.projector_backward(dproj));

      const double lr = lr_at(st.global_step + 1, warmup_steps, total_steps, cfg.base_lr);
      st.opt.step(lr);
      ++st.global_step;

      LossHistoryRow row{st.global_step, epoch + 1, lr, breakdown};
      result.history.push_back(row);
      hist << row.step << '\t' << row.epoch << '\t' << row.lr << '\t' << row.loss.similarity << '\t'
           << row.loss.variance_a << '\t' << row.loss.variance_b << '\t' << row.loss.covariance_a << '\t'
           << row.loss.covariance_b << '\t' << row.loss.total << '\n';
    }
    st.epoch = epoch + 1;
    const bool last = st.epoch == epochs_eff;
    if (last || (cfg.checkpoint_every > 0 && st.epoch % cfg.checkpoint_every == 0)) {
      const std::string path = (fs::path(out_dir) / ("ckpt_" + std::to_string(st.epoch) + ".bin")).string();
      save_checkpoint(path, st, cfg);
      if (last) result.final_checkpoint = path;
    }
  }
  if (result.final_checkpoint.empty()) {
    // resume invoked at or past the final epoch: re-emit the final checkpoint path
    result.final_checkpoint = (fs::path(out_dir) / ("ckpt_" + std::to_string(epochs_eff) + ".bin")).string();
    if (!fs::exists(result.final_checkpoint)) {
      const std::string path = result.final_checkpoint;
      save_checkpoint(path, st, cfg);
    }
  }
  return result;
}

}  // namespace

PretrainResult pretrain(const Cohort& cohort, const PretrainConfig& cfg, const std::string& out_dir,
                        const VolumeLoader* loader) {
  return run(cohort, cfg, out_dir, loader, nullptr);
}

PretrainResult resume(const std::string& checkpoint_path, const Cohort& cohort, const PretrainConfig& cfg,
                      const std::string& out_dir, const VolumeLoader* loader) {
  return run(cohort, cfg, out_dir, loader, &checkpoint_path);
}

void load_model_weights(const std::string& checkpoint_path, Model<real>& model, std::uint64_t expect_fingerprint) {
  std::ifstream in(checkpoint_path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + checkpoint_path);
  if (read_u64(in) != kMagic) throw std::runtime_error("checkpoint: bad magic in " + checkpoint_path);
  const std::uint64_t fp = read_u64(in);
  if (expect_fingerprint != 0 && fp != expect_fingerprint)
    throw std::runtime_error("checkpoint: config fingerprint mismatch for " + checkpoint_path);
  read_i64(in);  // epoch
  read_i64(in);  // global_step
  read_i64(in);  // adam t
  const std::int64_t rng_len = read_i64(in);
  in.seekg(rng_len, std::ios::cur);
  model.load_weights(in);
}

void write_loss_history(const std::string& path, const std::vector<LossHistoryRow>& rows) {
  std::ofstream out(path);
  out << "step\tepoch\tlr\tsimilarity\tvariance_a\tvariance_b\tcovariance_a\tcovariance_b\ttotal\n";
  for (const auto& r : rows)
    out << r.step << '\t' << r.epoch << '\t' << r.lr << '\t' << r.loss.similarity << '\t' << r.loss.variance_a << '\t'
        << r.loss.variance_b << '\t' << r.loss.covariance_a << '\t' << r.loss.covariance_b << '\t' << r.loss.total
        << '\n';
}

}  // namespace tinc
