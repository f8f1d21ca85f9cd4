#include "tinc/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "json.hpp"

namespace tinc {

using Mat = Model<real>::Mat;
using nlohmann::json;

std::vector<LabelledScan> usable_scans(const Cohort& cohort, int horizon_months) {
  std::vector<LabelledScan> out;
  for (const auto& eye : cohort.eyes)
    for (auto& ls : assign_labels(eye, horizon_months))
      if (ls.label != Label::excluded) out.push_back(std::move(ls));
  return out;
}

namespace {

// patient_id -> (scans, has any positive)
std::map<std::string, std::pair<std::vector<const LabelledScan*>, bool>> by_patient(
    const std::vector<LabelledScan>& scans) {
  std::map<std::string, std::pair<std::vector<const LabelledScan*>, bool>> m;
  for (const auto& s : scans) {
    auto& e = m[s.visit.patient_id];
    e.first.push_back(&s);
    if (s.label == Label::positive) e.second = true;
  }
  return m;
}

std::pair<std::vector<std::string>, std::vector<std::string>> shuffled_strata(const std::vector<LabelledScan>& scans,
                                                                              std::uint64_t seed) {
  std::vector<std::string> pos, neg;
  for (const auto& [pid, entry] : by_patient(scans)) (entry.second ? pos : neg).push_back(pid);
  Rng rng(mix64(seed ^ 0x51a7a));
  auto shuffle = [&](std::vector<std::string>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[std::size_t(rng.uniform_int(0, i - 1))]);
  };
  shuffle(pos);
  shuffle(neg);
  return {pos, neg};
}

}  // namespace

Split train_test_split(const std::vector<LabelledScan>& scans, double test_fraction, std::uint64_t seed) {
  auto [pos, neg] = shuffled_strata(scans, seed);
  std::vector<std::string> test_patients;
  auto take = [&](const std::vector<std::string>& ids) {
    const std::size_t k = std::size_t(std::lround(test_fraction * double(ids.size())));
    test_patients.insert(test_patients.end(), ids.begin(), ids.begin() + std::min(k, ids.size()));
  };
  take(pos);
  take(neg);
  Split split;
  for (const auto& s : scans) {
    const bool in_test = std::find(test_patients.begin(), test_patients.end(), s.visit.patient_id) != test_patients.end();
    (in_test ? split.test : split.train).push_back(s);
  }
  return split;
}

std::vector<std::vector<LabelledScan>> stratified_folds(const std::vector<LabelledScan>& scans, int k,
                                                        std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_folds: k must be >= 2");
  auto [pos, neg] = shuffled_strata(scans, seed);
  std::map<std::string, int> fold_of;
  int i = 0;
  for (const auto& pid : pos) fold_of[pid] = i++ % k;
  for (const auto& pid : neg) fold_of[pid] = i++ % k;
  std::vector<std::vector<LabelledScan>> folds{std::size_t(k)};
  for (const auto& s : scans) folds[std::size_t(fold_of.at(s.visit.patient_id))].push_back(s);
  return folds;
}

namespace {

Mat encode_scans(Model<real>& model, const std::vector<LabelledScan>& scans, int batch_size,
                 const VolumeLoader& loader) {
  Mat reps(std::int64_t(scans.size()), model.encoder_config().representation_dim);
  for (std::size_t start = 0; start < scans.size(); start += std::size_t(batch_size)) {
    const std::size_t end = std::min(scans.size(), start + std::size_t(batch_size));
    std::vector<Volume> vols;
    std::vector<const Volume*> ptrs;
    vols.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) vols.push_back(loader(scans[i].visit));
    for (const auto& v : vols) ptrs.push_back(&v);
    reps.middleRows(std::int64_t(start), std::int64_t(end - start)) = model.encode(ptrs, false);
  }
  return reps;
}

void check_two_classes(const std::vector<LabelledScan>& scans, const char* what) {
  bool pos = false, neg = false;
  for (const auto& s : scans) (s.label == Label::positive ? pos : neg) = true;
  if (!pos || !neg) throw std::runtime_error(std::string(what) + ": split contains a single class");
}

std::vector<int> labels_of(const std::vector<LabelledScan>& scans) {
  std::vector<int> y(scans.size());
  for (std::size_t i = 0; i < scans.size(); ++i) y[i] = scans[i].label == Label::positive ? 1 : 0;
  return y;
}

MetricsReport report_from_scores(const std::vector<double>& scores, const std::vector<int>& y) {
  MetricsReport r;
  for (int l : y) (l ? r.n_pos : r.n_neg)++;
  r.prauc_baseline = double(r.n_pos) / double(y.size());
  r.rocauc = roc_auc(scores, y);
  r.prauc = pr_auc(scores, y);
  r.bacc = balanced_accuracy(scores, y);
  return r;
}

// Class-weighted logistic regression on fixed features, Adam in double.
struct LogisticHead {
  Eigen::VectorXd w;
  double b = 0;

  void train(const Eigen::MatrixXd& x, const std::vector<int>& y, double pos_weight, double lr, int epochs,
             std::uint64_t seed) {
    const auto n = x.rows(), d = x.cols();
    w.setZero(d);
    Rng rng(mix64(seed ^ 0x10915717));
    for (Eigen::Index i = 0; i < d; ++i) w[i] = 0.01 * rng.normal();
    Eigen::VectorXd mw = Eigen::VectorXd::Zero(d), vw = Eigen::VectorXd::Zero(d);
    double mb = 0, vb = 0;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int t = 1; t <= epochs; ++t) {
      const Eigen::VectorXd logits = (x * w).array() + b;
      const Eigen::VectorXd p = (1.0 + (-logits.array()).exp()).inverse();
      Eigen::VectorXd dl(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double weight = y[std::size_t(i)] ? pos_weight : 1.0;
        dl[i] = weight * (p[i] - double(y[std::size_t(i)])) / double(n);
      }
      const Eigen::VectorXd gw = x.transpose() * dl;
      const double gb = dl.sum();
      mw = b1 * mw + (1 - b1) * gw;
      vw = b2 * vw.array().matrix() + (1 - b2) * gw.cwiseProduct(gw);
      mb = b1 * mb + (1 - b1) * gb;
      vb = b2 * vb + (1 - b2) * gb * gb;
      const double c1 = 1 - std::pow(b1, t), c2 = 1 - std::pow(b2, t);
      w -= lr * ((mw / c1).array() / ((vw / c2).array().sqrt() + eps)).matrix();
      b -= lr * (mb / c1) / (std::sqrt(vb / c2) + eps);
    }
  }

  std::vector<double> scores(const Eigen::MatrixXd& x) const {
    std::vector<double> out(std::size_t(x.rows()));
    const Eigen::VectorXd logits = (x * w).array() + b;
    for (Eigen::Index i = 0; i < logits.size(); ++i) out[std::size_t(i)] = 1.0 / (1.0 + std::exp(-logits[i]));
    return out;
  }
};

// train-set standardization for probe conditioning
void standardize_features(Eigen::MatrixXd& train, Eigen::MatrixXd& test) {
  const Eigen::RowVectorXd mean = train.colwise().mean();
  Eigen::RowVectorXd sd = ((train.rowwise() - mean).colwise().squaredNorm() / double(train.rows())).cwiseSqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j)
    if (sd[j] < 1e-8) sd[j] = 1.0;
  train = (train.rowwise() - mean).array().rowwise() / sd.array();
  test = (test.rowwise() - mean).array().rowwise() / sd.array();
}

}  // namespace

MetricsReport linear_eval(Model<real>& model, const std::vector<LabelledScan>& train,
                          const std::vector<LabelledScan>& test, const EvalConfig& cfg, const VolumeLoader& loader) {
  cfg.validate();
  check_two_classes(train, "linear_eval");
  check_two_classes(test, "linear_eval test");
  Eigen::MatrixXd x_train = encode_scans(model, train, cfg.batch_size, loader).cast<double>();
  Eigen::MatrixXd x_test = encode_scans(model, test, cfg.batch_size, loader).cast<double>();
  standardize_features(x_train, x_test);
  LogisticHead head;
  head.train(x_train, labels_of(train), cfg.positive_class_weight, cfg.lr, cfg.epochs, cfg.seed);
  return report_from_scores(head.scores(x_test), labels_of(test));
}

namespace {

Volume translate_replicate(const Volume& v, int dy, int dx) {
  if (dy == 0 && dx == 0) return v;
  Volume out(v.s, v.h, v.w);
  for (int z = 0; z < v.s; ++z) {
    auto src = v.slice(z);
    auto dst = out.slice(z);
    for (int y = 0; y < v.h; ++y)
      for (int x = 0; x < v.w; ++x)
        dst(y, x) = src(std::clamp(y - dy, 0, v.h - 1), std::clamp(x - dx, 0, v.w - 1));
  }
  return out;
}

Volume rotate_inplane(const Volume& v, double degrees) {
  if (degrees == 0.0) return v;
  const double a = degrees * 3.14159265358979323846 / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  const double cy = 0.5 * (v.h - 1), cx = 0.5 * (v.w - 1);
  Volume out(v.s, v.h, v.w);
  for (int z = 0; z < v.s; ++z) {
    auto src = v.slice(z);
    auto dst = out.slice(z);
    for (int y = 0; y < v.h; ++y)
      for (int x = 0; x < v.w; ++x) {
        const double fy = std::clamp(ca * (y - cy) + sa * (x - cx) + cy, 0.0, double(v.h - 1));
        const double fx = std::clamp(-sa * (y - cy) + ca * (x - cx) + cx, 0.0, double(v.w - 1));
        const int y0 = int(fy), x0 = int(fx);
        const int y1 = std::min(y0 + 1, v.h - 1), x1 = std::min(x0 + 1, v.w - 1);
        const double wy = fy - y0, wx = fx - x0;
        dst(y, x) = (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x1)) +
                    wy * ((1 - wx) * src(y1, x0) + wx * src(y1, x1));
      }
  }
  return out;
}

Volume downstream_augment(const Volume& v, const EvalConfig& cfg, Rng& rng) {
  Volume cur = translate_replicate(v, int(rng.uniform_int(-cfg.translate_max, cfg.translate_max)),
                                   int(rng.uniform_int(-cfg.translate_max, cfg.translate_max)));
  cur = rotate_inplane(cur, rng.uniform(-cfg.rotate_degrees, cfg.rotate_degrees));
  if (rng.bernoulli(cfg.hflip_prob)) {
    for (int z = 0; z < cur.s; ++z) cur.slice(z) = cur.slice(z).rowwise().reverse().eval();
  }
  return cur;
}

std::vector<double> score_with_head(Model<real>& model, const std::vector<LabelledScan>& scans,
                                    const Eigen::Matrix<real, Eigen::Dynamic, 1>& w, real b, int batch_size,
                                    const VolumeLoader& loader) {
  const Mat reps = encode_scans(model, scans, batch_size, loader);
  std::vector<double> out(scans.size());
  for (Eigen::Index i = 0; i < reps.rows(); ++i) {
    const double logit = double(reps.row(i).dot(w.transpose())) + double(b);
    out[std::size_t(i)] = 1.0 / (1.0 + std::exp(-logit));
  }
  return out;
}

}  // namespace

MetricsReport fine_tune(Model<real>& model, const std::vector<LabelledScan>& train,
                        const std::vector<LabelledScan>& test, const EvalConfig& cfg, const VolumeLoader& loader) {
  cfg.validate();
  check_two_classes(train, "fine_tune");
  check_two_classes(test, "fine_tune test");

  // patient-wise validation split for best-epoch selection
  Split inner = train_test_split(train, cfg.val_fraction, mix64(cfg.seed ^ 0xf1e));
  std::vector<LabelledScan> fit = inner.train.empty() ? train : inner.train;
  const std::vector<LabelledScan>& val = inner.test;
  bool val_usable = false;
  {
    bool p = false, n = false;
    for (const auto& s : val) (s.label == Label::positive ? p : n) = true;
    val_usable = p && n;
  }

  const int rep_dim = model.encoder_config().representation_dim;
  nn::Param<real> head_w, head_b;
  head_w.init(rep_dim, "head.weight", false);
  head_b.init(1, "head.bias", true);
  Rng init_rng(mix64(cfg.seed ^ 0xead));
  for (int i = 0; i < rep_dim; ++i) head_w.value[i] = real(0.01 * init_rng.normal());

  auto params = model.params();
  params.push_back(&head_w);
  params.push_back(&head_b);
  AdamW<real> opt(params, 0.0);  // Adam: no decoupled decay in fine-tuning

  std::vector<Eigen::Matrix<real, Eigen::Dynamic, 1>> best_values;
  std::vector<Eigen::Matrix<real, Eigen::Dynamic, 1>> best_buffers;
  double best_val_auc = -1.0;
  auto snapshot = [&] {
    best_values.clear();
    for (auto* p : params) best_values.push_back(p->value);
    best_buffers.clear();
    for (auto* b : model.buffers()) best_buffers.push_back(*b);
  };
  snapshot();

  Rng rng(mix64(cfg.seed ^ 0xf17e));
  const auto y_fit = labels_of(fit);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(fit.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[std::size_t(rng.uniform_int(0, i - 1))]);

    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + std::size_t(cfg.batch_size));
      const int n = int(end - start);
      if (n < 2) continue;  // batch statistics need >= 2 samples
      std::vector<Volume> vols;
      std::vector<const Volume*> ptrs;
      vols.reserve(std::size_t(n));
      for (std::size_t i = start; i < end; ++i) vols.push_back(downstream_augment(loader(fit[order[i]].visit), cfg, rng));
      for (const auto& v : vols) ptrs.push_back(&v);

      model.zero_grad();
      head_w.grad.setZero();
      head_b.grad.setZero();
      const Mat reps = model.encode(ptrs, true);
      Mat d_rep(n, rep_dim);
      for (int i = 0; i < n; ++i) {
        const int y = y_fit[order[start + std::size_t(i)]];
        const real logit = reps.row(i).dot(head_w.value.transpose()) + head_b.value[0];
        const real p = real(1) / (real(1) + std::exp(-logit));
        const real weight = y ? real(cfg.positive_class_weight) : real(1);
        const real dlogit = weight * (p - real(y)) / real(n);
        head_w.grad += dlogit * reps.row(i).transpose();
        head_b.grad[0] += dlogit;
        d_rep.row(i) = dlogit * head_w.value.transpose();
      }
      model.encoder_backward(d_rep);
      opt.step(cfg.lr);
    }

    if (val_usable) {
      const auto scores = score_with_head(model, val, head_w.value, head_b.value[0], cfg.batch_size, loader);
      const double auc = roc_auc(scores, labels_of(val));
      if (auc > best_val_auc) {
        best_val_auc = auc;
        snapshot();
      }
    } else {
      snapshot();
    }
  }

  // restore the best epoch
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
  auto bufs = model.buffers();
  for (std::size_t i = 0; i < bufs.size(); ++i) *bufs[i] = best_buffers[i];

  const auto scores = score_with_head(model, test, head_w.value, head_b.value[0], cfg.batch_size, loader);
  return report_from_scores(scores, labels_of(test));
}

EquivarianceReport equivariance_report(Model<real>& model, const Cohort& cohort, int n_patients, std::uint64_t seed,
                                       const VolumeLoader& loader) {
  // one eye per patient, needing >= 3 visits
  std::map<std::string, const EyeSeries*> candidates;
  for (const auto& eye : cohort.eyes)
    if (eye.visits.size() >= 3 && !candidates.count(eye.patient_id())) candidates[eye.patient_id()] = &eye;
  if (int(candidates.size()) < n_patients)
    throw std::runtime_error("equivariance_report: requested " + std::to_string(n_patients) + " patients but only " +
                             std::to_string(candidates.size()) + " have >= 3 visits");

  std::vector<const EyeSeries*> pool;
  for (const auto& [pid, eye] : candidates) pool.push_back(eye);
  Rng rng(mix64(seed ^ 0xe91));
  for (int i = 0; i < n_patients; ++i) std::swap(pool[std::size_t(i)], pool[std::size_t(rng.uniform_int(i, std::int64_t(pool.size()) - 1))]);

  EquivarianceReport report;
  double ci_sum = 0;
  for (int p = 0; p < n_patients; ++p) {
    const EyeSeries& eye = *pool[std::size_t(p)];
    std::vector<Volume> vols;
    std::vector<const Volume*> ptrs;
    for (const auto& visit : eye.visits) vols.push_back(loader(visit));
    for (const auto& v : vols) ptrs.push_back(&v);
    const Mat reps = model.encode(ptrs, false);

    EquivarianceReport::Trajectory traj;
    traj.patient_id = eye.patient_id();
    traj.eye_id = eye.eye_id();
    std::vector<double> months, dists;
    for (std::size_t i = 0; i < eye.visits.size(); ++i) {
      traj.months.push_back(eye.visits[i].visit_month);
      const double d = double((reps.row(std::int64_t(i)) - reps.row(0)).norm());
      traj.distances.push_back(d);
      months.push_back(double(eye.visits[i].visit_month));
      dists.push_back(d);
    }
    traj.ci = concordance_index(months, dists);
    ci_sum += traj.ci;
    report.trajectories.push_back(std::move(traj));
  }
  report.mean_ci = ci_sum / double(n_patients);
  return report;
}

void write_metrics_report(const std::string& path, const MetricsReport& r) {
  json doc = {{"rocauc", r.rocauc},       {"prauc", r.prauc}, {"bacc", r.bacc},
              {"prauc_baseline", r.prauc_baseline}, {"n_pos", r.n_pos}, {"n_neg", r.n_neg}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("report: cannot write " + path);
  out << doc.dump(2) << "\n";
}

void write_equivariance_report(const std::string& json_path, const std::string& table_path,
                               const EquivarianceReport& r) {
  json per_patient = json::array();
  for (const auto& t : r.trajectories)
    per_patient.push_back({{"patient_id", t.patient_id}, {"eye_id", t.eye_id}, {"ci", t.ci}});
  json doc = {{"mean_ci", r.mean_ci}, {"patients", per_patient}};
  std::ofstream out(json_path);
  if (!out) throw std::runtime_error("report: cannot write " + json_path);
  out << doc.dump(2) << "\n";

  std::ofstream tab(table_path);
  if (!tab) throw std::runtime_error("report: cannot write " + table_path);
  tab << "patient_id\teye_id\tvisit_month\tdistance\n";
  for (const auto& t : r.trajectories)
    for (std::size_t i = 0; i < t.months.size(); ++i)
      tab << t.patient_id << '\t' << t.eye_id << '\t' << t.months[i] << '\t' << t.distances[i] << '\n';
}

}  // namespace tinc
