#pragma once

#include <cmath>
#include <vector>

#include "tinc/nn.hpp"

namespace tinc {

// AdamW: adaptive moments with decoupled weight decay; parameters flagged
// decay_exempt (biases, norm statistics) never receive the decay update.
template <class S>
class AdamW {
 public:
  AdamW(std::vector<nn::Param<S>*> params, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8)
      : params_(std::move(params)), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
    for (auto* p : params_) {
      m_.emplace_back(Eigen::Matrix<S, Eigen::Dynamic, 1>::Zero(p->value.size()));
      v_.emplace_back(Eigen::Matrix<S, Eigen::Dynamic, 1>::Zero(p->value.size()));
    }
  }

  void step(double lr) {
    ++t_;
    const S c1 = S(1.0 - std::pow(b1_, double(t_)));
    const S c2 = S(1.0 - std::pow(b2_, double(t_)));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto* p = params_[i];
      m_[i] = S(b1_) * m_[i] + S(1 - b1_) * p->grad;
      v_[i] = S(b2_) * v_[i].array().matrix() + S(1 - b2_) * p->grad.cwiseProduct(p->grad);
      const auto update = ((m_[i] / c1).array() / ((v_[i] / c2).array().sqrt() + S(eps_))).matrix();
      const double plr = lr * p->lr_scale;
      if (!p->decay_exempt && wd_ != 0.0) p->value -= S(plr * wd_) * p->value;
      p->value -= S(plr) * update;
    }
  }

  std::int64_t step_count() const { return t_; }

  // optimizer state round-trip for checkpoints (stored as float64)
  template <class Writer>
  void save(Writer&& write_vec) const {
    for (const auto& v : m_) write_vec(v);
    for (const auto& v : v_) write_vec(v);
  }
  template <class Reader>
  void load(Reader&& read_vec, std::int64_t t) {
    for (auto& v : m_) read_vec(v);
    for (auto& v : v_) read_vec(v);
    t_ = t;
  }

 private:
  std::vector<nn::Param<S>*> params_;
  std::vector<Eigen::Matrix<S, Eigen::Dynamic, 1>> m_, v_;
  double wd_, b1_, b2_, eps_;
  std::int64_t t_ = 0;
};

// Linear warmup from 0 to base_lr, then cosine decay to 0.
inline double lr_at(std::int64_t step, std::int64_t warmup_steps, std::int64_t total_steps, double base_lr) {
  if (step < 0 || step > total_steps) throw std::invalid_argument("lr_at: step outside [0, total_steps]");
  if (warmup_steps > 0 && step <= warmup_steps) return base_lr * double(step) / double(warmup_steps);
  if (total_steps == warmup_steps) return base_lr;
  const double progress = double(step - warmup_steps) / double(total_steps - warmup_steps);
  return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

}  // namespace tinc
