#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "tinc/rng.hpp"

namespace tinc::nn {

// Feature-map batch: columns are voxel positions, rows are channels.
// Column index = ((sample*S + z)*H + y)*W + x. Dense vectors use s=h=w=1.
template <class S>
struct Tensor {
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> m;
  int n = 0, c = 0, s = 1, h = 1, w = 1;

  Tensor() = default;
  Tensor(int n_, int c_, int s_, int h_, int w_)
      : m(c_, std::int64_t(n_) * s_ * h_ * w_), n(n_), c(c_), s(s_), h(h_), w(w_) {}

  std::int64_t positions() const { return std::int64_t(s) * h * w; }
};

template <class S>
struct Param {
  Eigen::Matrix<S, Eigen::Dynamic, 1> value, grad;
  bool decay_exempt = false;
  double lr_scale = 1.0;
  std::string name;

  void init(std::int64_t size, const std::string& name_, bool exempt) {
    value.setZero(size);
    grad.setZero(size);
    name = name_;
    decay_exempt = exempt;
  }
};

template <class S>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<S> forward(const Tensor<S>& x, bool train) = 0;
  virtual Tensor<S> backward(const Tensor<S>& gout) = 0;
  virtual void collect_params(std::vector<Param<S>*>&) {}
  // persistent non-trainable state (batchnorm running stats)
  virtual void collect_buffers(std::vector<Eigen::Matrix<S, Eigen::Dynamic, 1>*>&) {}
};

namespace detail {
template <class S>
S he_scale(std::int64_t fan_in) {
  return std::sqrt(S(2) / S(fan_in));
}
template <class S>
void he_init(Param<S>& p, std::int64_t fan_in, Rng& rng) {
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value[i] = S(rng.normal()) * he_scale<S>(fan_in);
}
inline int conv_out(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }
}  // namespace detail

// Full 3D convolution via im2col, kernel k x k x k, zero padding. Used for
// the stem where the channel count is small.
template <class S>
class Conv3d : public Layer<S> {
 public:
  Conv3d(int c_in, int c_out, int k, std::array<int, 3> stride, int pad, Rng& rng)
      : c_in_(c_in), c_out_(c_out), k_(k), stride_(stride), pad_(pad) {
    weight_.init(std::int64_t(c_out) * c_in * k * k * k, "conv.weight", false);
    bias_.init(c_out, "conv.bias", true);
    detail::he_init(weight_, std::int64_t(c_in) * k * k * k, rng);
  }

  Tensor<S> forward(const Tensor<S>& x, bool) override {
    in_dims_ = {x.n, x.c, x.s, x.h, x.w};
    const int os = detail::conv_out(x.s, k_, stride_[0], pad_);
    const int oh = detail::conv_out(x.h, k_, stride_[1], pad_);
    const int ow = detail::conv_out(x.w, k_, stride_[2], pad_);
    const std::int64_t kk = std::int64_t(c_in_) * k_ * k_ * k_;
    col_.resize(kk, std::int64_t(x.n) * os * oh * ow);
    col_.setZero();
    std::int64_t col_idx = 0;
    for (int b = 0; b < x.n; ++b)
      for (int oz = 0; oz < os; ++oz)
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox, ++col_idx) {
            std::int64_t r = 0;
            for (int ci = 0; ci < c_in_; ++ci)
              for (int kz = 0; kz < k_; ++kz) {
                const int z = oz * stride_[0] - pad_ + kz;
                for (int ky = 0; ky < k_; ++ky) {
                  const int y = oy * stride_[1] - pad_ + ky;
                  for (int kx = 0; kx < k_; ++kx, ++r) {
                    const int xx = ox * stride_[2] - pad_ + kx;
                    if (z < 0 || z >= x.s || y < 0 || y >= x.h || xx < 0 || xx >= x.w) continue;
                    col_(r, col_idx) = x.m(ci, ((std::int64_t(b) * x.s + z) * x.h + y) * x.w + xx);
                  }
                }
              }
          }
    Tensor<S> out(x.n, c_out_, os, oh, ow);
    out.m.noalias() = w_mat() * col_;
    out.m.colwise() += bias_.value;
    return out;
  }

  Tensor<S> backward(const Tensor<S>& g) override {
    const std::int64_t kk = std::int64_t(c_in_) * k_ * k_ * k_;
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>> dw(weight_.grad.data(), c_out_, kk);
    dw.noalias() += g.m * col_.transpose();
    bias_.grad += g.m.rowwise().sum();
    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> dcol = w_mat().transpose() * g.m;
    Tensor<S> dx(in_dims_[0], in_dims_[1], in_dims_[2], in_dims_[3], in_dims_[4]);
    dx.m.setZero();
    const int xs = in_dims_[2], xh = in_dims_[3], xw = in_dims_[4];
    std::int64_t col_idx = 0;
    for (int b = 0; b < in_dims_[0]; ++b)
      for (int oz = 0; oz < g.s; ++oz)
        for (int oy = 0; oy < g.h; ++oy)
          for (int ox = 0; ox < g.w; ++ox, ++col_idx) {
            std::int64_t r = 0;
            for (int ci = 0; ci < c_in_; ++ci)
              for (int kz = 0; kz < k_; ++kz) {
                const int z = oz * stride_[0] - pad_ + kz;
                for (int ky = 0; ky < k_; ++ky) {
                  const int y = oy * stride_[1] - pad_ + ky;
                  for (int kx = 0; kx < k_; ++kx, ++r) {
                    const int xx = ox * stride_[2] - pad_ + kx;
                    if (z < 0 || z >= xs || y < 0 || y >= xh || xx < 0 || xx >= xw) continue;
                    dx.m(ci, ((std::int64_t(b) * xs + z) * xh + y) * xw + xx) += dcol(r, col_idx);
                  }
                }
              }
          }
    return dx;
  }

  void collect_params(std::vector<Param<S>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>> w_mat() {
    return {weight_.value.data(), c_out_, std::int64_t(c_in_) * k_ * k_ * k_};
  }
  int c_in_, c_out_, k_, pad_;
  std::array<int, 3> stride_;
  Param<S> weight_, bias_;
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> col_;
  std::array<int, 5> in_dims_{};
};

// Depthwise k x k x k convolution (per-channel groups), zero padding.
template <class S>
class DepthwiseConv3d : public Layer<S> {
 public:
  DepthwiseConv3d(int channels, int k, std::array<int, 3> stride, Rng& rng)
      : c_(channels), k_(k), stride_(stride), pad_(k / 2) {
    weight_.init(std::int64_t(channels) * k * k * k, "dwconv.weight", false);
    bias_.init(channels, "dwconv.bias", true);
    detail::he_init(weight_, std::int64_t(k) * k * k, rng);
  }

  Tensor<S> forward(const Tensor<S>& x, bool) override {
    input_ = x;
    const int os = detail::conv_out(x.s, k_, stride_[0], pad_);
    const int oh = detail::conv_out(x.h, k_, stride_[1], pad_);
    const int ow = detail::conv_out(x.w, k_, stride_[2], pad_);
    Tensor<S> out(x.n, c_, os, oh, ow);
    const std::int64_t kcube = std::int64_t(k_) * k_ * k_;
    std::int64_t col = 0;
    for (int b = 0; b < x.n; ++b)
      for (int oz = 0; oz < os; ++oz)
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox, ++col)
            for (int ci = 0; ci < c_; ++ci) {
              const S* w = weight_.value.data() + ci * kcube;
              S acc = bias_.value[ci];
              std::int64_t r = 0;
              for (int kz = 0; kz < k_; ++kz) {
                const int z = oz * stride_[0] - pad_ + kz;
                if (z < 0 || z >= x.s) {
                  r += std::int64_t(k_) * k_;
                  continue;
                }
                for (int ky = 0; ky < k_; ++ky) {
                  const int y = oy * stride_[1] - pad_ + ky;
                  if (y < 0 || y >= x.h) {
                    r += k_;
                    continue;
                  }
                  const std::int64_t base = ((std::int64_t(b) * x.s + z) * x.h + y) * x.w;
                  for (int kx = 0; kx < k_; ++kx, ++r) {
                    const int xx = ox * stride_[2] - pad_ + kx;
                    if (xx < 0 || xx >= x.w) continue;
                    acc += w[r] * x.m(ci, base + xx);
                  }
                }
              }
              out.m(ci, col) = acc;
            }
    return out;
  }

  Tensor<S> backward(const Tensor<S>& g) override {
    const Tensor<S>& x = input_;
    Tensor<S> dx(x.n, x.c, x.s, x.h, x.w);
    dx.m.setZero();
    const std::int64_t kcube = std::int64_t(k_) * k_ * k_;
    bias_.grad += g.m.rowwise().sum();
    std::int64_t col = 0;
    for (int b = 0; b < x.n; ++b)
      for (int oz = 0; oz < g.s; ++oz)
        for (int oy = 0; oy < g.h; ++oy)
          for (int ox = 0; ox < g.w; ++ox, ++col)
            for (int ci = 0; ci < c_; ++ci) {
              const S go = g.m(ci, col);
              const S* w = weight_.value.data() + ci * kcube;
              S* dw = weight_.grad.data() + ci * kcube;
              std::int64_t r = 0;
              for (int kz = 0; kz < k_; ++kz) {
                const int z = oz * stride_[0] - pad_ + kz;
                if (z < 0 || z >= x.s) {
                  r += std::int64_t(k_) * k_;
                  continue;
                }
                for (int ky = 0; ky < k_; ++ky) {
                  const int y = oy * stride_[1] - pad_ + ky;
                  if (y < 0 || y >= x.h) {
                    r += k_;
                    continue;
                  }
                  const std::int64_t base = ((std::int64_t(b) * x.s + z) * x.h + y) * x.w;
                  for (int kx = 0; kx < k_; ++kx, ++r) {
                    const int xx = ox * stride_[2] - pad_ + kx;
                    if (xx < 0 || xx >= x.w) continue;
                    dw[r] += go * x.m(ci, base + xx);
                    dx.m(ci, base + xx) += go * w[r];
                  }
                }
              }
            }
    return dx;
  }

  void collect_params(std::vector<Param<S>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  int c_, k_, pad_;
  std::array<int, 3> stride_;
  Param<S> weight_, bias_;
  Tensor<S> input_;
};

// 1x1x1 convolution (channel mixing), optionally strided. Also serves as the
// fully connected layer on s=h=w=1 tensors.
template <class S>
class PointwiseConv : public Layer<S> {
 public:
  PointwiseConv(int c_in, int c_out, std::array<int, 3> stride, Rng& rng)
      : c_in_(c_in), c_out_(c_out), stride_(stride) {
    weight_.init(std::int64_t(c_out) * c_in, "pwconv.weight", false);
    bias_.init(c_out, "pwconv.bias", true);
    detail::he_init(weight_, c_in, rng);
  }
  PointwiseConv(int c_in, int c_out, Rng& rng) : PointwiseConv(c_in, c_out, {1, 1, 1}, rng) {}

  Tensor<S> forward(const Tensor<S>& x, bool) override {
    in_dims_ = {x.n, x.c, x.s, x.h, x.w};
    if (stride_ == std::array<int, 3>{1, 1, 1}) {
      gathered_ = x.m;
      out_dims_ = {x.s, x.h, x.w};
    } else {
      const int os = (x.s + stride_[0] - 1) / stride_[0];
      const int oh = (x.h + stride_[1] - 1) / stride_[1];
      const int ow = (x.w + stride_[2] - 1) / stride_[2];
      out_dims_ = {os, oh, ow};
      gathered_.resize(x.c, std::int64_t(x.n) * os * oh * ow);
      indices_.resize(gathered_.cols());
      std::int64_t col = 0;
      for (int b = 0; b < x.n; ++b)
        for (int z = 0; z < x.s; z += stride_[0])
          for (int y = 0; y < x.h; y += stride_[1])
            for (int xx = 0; xx < x.w; xx += stride_[2], ++col) {
              indices_[col] = ((std::int64_t(b) * x.s + z) * x.h + y) * x.w + xx;
              gathered_.col(col) = x.m.col(indices_[col]);
            }
    }
    Tensor<S> out(x.n, c_out_, out_dims_[0], out_dims_[1], out_dims_[2]);
    out.m.noalias() = w_mat() * gathered_;
    out.m.colwise() += bias_.value;
    return out;
  }

  Tensor<S> backward(const Tensor<S>& g) override {
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>> dw(weight_.grad.data(), c_out_, c_in_);
    dw.noalias() += g.m * gathered_.transpose();
    bias_.grad += g.m.rowwise().sum();
    Tensor<S> dx(in_dims_[0], in_dims_[1], in_dims_[2], in_dims_[3], in_dims_[4]);
    if (stride_ == std::array<int, 3>{1, 1, 1}) {
      dx.m.noalias() = w_mat().transpose() * g.m;
    } else {
      dx.m.setZero();
      const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> dg = w_mat().transpose() * g.m;
      for (std::int64_t col = 0; col < dg.cols(); ++col) dx.m.col(indices_[col]) += dg.col(col);
    }
    return dx;
  }

  void collect_params(std::vector<Param<S>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>> w_mat() {
    return {weight_.value.data(), c_out_, c_in_};
  }
  int c_in_, c_out_;
  std::array<int, 3> stride_;
  Param<S> weight_, bias_;
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> gathered_;
  std::vector<std::int64_t> indices_;
  std::array<int, 5> in_dims_{};
  std::array<int, 3> out_dims_{};
};

// Per-channel batch normalization over all columns (batch and spatial).
template <class S>
class BatchNorm : public Layer<S> {
 public:
  explicit BatchNorm(int channels, S eps = S(1e-5), S momentum = S(0.1)) : c_(channels), eps_(eps), momentum_(momentum) {
    gamma_.init(channels, "bn.gamma", true);
    beta_.init(channels, "bn.beta", true);
    gamma_.value.setOnes();
    running_mean_.setZero(channels);
    running_var_.setOnes(channels);
  }

  Tensor<S> forward(const Tensor<S>& x, bool train) override {
    Tensor<S> out = x;
    if (train) {
      const std::int64_t m = x.m.cols();
      mean_ = x.m.rowwise().mean();
      Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> centered = x.m.colwise() - mean_;
      const Eigen::Matrix<S, Eigen::Dynamic, 1> var = centered.rowwise().squaredNorm() / S(m);
      inv_std_ = (var.array() + eps_).rsqrt();
      xhat_ = centered.array().colwise() * inv_std_.array();
      out.m = (xhat_.array().colwise() * gamma_.value.array()).colwise() + beta_.value.array();
      const S unbias = m > 1 ? S(m) / S(m - 1) : S(1);
      running_mean_ = (S(1) - momentum_) * running_mean_ + momentum_ * mean_;
      running_var_ = (S(1) - momentum_) * running_var_ + momentum_ * unbias * var;
    } else {
      const Eigen::Matrix<S, Eigen::Dynamic, 1> inv = (running_var_.array() + eps_).rsqrt();
      out.m = (((x.m.colwise() - running_mean_).array().colwise() * inv.array()).colwise() * gamma_.value.array())
                  .colwise() +
              beta_.value.array();
    }
    return out;
  }

  Tensor<S> backward(const Tensor<S>& g) override {
    const std::int64_t m = g.m.cols();
    gamma_.grad += (g.m.array() * xhat_.array()).rowwise().sum().matrix();
    beta_.grad += g.m.rowwise().sum();
    const Eigen::Matrix<S, Eigen::Dynamic, 1> g_mean = g.m.rowwise().mean();
    const Eigen::Matrix<S, Eigen::Dynamic, 1> gx_mean = (g.m.array() * xhat_.array()).rowwise().mean().matrix();
    Tensor<S> dx = g;
    dx.m = ((g.m.colwise() - g_mean).array() - xhat_.array().colwise() * gx_mean.array()).colwise() *
           (gamma_.value.array() * inv_std_.array());
    (void)m;
    return dx;
  }

  void collect_params(std::vector<Param<S>*>& out) override {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }
  void collect_buffers(std::vector<Eigen::Matrix<S, Eigen::Dynamic, 1>*>& out) override {
    out.push_back(&running_mean_);
    out.push_back(&running_var_);
  }

 private:
  int c_;
  S eps_, momentum_;
  Param<S> gamma_, beta_;
  Eigen::Matrix<S, Eigen::Dynamic, 1> running_mean_, running_var_, mean_, inv_std_;
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> xhat_;
};

template <class S>
class ReLU : public Layer<S> {
 public:
  Tensor<S> forward(const Tensor<S>& x, bool) override {
    mask_ = (x.m.array() > S(0));
    Tensor<S> out = x;
    out.m = mask_.select(x.m, S(0));
    return out;
  }
  Tensor<S> backward(const Tensor<S>& g) override {
    Tensor<S> dx = g;
    dx.m = mask_.select(g.m, S(0));
    return dx;
  }

 private:
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask_;
};

// Global average pool over all spatial positions -> (C, n) dense tensor.
template <class S>
class GlobalAvgPool : public Layer<S> {
 public:
  Tensor<S> forward(const Tensor<S>& x, bool) override {
    in_dims_ = {x.n, x.c, x.s, x.h, x.w};
    const std::int64_t p = x.positions();
    Tensor<S> out(x.n, x.c, 1, 1, 1);
    for (int b = 0; b < x.n; ++b) out.m.col(b) = x.m.middleCols(std::int64_t(b) * p, p).rowwise().mean();
    return out;
  }
  Tensor<S> backward(const Tensor<S>& g) override {
    Tensor<S> dx(in_dims_[0], in_dims_[1], in_dims_[2], in_dims_[3], in_dims_[4]);
    const std::int64_t p = dx.positions();
    for (int b = 0; b < dx.n; ++b)
      dx.m.middleCols(std::int64_t(b) * p, p) = (g.m.col(b) / S(p)).replicate(1, p);
    return dx;
  }

 private:
  std::array<int, 5> in_dims_{};
};

// A sequential chain that owns its layers.
template <class S>
class Sequential : public Layer<S> {
 public:
  void add(std::unique_ptr<Layer<S>> l) { layers_.push_back(std::move(l)); }

  Tensor<S> forward(const Tensor<S>& x, bool train) override {
    Tensor<S> cur = x;
    for (auto& l : layers_) cur = l->forward(cur, train);
    return cur;
  }
  Tensor<S> backward(const Tensor<S>& g) override {
    Tensor<S> cur = g;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
    return cur;
  }
  void collect_params(std::vector<Param<S>*>& out) override {
    for (auto& l : layers_) l->collect_params(out);
  }
  void collect_buffers(std::vector<Eigen::Matrix<S, Eigen::Dynamic, 1>*>& out) override {
    for (auto& l : layers_) l->collect_buffers(out);
  }

 private:
  std::vector<std::unique_ptr<Layer<S>>> layers_;
};

// Channel-separated block: pointwise (channel mixing) -> BN -> ReLU ->
// depthwise kxkxk (optionally strided) -> BN, plus a residual connection
// (projected when the shape changes), then ReLU.
template <class S>
class CsnBlock : public Layer<S> {
 public:
  CsnBlock(int c_in, int c_out, std::array<int, 3> stride, Rng& rng)
      : pw_(std::make_unique<PointwiseConv<S>>(c_in, c_out, rng)),
        bn1_(std::make_unique<BatchNorm<S>>(c_out)),
        relu1_(std::make_unique<ReLU<S>>()),
        dw_(std::make_unique<DepthwiseConv3d<S>>(c_out, 3, stride, rng)),
        bn2_(std::make_unique<BatchNorm<S>>(c_out)),
        relu2_(std::make_unique<ReLU<S>>()) {
    if (c_in != c_out || stride != std::array<int, 3>{1, 1, 1}) {
      proj_ = std::make_unique<PointwiseConv<S>>(c_in, c_out, stride, rng);
      proj_bn_ = std::make_unique<BatchNorm<S>>(c_out);
    }
  }

  Tensor<S> forward(const Tensor<S>& x, bool train) override {
    Tensor<S> main = relu1_->forward(bn1_->forward(pw_->forward(x, train), train), train);
    main = bn2_->forward(dw_->forward(main, train), train);
    Tensor<S> shortcut = proj_ ? proj_bn_->forward(proj_->forward(x, train), train) : x;
    main.m += shortcut.m;
    return relu2_->forward(main, train);
  }

  Tensor<S> backward(const Tensor<S>& g) override {
    Tensor<S> d = relu2_->backward(g);
    Tensor<S> d_short = d;  // residual add fans out
    Tensor<S> dx = pw_->backward(bn1_->backward(relu1_->backward(dw_->backward(bn2_->backward(d)))));
    if (proj_)
      dx.m += proj_->backward(proj_bn_->backward(d_short)).m;
    else
      dx.m += d_short.m;
    return dx;
  }

  void collect_params(std::vector<Param<S>*>& out) override {
    for (Layer<S>* l : sublayers()) l->collect_params(out);
  }
  void collect_buffers(std::vector<Eigen::Matrix<S, Eigen::Dynamic, 1>*>& out) override {
    for (Layer<S>* l : sublayers()) l->collect_buffers(out);
  }

 private:
  std::vector<Layer<S>*> sublayers() {
    std::vector<Layer<S>*> ls{pw_.get(), bn1_.get(), relu1_.get(), dw_.get(), bn2_.get(), relu2_.get()};
    if (proj_) {
      ls.push_back(proj_.get());
      ls.push_back(proj_bn_.get());
    }
    return ls;
  }
  std::unique_ptr<PointwiseConv<S>> pw_;
  std::unique_ptr<BatchNorm<S>> bn1_;
  std::unique_ptr<ReLU<S>> relu1_;
  std::unique_ptr<DepthwiseConv3d<S>> dw_;
  std::unique_ptr<BatchNorm<S>> bn2_;
  std::unique_ptr<ReLU<S>> relu2_;
  std::unique_ptr<PointwiseConv<S>> proj_;
  std::unique_ptr<BatchNorm<S>> proj_bn_;
};

}  // namespace tinc::nn
