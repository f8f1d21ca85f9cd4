#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>

#include "tinc/nn.hpp"
#include "tinc/volume.hpp"

namespace tinc {

struct EncoderConfig {
  std::array<int, 3> input_shape{16, 64, 64};
  int stem_channels = 16;
  std::array<int, 3> stem_stride{2, 4, 4};
  std::vector<int> stage_channels{16, 32};
  std::vector<int> blocks_per_stage{2, 2};
  int representation_dim = 128;

  void validate() const {
    if (stage_channels.size() != blocks_per_stage.size() || stage_channels.empty())
      throw std::invalid_argument("encoder: stage_channels and blocks_per_stage must be equal-length, non-empty");
    for (int c : stage_channels)
      if (c <= 0) throw std::invalid_argument("encoder: non-positive stage channels");
    for (int b : blocks_per_stage)
      if (b <= 0) throw std::invalid_argument("encoder: non-positive blocks per stage");
    if (stem_channels <= 0 || representation_dim <= 0)
      throw std::invalid_argument("encoder: non-positive dims");
    for (int d : input_shape)
      if (d <= 0) throw std::invalid_argument("encoder: non-positive input shape");
  }
};

struct ProjectorConfig {
  std::vector<int> hidden_dims{256, 256};
  int output_dim = 64;

  void validate() const {
    for (int d : hidden_dims)
      if (d <= 0) throw std::invalid_argument("projector: non-positive hidden dim");
    if (output_dim <= 0) throw std::invalid_argument("projector: non-positive output dim");
  }
};

// Encoder f and projector g with shared weights across the two Siamese
// branches. Rows of the returned matrices are samples.
template <class S>
class Model {
 public:
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

  Model(EncoderConfig ecfg, ProjectorConfig pcfg, std::uint64_t seed) : ecfg_(ecfg), pcfg_(pcfg) {
    ecfg_.validate();
    pcfg_.validate();
    Rng rng(mix64(seed));
    encoder_.add(std::make_unique<nn::Conv3d<S>>(1, ecfg_.stem_channels, 3, ecfg_.stem_stride, 1, rng));
    encoder_.add(std::make_unique<nn::BatchNorm<S>>(ecfg_.stem_channels));
    encoder_.add(std::make_unique<nn::ReLU<S>>());
    // shape bookkeeping so downsampling never strides a collapsed axis
    std::array<int, 3> dims{};
    for (int i = 0; i < 3; ++i) dims[i] = (ecfg_.input_shape[i] + 2 - 3) / ecfg_.stem_stride[i] + 1;
    int c_in = ecfg_.stem_channels;
    for (std::size_t st = 0; st < ecfg_.stage_channels.size(); ++st) {
      const int c_out = ecfg_.stage_channels[st];
      for (int b = 0; b < ecfg_.blocks_per_stage[st]; ++b) {
        std::array<int, 3> stride{1, 1, 1};
        if (st > 0 && b == 0)
          for (int i = 0; i < 3; ++i)
            if (dims[i] > 1) {
              stride[i] = 2;
              dims[i] = (dims[i] + 1) / 2;
            }
        encoder_.add(std::make_unique<nn::CsnBlock<S>>(c_in, c_out, stride, rng));
        c_in = c_out;
      }
    }
    for (int d : dims)
      if (d < 1) throw std::invalid_argument("encoder: input shape collapses below 1 voxel");
    encoder_.add(std::make_unique<nn::GlobalAvgPool<S>>());
    encoder_.add(std::make_unique<nn::PointwiseConv<S>>(c_in, ecfg_.representation_dim, rng));

    int p_in = ecfg_.representation_dim;
    for (int hd : pcfg_.hidden_dims) {
      projector_.add(std::make_unique<nn::PointwiseConv<S>>(p_in, hd, rng));
      projector_.add(std::make_unique<nn::BatchNorm<S>>(hd));
      projector_.add(std::make_unique<nn::ReLU<S>>());
      p_in = hd;
    }
    projector_.add(std::make_unique<nn::PointwiseConv<S>>(p_in, pcfg_.output_dim, rng));
  }

  const EncoderConfig& encoder_config() const { return ecfg_; }
  const ProjectorConfig& projector_config() const { return pcfg_; }

  nn::Tensor<S> to_tensor(const std::vector<const Volume*>& batch) const {
    const auto [is, ih, iw] = ecfg_.input_shape;
    nn::Tensor<S> t(int(batch.size()), 1, is, ih, iw);
    const std::int64_t p = t.positions();
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Volume& v = *batch[b];
      if (v.s != is || v.h != ih || v.w != iw)
        throw std::invalid_argument("encode: volume shape " + shape_str(v.s, v.h, v.w) + " != input_shape " +
                                    shape_str(is, ih, iw));
      for (std::int64_t i = 0; i < p; ++i) t.m(0, std::int64_t(b) * p + i) = S(v.voxels[i]);
    }
    return t;
  }

  // (n, representation_dim); caches activations when train is true.
  Mat encode(const std::vector<const Volume*>& batch, bool train) {
    return encoder_.forward(to_tensor(batch), train).m.transpose();
  }

  // (n, output_dim), un-normalized by contract.
  Mat project(const Mat& rep, bool train) {
    if (rep.cols() != ecfg_.representation_dim) throw std::invalid_argument("project: representation dim mismatch");
    nn::Tensor<S> t(int(rep.rows()), ecfg_.representation_dim, 1, 1, 1);
    t.m = rep.transpose();
    return projector_.forward(t, train).m.transpose();
  }

  // Backward passes; valid after a train-mode forward. Gradients accumulate
  // into parameter .grad fields.
  Mat projector_backward(const Mat& d_proj) {
    nn::Tensor<S> g(int(d_proj.rows()), pcfg_.output_dim, 1, 1, 1);
    g.m = d_proj.transpose();
    return projector_.backward(g).m.transpose();
  }
  void encoder_backward(const Mat& d_rep) {
    nn::Tensor<S> g(int(d_rep.rows()), ecfg_.representation_dim, 1, 1, 1);
    g.m = d_rep.transpose();
    encoder_.backward(g);
  }

  std::vector<nn::Param<S>*> params() {
    std::vector<nn::Param<S>*> out;
    encoder_.collect_params(out);
    projector_.collect_params(out);
    return out;
  }
  std::vector<nn::Param<S>*> encoder_params() {
    std::vector<nn::Param<S>*> out;
    encoder_.collect_params(out);
    return out;
  }
  std::vector<nn::Param<S>*> projector_params() {
    std::vector<nn::Param<S>*> out;
    projector_.collect_params(out);
    return out;
  }
  std::vector<Eigen::Matrix<S, Eigen::Dynamic, 1>*> buffers() {
    std::vector<Eigen::Matrix<S, Eigen::Dynamic, 1>*> out;
    encoder_.collect_buffers(out);
    projector_.collect_buffers(out);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->grad.setZero();
  }
  std::int64_t param_count() {
    std::int64_t n = 0;
    for (auto* p : params()) n += p->value.size();
    return n;
  }

  // Weights and running statistics, stored as float64 regardless of S.
  void save_weights(std::ostream& out) {
    auto write_vec = [&](const auto& v) {
      const std::int64_t n = v.size();
      out.write(reinterpret_cast<const char*>(&n), sizeof(n));
      for (std::int64_t i = 0; i < n; ++i) {
        const double d = double(v[i]);
        out.write(reinterpret_cast<const char*>(&d), sizeof(d));
      }
    };
    for (auto* p : params()) write_vec(p->value);
    for (auto* b : buffers()) write_vec(*b);
  }
  void load_weights(std::istream& in) {
    auto read_vec = [&](auto& v) {
      std::int64_t n = 0;
      in.read(reinterpret_cast<char*>(&n), sizeof(n));
      if (!in || n != v.size()) throw std::runtime_error("checkpoint: weight blob does not match model shape");
      for (std::int64_t i = 0; i < n; ++i) {
        double d;
        in.read(reinterpret_cast<char*>(&d), sizeof(d));
        v[i] = S(d);
      }
    };
    for (auto* p : params()) read_vec(p->value);
    for (auto* b : buffers()) read_vec(*b);
    if (!in) throw std::runtime_error("checkpoint: truncated weight blob");
  }

 private:
  EncoderConfig ecfg_;
  ProjectorConfig pcfg_;
  nn::Sequential<S> encoder_, projector_;
};

}  // namespace tinc
