#include "doctest.h"
#include "tinc/model.hpp"
#include "tinc/optimizer.hpp"

using namespace tinc;
using Mat = Eigen::MatrixXd;

namespace {

EncoderConfig tiny_encoder() {
  EncoderConfig cfg;
  cfg.input_shape = {4, 8, 8};
  cfg.stem_channels = 4;
  cfg.stem_stride = {2, 2, 2};
  cfg.stage_channels = {4, 6};
  cfg.blocks_per_stage = {1, 1};
  cfg.representation_dim = 5;
  return cfg;
}

ProjectorConfig tiny_projector() {
  ProjectorConfig cfg;
  cfg.hidden_dims = {6};
  cfg.output_dim = 3;
  return cfg;
}

Volume random_volume(std::array<int, 3> shape, std::uint64_t seed) {
  Rng rng(seed);
  Volume v(shape[0], shape[1], shape[2]);
  for (std::int64_t i = 0; i < v.size(); ++i) v.voxels[i] = rng.uniform();
  return v;
}

}  // namespace

TEST_CASE("encode: shape contract and finiteness") {
  EncoderConfig ecfg;
  ecfg.input_shape = {16, 64, 64};
  Model<double> model(ecfg, ProjectorConfig{}, 1);
  const Volume v = random_volume({16, 64, 64}, 2);
  const Volume zero(16, 64, 64);
  const Mat rep = model.encode({&v, &zero}, false);
  CHECK(rep.rows() == 2);
  CHECK(rep.cols() == 128);
  CHECK(rep.allFinite());
}

TEST_CASE("same seed gives identical weights, different seed differs") {
  Model<double> a(tiny_encoder(), tiny_projector(), 7);
  Model<double> b(tiny_encoder(), tiny_projector(), 7);
  Model<double> c(tiny_encoder(), tiny_projector(), 8);
  auto pa = a.params(), pb = b.params(), pc = c.params();
  REQUIRE(pa.size() == pb.size());
  bool all_same = true, any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->value != pb[i]->value) all_same = false;
    if (pa[i]->value != pc[i]->value) any_diff = true;
  }
  CHECK(all_same);
  CHECK(any_diff);
}

TEST_CASE("inference is batch-size independent") {
  Model<double> model(tiny_encoder(), tiny_projector(), 3);
  const Volume v = random_volume({4, 8, 8}, 4);
  const Mat one = model.encode({&v}, false);
  const Mat eight = model.encode({&v, &v, &v, &v, &v, &v, &v, &v}, false);
  for (int i = 0; i < 8; ++i) CHECK((eight.row(i) - one.row(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("encode rejects mismatched shapes") {
  Model<double> model(tiny_encoder(), tiny_projector(), 3);
  const Volume wrong = random_volume({4, 8, 9}, 4);
  CHECK_THROWS_AS(model.encode({&wrong}, false), std::invalid_argument);
}

TEST_CASE("depthwise parameter count is channels * k^3 + channels") {
  Model<double> model(tiny_encoder(), tiny_projector(), 5);
  std::int64_t dw_params = 0;
  int dw_layers = 0;
  for (auto* p : model.params()) {
    if (p->name == "dwconv.weight") {
      ++dw_layers;
      dw_params += p->value.size();
    }
    if (p->name == "dwconv.bias") dw_params += p->value.size();
  }
  // one block per stage with channels 4 and 6
  CHECK(dw_layers == 2);
  CHECK(dw_params == (4 * 27 + 4) + (6 * 27 + 6));
}

TEST_CASE("project: shape, un-normalized rows") {
  Model<double> model(tiny_encoder(), tiny_projector(), 6);
  const Volume v1 = random_volume({4, 8, 8}, 10), v2 = random_volume({4, 8, 8}, 11);
  const Mat rep = model.encode({&v1, &v2}, false);
  const Mat proj = model.project(rep, false);
  CHECK(proj.rows() == 2);
  CHECK(proj.cols() == 3);
  bool any_off_unit = false;
  for (int i = 0; i < proj.rows(); ++i)
    if (std::abs(proj.row(i).norm() - 1.0) > 1e-3) any_off_unit = true;
  CHECK(any_off_unit);
  CHECK_THROWS_AS(model.project(Mat::Zero(2, 4), false), std::invalid_argument);
}

TEST_CASE("invalid configs are rejected at build time") {
  EncoderConfig bad = tiny_encoder();
  bad.stage_channels = {4};
  CHECK_THROWS_AS(Model<double>(bad, tiny_projector(), 1), std::invalid_argument);
  bad = tiny_encoder();
  bad.representation_dim = 0;
  CHECK_THROWS_AS(Model<double>(bad, tiny_projector(), 1), std::invalid_argument);
}

TEST_CASE("parameter gradients match finite differences end to end") {
  Model<double> model(tiny_encoder(), tiny_projector(), 12);
  const Volume v1 = random_volume({4, 8, 8}, 20), v2 = random_volume({4, 8, 8}, 21);
  const Volume v3 = random_volume({4, 8, 8}, 22);
  const std::vector<const Volume*> batch{&v1, &v2, &v3};

  // scalar readout with fixed coefficients
  Mat w = Mat::Zero(3, 3);
  Rng rng(30);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) w(i, j) = rng.normal();

  auto loss_fn = [&]() {
    const Mat proj = model.project(model.encode(batch, true), true);
    return (proj.array() * w.array()).sum();
  };

  model.zero_grad();
  const Mat proj = model.project(model.encode(batch, true), true);
  (void)proj;
  model.encoder_backward(model.projector_backward(w));

  auto params = model.params();
  const double h = 1e-5;
  int checked = 0;
  for (std::size_t pi = 0; pi < params.size(); pi += 3) {
    auto* p = params[pi];
    // probe a few entries per parameter
    for (std::int64_t k = 0; k < p->value.size(); k += std::max<std::int64_t>(1, p->value.size() / 3)) {
      const double keep = p->value[k];
      p->value[k] = keep + h;
      const double up = loss_fn();
      p->value[k] = keep - h;
      const double down = loss_fn();
      p->value[k] = keep;
      const double fd = (up - down) / (2 * h);
      const double scale = std::max({1.0, std::abs(fd), std::abs(p->grad[k])});
      CHECK(std::abs(fd - p->grad[k]) / scale < 1e-4);
      ++checked;
    }
  }
  CHECK(checked > 20);
}

TEST_CASE("weights round trip through the stream format") {
  Model<double> a(tiny_encoder(), tiny_projector(), 40);
  Model<double> b(tiny_encoder(), tiny_projector(), 41);
  std::stringstream buf;
  a.save_weights(buf);
  b.load_weights(buf);
  auto pa = a.params(), pb = b.params();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
}

TEST_CASE("lr_at: warmup, boundary continuity, endpoints") {
  const double base = 5e-4;
  CHECK(lr_at(0, 10, 100, base) == doctest::Approx(0.0));
  CHECK(lr_at(10, 10, 100, base) == doctest::Approx(base));
  CHECK(lr_at(5, 10, 100, base) == doctest::Approx(base / 2));
  CHECK(lr_at(100, 10, 100, base) == doctest::Approx(0.0).epsilon(1e-12));
  // continuity across the boundary
  CHECK(std::abs(lr_at(10, 10, 1000, base) - lr_at(11, 10, 1000, base)) < base * 0.01);
  CHECK_THROWS_AS(lr_at(101, 10, 100, base), std::invalid_argument);
}

TEST_CASE("adamw: decay exemption honored") {
  nn::Param<double> plain, exempt;
  plain.init(1, "w", false);
  exempt.init(1, "b", true);
  plain.value[0] = 1.0;
  exempt.value[0] = 1.0;
  // zero gradients isolate the decay path
  AdamW<double> opt({&plain, &exempt}, 0.1);
  opt.step(0.5);
  CHECK(plain.value[0] == doctest::Approx(1.0 - 0.5 * 0.1 * 1.0));
  CHECK(exempt.value[0] == doctest::Approx(1.0));
}
