#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "tinc/cohort.hpp"
#include "tinc/glcm.hpp"
#include "tinc/labels.hpp"
#include "tinc/preprocess.hpp"
#include "tinc/rng.hpp"

using namespace tinc;
namespace fs = std::filesystem;

namespace {

std::string write_manifest(const std::string& name, const std::string& body) {
  const fs::path dir = fs::temp_directory_path() / "tinc_voldata_tests";
  fs::create_directories(dir);
  const fs::path path = dir / name;
  std::ofstream out(path);
  out << body;
  return path.string();
}

Volume ramp_volume(int s, int h, int w, double lo, double hi) {
  Volume v(s, h, w);
  for (std::int64_t i = 0; i < v.size(); ++i)
    v.voxels[i] = lo + (hi - lo) * double(i) / double(std::max<std::int64_t>(1, v.size() - 1));
  return v;
}

// independent pair-count oracle over the quantized image
double glcm_oracle(const Eigen::MatrixXd& img, int levels, int di, int dj) {
  auto bin = [&](double v) { return std::min(levels - 1, std::max(0, int(std::floor(v * levels)))); };
  double total = 0, weighted = 0;
  for (int i = 0; i < img.rows(); ++i)
    for (int j = 0; j < img.cols(); ++j) {
      const int i2 = i + di, j2 = j + dj;
      if (i2 < 0 || i2 >= img.rows() || j2 < 0 || j2 >= img.cols()) continue;
      const int a = bin(img(i, j)), b = bin(img(i2, j2));
      total += 1;
      weighted += double((a - b) * (a - b));
    }
  return weighted / total;
}

}  // namespace

TEST_CASE("manifest: counts and basic fields") {
  const std::string path = write_manifest("ok.json", R"({"eyes": [
    {"patient_id": "p1", "eye_id": "OD", "study_length_months": 24, "conversion_month": 12,
     "visits": [{"visit_day": 0, "volume_file": "a.raw", "shape": [4, 8, 8]},
                {"visit_day": 65, "volume_file": "b.raw", "shape": [4, 8, 8]},
                {"visit_day": 200, "volume_file": "c.raw", "shape": [4, 8, 8]}]},
    {"patient_id": "p2", "eye_id": "OS", "study_length_months": 24, "conversion_month": null,
     "visits": [{"visit_day": 0, "volume_file": "d.raw", "shape": [4, 8, 8]},
                {"visit_day": 31, "volume_file": "e.raw", "shape": [4, 8, 8]},
                {"visit_day": 90, "volume_file": "f.raw", "shape": [4, 8, 8]}]}
  ]})");
  const Cohort c = load_manifest(path);
  CHECK(c.eyes.size() == 2);
  CHECK(c.total_visits() == 6);
  CHECK(c.eyes[0].conversion_month == 12);
  CHECK_FALSE(c.eyes[1].conversion_month.has_value());
  CHECK(c.eyes[0].visits[1].visit_month == 2);  // floor(65 / 30)
  CHECK(c.eyes[0].visits[1].volume_path == (fs::path(path).parent_path() / "b.raw").string());
}

TEST_CASE("manifest: duplicate (patient, eye) rejected") {
  const std::string path = write_manifest("dup.json", R"({"eyes": [
    {"patient_id": "p1", "eye_id": "OD", "study_length_months": 12, "conversion_month": null,
     "visits": [{"visit_day": 0, "volume_file": "a.raw", "shape": [2, 4, 4]}]},
    {"patient_id": "p1", "eye_id": "OD", "study_length_months": 12, "conversion_month": null,
     "visits": [{"visit_day": 0, "volume_file": "b.raw", "shape": [2, 4, 4]}]}
  ]})");
  CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("duplicate"), std::runtime_error);
}

TEST_CASE("manifest: non-increasing visit days rejected, eye named") {
  const std::string path = write_manifest("order.json", R"({"eyes": [
    {"patient_id": "p9", "eye_id": "OD", "study_length_months": 12, "conversion_month": null,
     "visits": [{"visit_day": 0, "volume_file": "a.raw", "shape": [2, 4, 4]},
                {"visit_day": 30, "volume_file": "b.raw", "shape": [2, 4, 4]},
                {"visit_day": 30, "volume_file": "c.raw", "shape": [2, 4, 4]}]}
  ]})");
  CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("p9"), std::runtime_error);
}

TEST_CASE("manifest: unknown keys rejected") {
  const std::string path = write_manifest("unknown.json", R"({"eyes": [], "extra": 1})");
  CHECK_THROWS_AS(load_manifest(path), std::runtime_error);
}

TEST_CASE("raw volume io roundtrip and length checks") {
  const fs::path dir = fs::temp_directory_path() / "tinc_voldata_tests";
  fs::create_directories(dir);
  const std::string path = (dir / "roundtrip.raw").string();
  const Volume v = ramp_volume(3, 4, 5, 0.0, 1.0);
  write_raw_volume(path, v);
  const Volume back = read_raw_volume(path, 3, 4, 5);
  for (std::int64_t i = 0; i < v.size(); ++i) CHECK(back.voxels[i] == doctest::Approx(v.voxels[i]).epsilon(1e-7));
  CHECK_THROWS_AS(read_raw_volume(path, 3, 4, 6), std::runtime_error);
  CHECK_THROWS_AS(read_raw_volume(path, 3, 4, 4), std::runtime_error);
}

TEST_CASE("normalize_volume: midpoint, constant, identity, range") {
  Volume v(1, 1, 3);
  v.voxels << 10, 15, 20;
  const Volume n = normalize_volume(v);
  CHECK(n.voxels[1] == doctest::Approx(0.5));

  Volume c(2, 2, 2);
  c.voxels.setConstant(7.0);
  CHECK(normalize_volume(c).voxels.isZero());

  const Volume unit = ramp_volume(2, 3, 3, 0.0, 1.0);
  const Volume same = normalize_volume(unit);
  for (std::int64_t i = 0; i < unit.size(); ++i) CHECK(same.voxels[i] == doctest::Approx(unit.voxels[i]));

  Rng rng(11);
  Volume r(4, 5, 5);
  for (std::int64_t i = 0; i < r.size(); ++i) r.voxels[i] = rng.uniform(-3.0, 9.0);
  const Volume nr = normalize_volume(r);
  CHECK(nr.voxels.minCoeff() == doctest::Approx(0.0));
  CHECK(nr.voxels.maxCoeff() == doctest::Approx(1.0));
}

TEST_CASE("central_slab: centering, identity, tie-break, idempotence") {
  Volume big(128, 2, 2);
  for (int z = 0; z < 128; ++z)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) big.at(z, y, x) = z;
  const Volume slab = central_slab(big, 32);
  CHECK(slab.s == 32);
  CHECK(slab.at(0, 0, 0) == doctest::Approx(48));
  CHECK(slab.at(31, 0, 0) == doctest::Approx(79));

  const Volume same = central_slab(big, 128);
  CHECK(same.voxels.isApprox(big.voxels));

  Volume five(5, 1, 1);
  five.voxels << 0, 1, 2, 3, 4;
  const Volume two = central_slab(five, 2);
  CHECK(two.at(0, 0, 0) == doctest::Approx(1));
  CHECK(two.at(1, 0, 0) == doctest::Approx(2));

  const Volume again = central_slab(slab, 32);
  CHECK(again.voxels.isApprox(slab.voxels));

  CHECK_THROWS_AS(central_slab(five, 6), std::invalid_argument);
}

namespace {

EyeSeries eye_at_months(std::optional<int> conversion, int max_month) {
  EyeSeries eye;
  for (int m = 0; m <= max_month; ++m) {
    VisitRecord r;
    r.patient_id = "p";
    r.eye_id = "OD";
    r.visit_day = m * 30;
    r.visit_month = m;
    eye.visits.push_back(r);
  }
  eye.conversion_month = conversion;
  eye.study_length_months = max_month;
  return eye;
}

}  // namespace

TEST_CASE("assign_labels: exhaustive over c in {none, 0..24}, t in {0..24}") {
  const int horizon = 6;
  for (int ci = -1; ci <= 24; ++ci) {
    const std::optional<int> c = ci < 0 ? std::nullopt : std::optional<int>(ci);
    const EyeSeries eye = eye_at_months(c, 24);
    const auto labels = assign_labels(eye, horizon);
    REQUIRE(labels.size() == 25);
    for (int t = 0; t <= 24; ++t) {
      Label expect;
      if (!c)
        expect = Label::negative;
      else if (*c - t > horizon)
        expect = Label::negative;
      else if (*c - t >= 0)
        expect = Label::positive;
      else
        expect = Label::excluded;
      CHECK(labels[std::size_t(t)].label == expect);
      CHECK(labels[std::size_t(t)].visit.visit_month == t);
    }
  }
}

TEST_CASE("assign_labels: spot values c=12") {
  const EyeSeries eye = eye_at_months(12, 13);
  const auto labels = assign_labels(eye, 6);
  CHECK(labels[8].label == Label::positive);   // c - t = 4
  CHECK(labels[3].label == Label::negative);   // c - t = 9
  CHECK(labels[13].label == Label::excluded);  // c - t = -1
}

TEST_CASE("glcm_contrast: constant, checkerboard, oracle, shift invariance") {
  CHECK(glcm_contrast(Eigen::MatrixXd::Constant(5, 5, 0.37), 8, 0, 1) == doctest::Approx(0.0));

  Eigen::MatrixXd checker(2, 2);
  checker << 0, 1, 1, 0;
  CHECK(glcm_contrast(checker, 2, 0, 1) == doctest::Approx(1.0));

  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 3 + int(rng.uniform_int(0, 8)), w = 3 + int(rng.uniform_int(0, 8));
    Eigen::MatrixXd img(h, w);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) img(i, j) = rng.uniform();
    const int levels = 2 + int(rng.uniform_int(0, 14));
    const int di = int(rng.uniform_int(0, 1)), dj = di == 0 ? 1 : int(rng.uniform_int(0, 1));
    CHECK(glcm_contrast(img, levels, di, dj) == doctest::Approx(glcm_oracle(img, levels, di, dj)).epsilon(1e-9));
  }

  // constant offset that moves no value across a bin edge
  Eigen::MatrixXd base(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) base(i, j) = (i * 4 + j) / 16.0 + 0.01;
  const double before = glcm_contrast(base, 4, 1, 0);
  const double after = glcm_contrast(base.array() + 0.02, 4, 1, 0);
  CHECK(before == doctest::Approx(after).epsilon(1e-12));
}

TEST_CASE("glcm_contrast: offset outside image is a geometry error") {
  CHECK_THROWS_AS(glcm_contrast(Eigen::MatrixXd::Zero(3, 3), 4, 0, 3), std::invalid_argument);
  CHECK_THROWS_AS(glcm_contrast(Eigen::MatrixXd::Zero(3, 3), 4, 3, 0), std::invalid_argument);
}
