#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "tinc/labels.hpp"
#include "tinc/pairs.hpp"
#include "tinc/synthgen.hpp"

using namespace tinc;
namespace fs = std::filesystem;

namespace {

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.n_patients = 12;
  cfg.volume_shape = {8, 24, 24};
  cfg.seed = 5;
  return cfg;
}

std::string fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("tinc_synth_" + tag);
  fs::remove_all(p);
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// mean over the rendered lesion support (d2 < 16 in geometry coordinates)
double lesion_mean(const Volume& v, const LesionGeometry& g, const SynthConfig& cfg) {
  const auto [s, h, w] = cfg.volume_shape;
  const double rz = std::max(1.0, g.radius * double(s) / double(std::min(h, w)));
  double sum = 0;
  std::int64_t count = 0;
  for (int z = 0; z < s; ++z)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double dz = (z - g.cz) / rz, dy = (y - g.cy) / g.radius, dx = (x - g.cx) / g.radius;
        if (dz * dz + dy * dy + dx * dx < 16.0) {
          sum += v.at(z, y, x);
          ++count;
        }
      }
  REQUIRE(count > 0);
  return sum / double(count);
}

}  // namespace

TEST_CASE("generate_cohort is byte-identical across runs") {
  const SynthConfig cfg = small_config();
  const std::string a = fresh_dir("det_a"), b = fresh_dir("det_b");
  const std::string ma = generate_cohort(cfg, a);
  const std::string mb = generate_cohort(cfg, b);
  CHECK(slurp(ma) == slurp(mb));

  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const fs::path other = fs::path(b) / entry.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(slurp(entry.path()) == slurp(other));
    ++files;
  }
  CHECK(files > std::size_t(cfg.n_patients));  // manifest plus >=2 volumes per patient
}

TEST_CASE("severity traces are non-decreasing and start at zero") {
  const SynthConfig cfg = small_config();
  for (int p = 0; p < cfg.n_patients; ++p) {
    const auto trace = severity_trace(p, cfg);
    REQUIRE(trace.size() >= 2);
    CHECK(trace.front().first == 0);
    CHECK(trace.front().second == doctest::Approx(0.0));
    for (std::size_t i = 1; i < trace.size(); ++i) {
      CHECK(trace[i].first > trace[i - 1].first);
      CHECK(trace[i].second >= trace[i - 1].second);
    }
  }
}

TEST_CASE("converter_fraction 0 yields no conversions") {
  SynthConfig cfg = small_config();
  cfg.converter_fraction = 0.0;
  const std::string out = fresh_dir("nonconv");
  const Cohort cohort = load_manifest(generate_cohort(cfg, out));
  REQUIRE(cohort.eyes.size() == std::size_t(cfg.n_patients));
  for (int p = 0; p < cfg.n_patients; ++p) CHECK_FALSE(patient_converts(p, cfg));
  for (const auto& eye : cohort.eyes) CHECK_FALSE(eye.conversion_month.has_value());
}

TEST_CASE("manifest conversion_month matches the first threshold crossing") {
  SynthConfig cfg = small_config();
  cfg.n_patients = 40;
  cfg.converter_fraction = 0.5;
  const std::string out = fresh_dir("conv");
  const Cohort cohort = load_manifest(generate_cohort(cfg, out));
  int converters = 0;
  for (int p = 0; p < cfg.n_patients; ++p) {
    const auto& eye = cohort.eyes[std::size_t(p)];
    CHECK(eye.conversion_month.has_value() == patient_converts(p, cfg));
    if (!eye.conversion_month) continue;
    ++converters;
    const auto trace = severity_trace(p, cfg);
    int expect = -1;
    for (const auto& [day, sev] : trace)
      if (sev >= kSeverityThreshold) {
        expect = month_of_day(day);
        break;
      }
    REQUIRE(expect >= 0);
    CHECK(*eye.conversion_month == expect);
    // severity below threshold strictly before the recorded month
    for (const auto& [day, sev] : trace)
      if (month_of_day(day) < expect) CHECK(sev < kSeverityThreshold);
  }
  CHECK(converters > 5);
}

TEST_CASE("lesion signal grows voxelwise with severity in the noise-free render") {
  SynthConfig cfg = small_config();
  cfg.noise_level = 0.0;
  const Volume lo = render_visit(0, 0, 0.2, cfg);
  const Volume hi = render_visit(0, 0, 1.4, cfg);
  CHECK((hi.voxels - lo.voxels).minCoeff() >= -1e-12);
  const LesionGeometry g = lesion_geometry(0, 0.2, cfg);
  CHECK(lesion_mean(hi, g, cfg) > lesion_mean(lo, g, cfg) + 0.01);
}

TEST_CASE("lesion-region mean grows with severity under a fixed acquisition") {
  const SynthConfig cfg = small_config();
  for (int p = 0; p < cfg.n_patients; ++p) {
    const auto trace = severity_trace(p, cfg);
    const LesionGeometry g = lesion_geometry(p, trace.front().second, cfg);
    // rendering every trace severity at one visit day holds the per-visit
    // acquisition nuisance (drift, distractors, gain, contrast curve, speckle)
    // fixed, isolating the severity contribution
    const int day = trace.back().first;
    double prev = -1.0, first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
      const double m = lesion_mean(render_visit(p, day, trace[i].second, cfg), g, cfg);
      CHECK(m >= prev - 1e-9);
      prev = std::max(prev, m);
      if (i == 0) first = m;
      last = m;
    }
    if (trace.back().second > trace.front().second + 0.2) CHECK(last > first + 0.005);
  }
}

TEST_CASE("most patients provide at least one eligible visit pair") {
  const SynthConfig cfg = small_config();
  const std::string out = fresh_dir("pairs");
  const Cohort cohort = load_manifest(generate_cohort(cfg, out));
  SamplerConfig sampler;
  int covered = 0;
  for (const auto& eye : cohort.eyes)
    if (!eligible_pairs(eye, sampler).empty()) ++covered;
  CHECK(covered >= int(0.8 * cfg.n_patients));
}

TEST_CASE("labels derived from a generated cohort follow the horizon rule") {
  SynthConfig cfg = small_config();
  cfg.n_patients = 30;
  cfg.converter_fraction = 0.5;
  const std::string out = fresh_dir("labels");
  const Cohort cohort = load_manifest(generate_cohort(cfg, out));
  int positives = 0, excluded = 0;
  for (const auto& eye : cohort.eyes) {
    const auto labels = assign_labels(eye, 6);
    REQUIRE(labels.size() == eye.visits.size());
    for (const auto& scan : labels) {
      if (!eye.conversion_month) {
        CHECK(scan.label == Label::negative);
        continue;
      }
      const int gap = *eye.conversion_month - scan.visit.visit_month;
      if (gap < 0)
        CHECK(scan.label == Label::excluded);
      else if (gap <= 6)
        CHECK(scan.label == Label::positive);
      else
        CHECK(scan.label == Label::negative);
      positives += scan.label == Label::positive;
      excluded += scan.label == Label::excluded;
    }
  }
  CHECK(positives > 0);
  CHECK(excluded > 0);
}

TEST_CASE("volumes land in [0,1] and differ between visits") {
  const SynthConfig cfg = small_config();
  const std::string out = fresh_dir("range");
  const Cohort cohort = load_manifest(generate_cohort(cfg, out));
  const auto& eye = cohort.eyes.front();
  const Volume a = read_visit_volume(eye.visits[0]);
  const Volume b = read_visit_volume(eye.visits[1]);
  CHECK(a.voxels.minCoeff() >= 0.0);
  CHECK(a.voxels.maxCoeff() <= 1.0);
  CHECK((a.voxels - b.voxels).cwiseAbs().maxCoeff() > 1e-4);
}

TEST_CASE("config validation") {
  SynthConfig cfg = small_config();
  cfg.n_patients = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.visits_per_patient = {1, 4};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.converter_fraction = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.volume_shape = {2, 24, 24};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
