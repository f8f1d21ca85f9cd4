#include "tinc/synthgen.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "tinc/rng.hpp"

namespace tinc {

namespace fs = std::filesystem;
using nlohmann::json;

void SynthConfig::validate() const {
  if (n_patients < 1) throw std::invalid_argument("synth: n_patients must be >= 1");
  if (visits_per_patient.first < 2 || visits_per_patient.first > visits_per_patient.second)
    throw std::invalid_argument("synth: invalid visits_per_patient range");
  if (visit_interval_days.first < 1 || visit_interval_days.first > visit_interval_days.second)
    throw std::invalid_argument("synth: invalid visit_interval_days range");
  if (converter_fraction < 0 || converter_fraction > 1)
    throw std::invalid_argument("synth: converter_fraction outside [0,1]");
  if (severity_rate.first < 0 || severity_rate.first > severity_rate.second)
    throw std::invalid_argument("synth: invalid severity_rate range");
  if (noise_level < 0) throw std::invalid_argument("synth: noise_level must be >= 0");
  for (int d : volume_shape)
    if (d < 4) throw std::invalid_argument("synth: volume_shape dims must be >= 4");
}

namespace {

Rng patient_rng(int patient_index, const SynthConfig& cfg, std::uint64_t stream) {
  return Rng(mix64(mix64(cfg.seed ^ stream) ^ std::uint64_t(patient_index)));
}

struct PatientPlan {
  std::vector<int> days;
  std::vector<double> severity;  // non-decreasing
  bool converter = false;
  double lesion_off_y = 0, lesion_off_x = 0;
  // per-patient appearance: stable identity cues that survive crop/flip/blur
  struct Band {
    double y = 0, amp = 0, w = 0;
  };
  std::vector<Band> bands;
  double base = 0.12, drift_amp = 2.0;
};

PatientPlan make_plan(int patient_index, const SynthConfig& cfg) {
  Rng rng = patient_rng(patient_index, cfg, 0x01);
  PatientPlan plan;
  const int n_visits = int(rng.uniform_int(cfg.visits_per_patient.first, cfg.visits_per_patient.second));
  plan.days.resize(n_visits);
  plan.days[0] = 0;
  for (int i = 1; i < n_visits; ++i)
    plan.days[i] = plan.days[i - 1] + int(rng.uniform_int(cfg.visit_interval_days.first, cfg.visit_interval_days.second));

  std::vector<double> cum(n_visits, 0.0);
  for (int i = 1; i < n_visits; ++i) {
    const double rate = rng.uniform(cfg.severity_rate.first, cfg.severity_rate.second);
    cum[i] = cum[i - 1] + rate * double(plan.days[i] - plan.days[i - 1]) / 30.0;
  }
  plan.converter = rng.bernoulli(cfg.converter_fraction);
  // rescale the raw trace so converters cross the threshold mid-study and
  // non-converters stay safely below it
  const double target =
      plan.converter ? rng.uniform(1.2, 1.8) * kSeverityThreshold : rng.uniform(0.3, 0.8) * kSeverityThreshold;
  const double last = cum.back();
  plan.severity.resize(n_visits);
  for (int i = 0; i < n_visits; ++i) plan.severity[i] = last > 0 ? cum[i] * target / last : 0.0;

  plan.lesion_off_y = rng.uniform(-0.08, 0.08);
  plan.lesion_off_x = rng.uniform(-0.08, 0.08);
  plan.base = rng.uniform(0.06, 0.2);
  plan.drift_amp = rng.uniform(1.0, 3.0);
  const int n_bands = int(rng.uniform_int(2, 4));
  plan.bands.resize(std::size_t(n_bands));
  for (int b = 0; b < n_bands; ++b) {
    auto& band = plan.bands[std::size_t(b)];
    // evenly spaced home positions with per-patient offsets keep bands distinct
    const double lo = 0.2 + 0.6 * double(b) / double(n_bands);
    band.y = rng.uniform(lo, lo + 0.4 / double(n_bands));
    band.amp = rng.uniform(0.12, 0.42);
    band.w = rng.uniform(0.03, 0.08);
  }
  return plan;
}

}  // namespace

std::vector<std::pair<int, double>> severity_trace(int patient_index, const SynthConfig& cfg) {
  cfg.validate();
  const PatientPlan plan = make_plan(patient_index, cfg);
  std::vector<std::pair<int, double>> out;
  out.reserve(plan.days.size());
  for (std::size_t i = 0; i < plan.days.size(); ++i) out.emplace_back(plan.days[i], plan.severity[i]);
  return out;
}

bool patient_converts(int patient_index, const SynthConfig& cfg) {
  const PatientPlan plan = make_plan(patient_index, cfg);
  return plan.converter && plan.severity.back() >= kSeverityThreshold;
}

LesionGeometry lesion_geometry(int patient_index, double severity, const SynthConfig& cfg) {
  const PatientPlan plan = make_plan(patient_index, cfg);
  const auto [s, h, w] = cfg.volume_shape;
  LesionGeometry g;
  g.cz = 0.5 * (s - 1);
  g.cy = (0.5 + plan.lesion_off_y) * (h - 1);
  g.cx = (0.5 + plan.lesion_off_x) * (w - 1);
  const double sev = std::min(severity, 1.6);
  g.radius = (0.06 + 0.08 * sev) * std::min(h, w);
  return g;
}

Volume render_visit(int patient_index, int visit_day, double severity, const SynthConfig& cfg) {
  const PatientPlan plan = make_plan(patient_index, cfg);
  const auto [s, h, w] = cfg.volume_shape;
  Volume v(s, h, w);

  // per-visit nuisance stream: acquisition-like variation that carries no
  // severity information (band drift, distractor blobs)
  Rng nuisance(mix64(mix64(cfg.seed ^ 0x03) ^ std::uint64_t(patient_index)) ^ mix64(std::uint64_t(visit_day) + 1));
  const double band_drift = nuisance.uniform(-0.06, 0.06) * (h - 1);

  // layered background: a per-patient set of bright bands across the height
  // axis (count, position, amplitude, and width are patient identity), shared
  // by all of a patient's visits up to the per-visit vertical drift
  for (int z = 0; z < s; ++z) {
    const double drift = plan.drift_amp * std::sin(2.0 * 3.14159265358979 * z / std::max(1, s));
    auto sl = v.slice(z);
    for (int y = 0; y < h; ++y) {
      double row = plan.base;
      for (const auto& band : plan.bands) {
        const double d = (y - (band.y * (h - 1) + band_drift + drift)) / (band.w * h);
        row += band.amp * std::exp(-0.5 * d * d);
      }
      for (int x = 0; x < w; ++x) sl(y, x) = row;
    }
  }

  // lesion: centered blob whose radius and intensity grow with severity
  const LesionGeometry g = lesion_geometry(patient_index, severity, cfg);
  const double sev = std::min(severity, 1.6);
  const double amp = 0.16 + 0.34 * sev / 1.6;
  const double rz = std::max(1.0, g.radius * double(s) / double(std::min(h, w)));
  for (int z = 0; z < s; ++z)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double dz = (z - g.cz) / rz, dy = (y - g.cy) / g.radius, dx = (x - g.cx) / g.radius;
        const double d2 = dz * dz + dy * dy + dx * dx;
        if (d2 < 16.0) v.at(z, y, x) += amp * std::exp(-0.5 * d2);
      }

  // distractor blobs: bright artifacts at fresh positions every visit, so
  // within-patient image change is not exclusively severity-driven
  for (int k = 0; k < 3; ++k) {
    const double dcz = nuisance.uniform(0.15, 0.85) * (s - 1);
    const double dcy = nuisance.uniform(0.1, 0.9) * (h - 1);
    const double dcx = nuisance.uniform(0.1, 0.9) * (w - 1);
    const double dr = nuisance.uniform(0.08, 0.14) * std::min(h, w);
    const double damp = nuisance.uniform(0.11, 0.18);
    const double drz = std::max(1.0, dr * double(s) / double(std::min(h, w)));
    for (int z = 0; z < s; ++z)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double dz = (z - dcz) / drz, dy = (y - dcy) / dr, dx = (x - dcx) / dr;
          const double d2 = dz * dz + dy * dy + dx * dx;
          if (d2 < 16.0) v.at(z, y, x) += damp * std::exp(-0.5 * d2);
        }
  }

  // per-visit acquisition gain: severity-independent, shared by every render
  // of the same (patient, day), within the jitter augmentation's range
  v.voxels *= nuisance.uniform(0.55, 1.5);

  // multiplicative speckle, independent per visit
  if (cfg.noise_level > 0) {
    Rng noise(mix64(mix64(cfg.seed ^ 0x02) ^ std::uint64_t(patient_index)) ^ mix64(std::uint64_t(visit_day) + 1));
    for (std::int64_t i = 0; i < v.size(); ++i)
      v.voxels[i] *= 1.0 + cfg.noise_level * noise.uniform(-1.0, 1.0);
  }
  for (std::int64_t i = 0; i < v.size(); ++i) v.voxels[i] = std::clamp(v.voxels[i], 0.0, 1.0);
  return v;
}

std::string generate_cohort(const SynthConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw std::runtime_error("synth: cannot create output directory " + out_dir);

  json eyes = json::array();
  for (int p = 0; p < cfg.n_patients; ++p) {
    const PatientPlan plan = make_plan(p, cfg);
    char pid[16];
    std::snprintf(pid, sizeof(pid), "p%04d", p);

    json visits = json::array();
    for (std::size_t i = 0; i < plan.days.size(); ++i) {
      const std::string file = std::string(pid) + "_d" + std::to_string(plan.days[i]) + ".raw";
      const Volume v = render_visit(p, plan.days[i], plan.severity[i], cfg);
      write_raw_volume((fs::path(out_dir) / file).string(), v);
      visits.push_back({{"visit_day", plan.days[i]},
                        {"volume_file", file},
                        {"shape", {cfg.volume_shape[0], cfg.volume_shape[1], cfg.volume_shape[2]}}});
    }

    const int study_months = month_of_day(plan.days.back()) + 1;
    json eye = {{"patient_id", pid},
                {"eye_id", "OD"},
                {"study_length_months", study_months},
                {"conversion_month", nullptr},
                {"visits", visits}};
    if (plan.converter) {
      for (std::size_t i = 0; i < plan.days.size(); ++i)
        if (plan.severity[i] >= kSeverityThreshold) {
          eye["conversion_month"] = month_of_day(plan.days[i]);
          break;
        }
    }
    eyes.push_back(eye);
  }

  json manifest = {{"eyes", eyes}};
  const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("synth: cannot write " + manifest_path);
  out << manifest.dump(2) << "\n";
  return manifest_path;
}

}  // namespace tinc
