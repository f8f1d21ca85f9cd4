#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tinc/cohort.hpp"

namespace tinc {

struct SynthConfig {
  int n_patients = 50;
  std::pair<int, int> visits_per_patient{8, 12};
  std::pair<int, int> visit_interval_days{30, 90};
  std::array<int, 3> volume_shape{16, 64, 64};
  double converter_fraction = 0.25;
  // latent severity gain per 30 days, before per-patient rescaling
  std::pair<double, double> severity_rate{0.05, 0.25};
  double noise_level = 0.15;
  std::uint64_t seed = 0;

  void validate() const;
};

// Conversion threshold of the latent severity process.
constexpr double kSeverityThreshold = 1.0;

// The exact latent (day, severity) trace used for one patient; severities are
// non-decreasing by construction.
std::vector<std::pair<int, double>> severity_trace(int patient_index, const SynthConfig& cfg);

// Whether a given patient index converts under this config.
bool patient_converts(int patient_index, const SynthConfig& cfg);

// Renders one visit's volume (deterministic in all arguments).
Volume render_visit(int patient_index, int visit_day, double severity, const SynthConfig& cfg);

// Writes the manifest and all raw volumes under out_dir; returns the manifest
// path. Byte-identical across runs with the same config.
std::string generate_cohort(const SynthConfig& cfg, const std::string& out_dir);

// Center and radius of the lesion region for a given severity, exposed for
// measurement oracles.
struct LesionGeometry {
  double cz, cy, cx, radius;
};
LesionGeometry lesion_geometry(int patient_index, double severity, const SynthConfig& cfg);

}  // namespace tinc
