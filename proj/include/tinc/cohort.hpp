#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tinc/volume.hpp"

namespace tinc {

// Days are counted from the eye's baseline visit; months are derived as
// floor(day / 30).
inline int month_of_day(int day) { return day / 30; }

struct VisitRecord {
  std::string patient_id;
  std::string eye_id;
  int visit_day = 0;
  int visit_month = 0;
  std::string volume_path;       // resolved, loadable path
  std::array<int, 3> shape{};    // (S, H, W) as declared in the manifest
};

struct EyeSeries {
  std::vector<VisitRecord> visits;          // strictly increasing visit_day
  std::optional<int> conversion_month;
  int study_length_months = 0;

  const std::string& patient_id() const { return visits.front().patient_id; }
  const std::string& eye_id() const { return visits.front().eye_id; }
};

struct Cohort {
  std::vector<EyeSeries> eyes;
  std::string manifest_path;

  std::size_t total_visits() const {
    std::size_t n = 0;
    for (const auto& e : eyes) n += e.visits.size();
    return n;
  }
};

// Parses and validates a manifest file. Volume files are referenced, not
// loaded; paths are resolved relative to the manifest's directory.
Cohort load_manifest(const std::string& path);

// Raw little-endian float32, row-major (S,H,W); length must equal S*H*W.
Volume read_raw_volume(const std::string& path, int s, int h, int w);
void write_raw_volume(const std::string& path, const Volume& v);

inline Volume read_visit_volume(const VisitRecord& r) {
  return read_raw_volume(r.volume_path, r.shape[0], r.shape[1], r.shape[2]);
}

}  // namespace tinc
