#include "tinc/cohort.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <utility>

#include "json.hpp"

namespace tinc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("manifest: " + msg); }

void require_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) fail("unknown key '" + it.key() + "' in " + where);
}

}  // namespace

Cohort load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    fail("parse error in " + path + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("eyes") || !doc["eyes"].is_array())
    fail("top-level object with an 'eyes' array expected in " + path);
  require_keys(doc, {"eyes"}, "manifest root");

  const fs::path base = fs::path(path).parent_path();
  Cohort cohort;
  cohort.manifest_path = path;
  std::set<std::pair<std::string, std::string>> seen;

  for (const auto& je : doc["eyes"]) {
    require_keys(je, {"patient_id", "eye_id", "study_length_months", "conversion_month", "visits"}, "eye entry");
    for (const char* k : {"patient_id", "eye_id", "study_length_months", "visits"})
      if (!je.contains(k)) fail(std::string("eye entry missing '") + k + "'");

    EyeSeries eye;
    const std::string pid = je["patient_id"].get<std::string>();
    const std::string eid = je["eye_id"].get<std::string>();
    if (!seen.insert({pid, eid}).second) fail("duplicate (patient_id, eye_id) = (" + pid + ", " + eid + ")");

    eye.study_length_months = je["study_length_months"].get<int>();
    if (je.contains("conversion_month") && !je["conversion_month"].is_null()) {
      const int c = je["conversion_month"].get<int>();
      if (c < 0 || c > eye.study_length_months)
        fail("conversion_month " + std::to_string(c) + " outside [0, study_length] for eye (" + pid + ", " + eid + ")");
      eye.conversion_month = c;
    }

    if (je["visits"].empty()) fail("eye (" + pid + ", " + eid + ") has no visits");
    int prev_day = -1;
    for (const auto& jv : je["visits"]) {
      require_keys(jv, {"visit_day", "volume_file", "shape"}, "visit entry");
      for (const char* k : {"visit_day", "volume_file", "shape"})
        if (!jv.contains(k)) fail(std::string("visit entry missing '") + k + "'");
      VisitRecord r;
      r.patient_id = pid;
      r.eye_id = eid;
      r.visit_day = jv["visit_day"].get<int>();
      if (r.visit_day < 0) fail("negative visit_day in eye (" + pid + ", " + eid + ")");
      if (r.visit_day <= prev_day)
        fail("visit days not strictly increasing in eye (" + pid + ", " + eid + ") at day " +
             std::to_string(r.visit_day));
      prev_day = r.visit_day;
      r.visit_month = month_of_day(r.visit_day);
      r.volume_path = (base / jv["volume_file"].get<std::string>()).string();
      const auto sh = jv["shape"];
      if (!sh.is_array() || sh.size() != 3) fail("visit shape must be [S,H,W]");
      for (int i = 0; i < 3; ++i) {
        r.shape[i] = sh[i].get<int>();
        if (r.shape[i] <= 0) fail("non-positive shape in eye (" + pid + ", " + eid + ")");
      }
      eye.visits.push_back(std::move(r));
    }
    cohort.eyes.push_back(std::move(eye));
  }
  return cohort;
}

Volume read_raw_volume(const std::string& path, int s, int h, int w) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("volume: cannot open " + path);
  const std::int64_t n = std::int64_t(s) * h * w;
  std::vector<float> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), n * sizeof(float));
  if (in.gcount() != std::streamsize(n * sizeof(float)))
    throw std::runtime_error("volume: " + path + " shorter than declared shape " + shape_str(s, h, w));
  char extra;
  if (in.read(&extra, 1))
    throw std::runtime_error("volume: " + path + " longer than declared shape " + shape_str(s, h, w));
  Volume v(s, h, w);
  for (std::int64_t i = 0; i < n; ++i) v.voxels[i] = buf[i];
  return v;
}

void write_raw_volume(const std::string& path, const Volume& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("volume: cannot write " + path);
  std::vector<float> buf(v.size());
  for (std::int64_t i = 0; i < v.size(); ++i) buf[i] = float(v.voxels[i]);
  out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
  if (!out) throw std::runtime_error("volume: write failed for " + path);
}

}  // namespace tinc
