#pragma once

#include <string>

#include "parafit/dataset.hpp"
#include "parafit/model.hpp"
#include "parafit/verify.hpp"

namespace parafit {

// Model serialization. The JSON layout is stable and key-sorted so that
// save -> load -> save is byte-identical: s_scale, the pole list as re/im
// pairs, a parameter-basis descriptor (rebuilt through the public builders
// on load), and the two coefficient matrices row-major with explicit shape.
std::string model_to_json(const BarycentricModel& m);
BarycentricModel model_from_json(const std::string& text);
void save_model(const BarycentricModel& m, const std::string& path);
BarycentricModel load_model(const std::string& path);

// Optional dataset wrapper: a small JSON file pointing at the canonical CSV.
struct DatasetManifest {
  std::string csv_path;
  int k = 0;
  std::string description;
  std::string f_unit;
};
DatasetManifest load_manifest(const std::string& path);

// Verification report with the externally fixed field names: max_re_zero,
// argmax_theta, min_abs_d, esp_margin_min, rms_error, pass (plus grid
// provenance for reproducibility).
std::string verify_report_json(const StabilityReport& rep, double esp_margin_min,
                               double rms, int grid_points);

// Whole-file text helpers; writes go through a temp file + rename.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace parafit
