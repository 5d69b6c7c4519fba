#pragma once

#include <optional>
#include <string>
#include <vector>

namespace seldkd::io {

// Label rows at 100 ms frame resolution.
struct LabelRow {
  int frame = 0;
  int cls = 0;
  int track = 0;
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  double distance_cm = 0.0;
};

std::vector<LabelRow> read_label_csv(const std::string& path);
void write_label_csv(const std::string& path, const std::vector<LabelRow>& rows);

// Mouth keypoint rows at 10 fps, normalized image coordinates.
struct KeypointRow {
  int frame = 0;
  int speaker = 0;
  double u = 0.0;
  double v = 0.0;
};

std::vector<KeypointRow> read_keypoint_csv(const std::string& path);
void write_keypoint_csv(const std::string& path, const std::vector<KeypointRow>& rows);

// Prediction / reference rows for the evaluators. Optional columns are
// declared by the header line.
struct PredRow {
  int frame = 0;
  int cls = 0;
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  std::optional<double> distance_m;
  std::optional<double> confidence;
};

std::vector<PredRow> read_pred_csv(const std::string& path);
void write_pred_csv(const std::string& path, const std::vector<PredRow>& rows, bool with_distance,
                    bool with_confidence);

}  // namespace seldkd::io
