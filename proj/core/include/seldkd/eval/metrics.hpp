#pragma once

#include <cstdint>
#include <vector>

#include "seldkd/io/csv.hpp"
#include "seldkd/train/targets.hpp"

namespace seldkd::eval {

inline constexpr double kAngularThresholdDeg = 20.0;
inline constexpr double kRelDistThreshold = 1.0;
inline constexpr double kDetectionThreshold = 0.5;
inline constexpr int kSegmentFrames = 10;  // 1 s of 100 ms label frames

// Thresholded per-frame event grid used by both evaluators.
struct EventGrid {
  int n_frames = 0;
  int n_classes = 0;
  std::vector<std::uint8_t> activity;  // [L*N]
  std::vector<double> doa;             // [L*N*3], unit vectors where active
  std::vector<double> distance;        // [L*N] meters; empty for 2023 grids

  bool active(int l, int n) const { return activity[static_cast<std::size_t>(l) * n_classes + n]; }
};

double angular_error_deg(const double* u, const double* v);

struct Seld2023Report {
  double er = 0.0;
  double f = 0.0;
  double le_deg = 0.0;
  double lr = 0.0;
  double score = 0.0;
  bool le_defined = true;  // false when there were no matches / no reference
};

struct Seld2024Report {
  double f1 = 0.0;
  double doae_deg = 0.0;
  double rde = 0.0;
  double score = 0.0;
  bool doae_defined = true;
};

// Aggregate score formulas (angles in degrees).
double score_2023(double er, double f, double le_deg, double lr);
double score_2024(double f1, double doae_deg, double rde);

Seld2023Report evaluate_2023(const EventGrid& pred, const EventGrid& ref, bool macro = false);
Seld2024Report evaluate_2024(const EventGrid& pred, const EventGrid& ref, bool macro = false);

// Reliability data over the confidence range (0.5, 1].
struct CalibrationBin {
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  int count = 0;
  bool defined = false;
};

struct CalibrationReport {
  int n_bins = 10;
  std::vector<std::vector<CalibrationBin>> classes;  // [N][n_bins]
  std::int64_t total_predictions = 0;                // above-threshold predictions
};

// pred_probs / ref_activity: one [L*N] array per clip.
CalibrationReport calibration_bins(const std::vector<std::vector<double>>& pred_probs,
                                   const std::vector<std::vector<double>>& ref_activity,
                                   int n_classes, int n_bins = 10);

// Per-clip activity-masked SSL MSE values for histogramming.
std::vector<double> mse_distribution(const std::vector<std::vector<double>>& pred_coords,
                                     const std::vector<train::SeldTargets>& refs);

// Grid builders.
EventGrid grid_from_outputs(const std::vector<double>& p, const std::vector<double>& y, int l,
                            int n, train::TaskMode mode, double threshold = kDetectionThreshold);
EventGrid grid_from_rows(const std::vector<io::PredRow>& rows, int l, int n);

}  // namespace seldkd::eval
