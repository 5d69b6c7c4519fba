#pragma once

#include <string>
#include <vector>

#include "seldkd/io/csv.hpp"

namespace seldkd::train {

enum class TaskMode { kDoa2023, kDoaDistance2024 };

TaskMode parse_task_mode(const std::string& name);
std::string to_string(TaskMode mode);

// Per-clip training targets on the 100 ms label grid.
struct SeldTargets {
  int n_frames = 0;   // L
  int n_classes = 0;  // N
  TaskMode mode = TaskMode::kDoa2023;
  std::vector<double> activity;  // [L*N], {0,1} (fractional only after label mixing)
  std::vector<double> location;  // [L*N*3], xyz per (frame, class)
};

// Unit vector from azimuth/elevation in degrees.
void angles_to_vec(double azimuth_deg, double elevation_deg, double out[3]);

// Rasterizes label rows onto the grid. Simultaneous same-class events
// collapse to the nearest source (ties broken by lowest track index) since
// the output format holds one instance per class per frame. Distances are
// ingested in centimeters and converted to meters.
SeldTargets rasterize_labels(const std::vector<io::LabelRow>& rows, int n_frames, int n_classes,
                             TaskMode mode);

}  // namespace seldkd::train
