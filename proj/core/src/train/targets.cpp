#include "seldkd/train/targets.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace seldkd::train {

TaskMode parse_task_mode(const std::string& name) {
  if (name == "2023" || name == "doa_2023") return TaskMode::kDoa2023;
  if (name == "2024" || name == "doa_distance_2024") return TaskMode::kDoaDistance2024;
  throw std::invalid_argument("unknown task mode: " + name);
}

std::string to_string(TaskMode mode) {
  return mode == TaskMode::kDoa2023 ? "2023" : "2024";
}

void angles_to_vec(double azimuth_deg, double elevation_deg, double out[3]) {
  const double az = azimuth_deg * M_PI / 180.0;
  const double el = elevation_deg * M_PI / 180.0;
  out[0] = std::cos(el) * std::cos(az);
  out[1] = std::cos(el) * std::sin(az);
  out[2] = std::sin(el);
}

SeldTargets rasterize_labels(const std::vector<io::LabelRow>& rows, int n_frames, int n_classes,
                             TaskMode mode) {
  SeldTargets t;
  t.n_frames = n_frames;
  t.n_classes = n_classes;
  t.mode = mode;
  t.activity.assign(static_cast<std::size_t>(n_frames) * n_classes, 0.0);
  t.location.assign(static_cast<std::size_t>(n_frames) * n_classes * 3, 0.0);
  // Winning source per cell: smallest distance, ties to the lowest track.
  std::vector<double> best_dist(t.activity.size(), std::numeric_limits<double>::infinity());
  std::vector<int> best_track(t.activity.size(), std::numeric_limits<int>::max());
  for (const auto& r : rows) {
    if (r.frame < 0 || r.frame >= n_frames) continue;
    if (r.cls < 0 || r.cls >= n_classes)
      throw std::invalid_argument("label class index " + std::to_string(r.cls) + " outside 0.." +
                                  std::to_string(n_classes - 1));
    const std::size_t cell = static_cast<std::size_t>(r.frame) * n_classes + r.cls;
    const double dist_m = r.distance_cm / 100.0;
    if (dist_m <= 0.0) throw std::invalid_argument("label distance must be positive");
    const bool wins = dist_m < best_dist[cell] ||
                      (dist_m == best_dist[cell] && r.track < best_track[cell]);
    if (t.activity[cell] != 0.0 && !wins) continue;
    best_dist[cell] = dist_m;
    best_track[cell] = r.track;
    t.activity[cell] = 1.0;
    double u[3];
    angles_to_vec(r.azimuth_deg, r.elevation_deg, u);
    const double scale = mode == TaskMode::kDoaDistance2024 ? dist_m : 1.0;
    for (int c = 0; c < 3; ++c) t.location[cell * 3 + c] = u[c] * scale;
  }
  return t;
}

}  // namespace seldkd::train
