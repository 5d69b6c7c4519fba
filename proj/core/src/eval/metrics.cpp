#include "seldkd/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace seldkd::eval {

double angular_error_deg(const double* u, const double* v) {
  const double nu = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
  const double nv = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (nu < 1e-12 || nv < 1e-12)
    throw std::invalid_argument("angular_error_deg: zero-norm direction vector");
  double dot = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]) / (nu * nv);
  dot = std::min(1.0, std::max(-1.0, dot));
  return std::acos(dot) * 180.0 / M_PI;
}

double score_2023(double er, double f, double le_deg, double lr) {
  return 0.25 * (er + (1.0 - f) + le_deg / 180.0 + (1.0 - lr));
}

double score_2024(double f1, double doae_deg, double rde) {
  return (1.0 / 3.0) * ((1.0 - f1) + doae_deg / 180.0 + rde);
}

namespace {

struct Counts {
  std::int64_t tp = 0, fp = 0, fn = 0;
  double f_micro() const {
    const double denom = static_cast<double>(2 * tp + fp + fn);
    return denom == 0.0 ? 1.0 : 2.0 * static_cast<double>(tp) / denom;
  }
};

void check_aligned(const EventGrid& pred, const EventGrid& ref) {
  if (pred.n_frames != ref.n_frames || pred.n_classes != ref.n_classes)
    throw std::invalid_argument("evaluate: prediction and reference grids are not aligned");
}

double macro_average(const std::vector<Counts>& per_class,
                     double (*reduce)(const Counts&)) {
  double sum = 0.0;
  int used = 0;
  for (const auto& c : per_class) {
    if (c.tp + c.fp + c.fn == 0) continue;
    sum += reduce(c);
    ++used;
  }
  return used == 0 ? 1.0 : sum / used;
}

}  // namespace

Seld2023Report evaluate_2023(const EventGrid& pred, const EventGrid& ref, bool macro) {
  check_aligned(pred, ref);
  const int l_frames = pred.n_frames;
  const int n_cls = pred.n_classes;

  Counts micro;
  std::vector<Counts> per_class(n_cls);
  std::int64_t matches = 0, ref_actives = 0;
  double ae_sum = 0.0;
  // Frame-level FN/FP accumulated per 1 s segment for the error rate.
  const int n_segments = (l_frames + kSegmentFrames - 1) / kSegmentFrames;
  std::vector<std::int64_t> seg_fn(n_segments, 0), seg_fp(n_segments, 0);

  for (int l = 0; l < l_frames; ++l) {
    const int seg = l / kSegmentFrames;
    for (int n = 0; n < n_cls; ++n) {
      const std::size_t cell = static_cast<std::size_t>(l) * n_cls + n;
      const bool pa = pred.activity[cell];
      const bool ra = ref.activity[cell];
      if (ra) ++ref_actives;
      if (pa && ra) {
        ++matches;
        const double ae = angular_error_deg(&pred.doa[cell * 3], &ref.doa[cell * 3]);
        ae_sum += ae;
        if (ae <= kAngularThresholdDeg) {
          ++micro.tp;
          ++per_class[n].tp;
        } else {
          ++micro.fp;
          ++micro.fn;
          ++per_class[n].fp;
          ++per_class[n].fn;
          ++seg_fp[seg];
          ++seg_fn[seg];
        }
      } else if (pa) {
        ++micro.fp;
        ++per_class[n].fp;
        ++seg_fp[seg];
      } else if (ra) {
        ++micro.fn;
        ++per_class[n].fn;
        ++seg_fn[seg];
      }
    }
  }

  Seld2023Report report;
  report.le_defined = matches > 0;
  report.le_deg = matches > 0 ? ae_sum / static_cast<double>(matches) : 180.0;
  report.lr = ref_actives > 0 ? static_cast<double>(matches) / static_cast<double>(ref_actives) : 0.0;
  report.f = macro ? macro_average(per_class, [](const Counts& c) { return c.f_micro(); })
                   : micro.f_micro();
  std::int64_t err = 0;
  for (int s = 0; s < n_segments; ++s) err += std::max(seg_fn[s], seg_fp[s]);  // S + D + I
  report.er = ref_actives > 0 ? static_cast<double>(err) / static_cast<double>(ref_actives)
                              : static_cast<double>(err);
  report.score = score_2023(report.er, report.f, report.le_deg, report.lr);
  return report;
}

Seld2024Report evaluate_2024(const EventGrid& pred, const EventGrid& ref, bool macro) {
  check_aligned(pred, ref);
  if (pred.distance.empty() || ref.distance.empty())
    throw std::invalid_argument("evaluate_2024: distance estimates are required");
  const int l_frames = pred.n_frames;
  const int n_cls = pred.n_classes;

  Counts micro;
  std::vector<Counts> per_class(n_cls);
  std::int64_t matches = 0;
  double ae_sum = 0.0, rde_sum = 0.0;

  for (int l = 0; l < l_frames; ++l)
    for (int n = 0; n < n_cls; ++n) {
      const std::size_t cell = static_cast<std::size_t>(l) * n_cls + n;
      const bool pa = pred.activity[cell];
      const bool ra = ref.activity[cell];
      if (pa && ra) {
        if (ref.distance[cell] <= 0.0)
          throw std::invalid_argument("evaluate_2024: reference distance must be positive");
        ++matches;
        const double ae = angular_error_deg(&pred.doa[cell * 3], &ref.doa[cell * 3]);
        const double rel = std::abs(pred.distance[cell] - ref.distance[cell]) / ref.distance[cell];
        ae_sum += ae;
        rde_sum += rel;
        if (ae <= kAngularThresholdDeg && rel <= kRelDistThreshold) {
          ++micro.tp;
          ++per_class[n].tp;
        } else {
          ++micro.fp;
          ++micro.fn;
          ++per_class[n].fp;
          ++per_class[n].fn;
        }
      } else if (pa) {
        ++micro.fp;
        ++per_class[n].fp;
      } else if (ra) {
        ++micro.fn;
        ++per_class[n].fn;
      }
    }

  Seld2024Report report;
  report.doae_defined = matches > 0;
  report.doae_deg = matches > 0 ? ae_sum / static_cast<double>(matches) : 180.0;
  report.rde = matches > 0 ? rde_sum / static_cast<double>(matches) : 1.0;
  report.f1 = macro ? macro_average(per_class, [](const Counts& c) { return c.f_micro(); })
                    : micro.f_micro();
  report.score = score_2024(report.f1, report.doae_deg, report.rde);
  return report;
}

CalibrationReport calibration_bins(const std::vector<std::vector<double>>& pred_probs,
                                   const std::vector<std::vector<double>>& ref_activity,
                                   int n_classes, int n_bins) {
  if (pred_probs.size() != ref_activity.size())
    throw std::invalid_argument("calibration_bins: clip-count mismatch");
  CalibrationReport report;
  report.n_bins = n_bins;
  report.classes.assign(n_classes, std::vector<CalibrationBin>(n_bins));
  std::vector<std::vector<double>> conf_sum(n_classes, std::vector<double>(n_bins, 0.0));
  std::vector<std::vector<std::int64_t>> correct(n_classes, std::vector<std::int64_t>(n_bins, 0));
  std::vector<std::vector<std::int64_t>> count(n_classes, std::vector<std::int64_t>(n_bins, 0));

  const double bin_width = (1.0 - kDetectionThreshold) / n_bins;
  for (std::size_t clip = 0; clip < pred_probs.size(); ++clip) {
    const auto& probs = pred_probs[clip];
    const auto& refs = ref_activity[clip];
    if (probs.size() != refs.size())
      throw std::invalid_argument("calibration_bins: grid size mismatch in clip");
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const double p = probs[i];
      if (p <= kDetectionThreshold) continue;  // below-threshold confidences excluded
      const int cls = static_cast<int>(i % n_classes);
      int bin = static_cast<int>((p - kDetectionThreshold) / bin_width);
      bin = std::min(bin, n_bins - 1);
      conf_sum[cls][bin] += p;
      count[cls][bin] += 1;
      if (refs[i] > 0.5) correct[cls][bin] += 1;
      ++report.total_predictions;
    }
  }
  for (int c = 0; c < n_classes; ++c)
    for (int b = 0; b < n_bins; ++b) {
      auto& bin = report.classes[c][b];
      bin.count = static_cast<int>(count[c][b]);
      bin.defined = bin.count > 0;
      if (bin.defined) {
        bin.mean_confidence = conf_sum[c][b] / bin.count;
        bin.accuracy = static_cast<double>(correct[c][b]) / bin.count;
      }
    }
  return report;
}

std::vector<double> mse_distribution(const std::vector<std::vector<double>>& pred_coords,
                                     const std::vector<train::SeldTargets>& refs) {
  if (pred_coords.size() != refs.size())
    throw std::invalid_argument("mse_distribution: clip-count mismatch");
  std::vector<double> out;
  out.reserve(refs.size());
  for (std::size_t clip = 0; clip < refs.size(); ++clip) {
    const auto& y = pred_coords[clip];
    const auto& t = refs[clip];
    const std::size_t cells = static_cast<std::size_t>(t.n_frames) * t.n_classes;
    if (y.size() != cells * 3)
      throw std::invalid_argument("mse_distribution: coordinate size mismatch in clip");
    double sum = 0.0;
    for (std::size_t cell = 0; cell < cells; ++cell) {
      const double p = t.activity[cell];
      for (int c = 0; c < 3; ++c) {
        const double d = (y[cell * 3 + c] - t.location[cell * 3 + c]) * p;
        sum += d * d;
      }
    }
    out.push_back(sum / static_cast<double>(cells));
  }
  return out;
}

EventGrid grid_from_outputs(const std::vector<double>& p, const std::vector<double>& y, int l,
                            int n, train::TaskMode mode, double threshold) {
  const std::size_t cells = static_cast<std::size_t>(l) * n;
  if (p.size() != cells || y.size() != cells * 3)
    throw std::invalid_argument("grid_from_outputs: array sizes do not match the grid");
  EventGrid grid;
  grid.n_frames = l;
  grid.n_classes = n;
  grid.activity.assign(cells, 0);
  grid.doa.assign(cells * 3, 0.0);
  if (mode == train::TaskMode::kDoaDistance2024) grid.distance.assign(cells, 0.0);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    if (p[cell] <= threshold) continue;
    grid.activity[cell] = 1;
    const double* v = &y[cell * 3];
    const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (norm < 1e-12) {
      grid.doa[cell * 3] = 1.0;  // arbitrary fixed direction for a degenerate output
      if (mode == train::TaskMode::kDoaDistance2024) grid.distance[cell] = 1e-12;
      continue;
    }
    for (int c = 0; c < 3; ++c) grid.doa[cell * 3 + c] = v[c] / norm;
    if (mode == train::TaskMode::kDoaDistance2024) grid.distance[cell] = norm;
  }
  return grid;
}

EventGrid grid_from_rows(const std::vector<io::PredRow>& rows, int l, int n) {
  EventGrid grid;
  grid.n_frames = l;
  grid.n_classes = n;
  const std::size_t cells = static_cast<std::size_t>(l) * n;
  grid.activity.assign(cells, 0);
  grid.doa.assign(cells * 3, 0.0);
  bool any_distance = false;
  for (const auto& r : rows)
    if (r.distance_m) any_distance = true;
  if (any_distance) grid.distance.assign(cells, 0.0);
  for (const auto& r : rows) {
    if (r.frame < 0 || r.frame >= l || r.cls < 0 || r.cls >= n)
      throw std::invalid_argument("grid_from_rows: row outside the grid");
    if (r.confidence && *r.confidence <= kDetectionThreshold) continue;
    const std::size_t cell = static_cast<std::size_t>(r.frame) * n + r.cls;
    grid.activity[cell] = 1;
    double u[3];
    train::angles_to_vec(r.azimuth_deg, r.elevation_deg, u);
    for (int c = 0; c < 3; ++c) grid.doa[cell * 3 + c] = u[c];
    if (any_distance) grid.distance[cell] = r.distance_m ? *r.distance_m : 0.0;
  }
  return grid;
}

}  // namespace seldkd::eval
