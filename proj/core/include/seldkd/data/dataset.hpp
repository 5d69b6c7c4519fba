#pragma once

#include <optional>
#include <string>
#include <vector>

#include "seldkd/features/visual.hpp"
#include "seldkd/nn/tensor.hpp"
#include "seldkd/train/losses.hpp"
#include "seldkd/train/targets.hpp"

namespace seldkd::data {

struct ClipRecord {
  std::string id;
  std::string wav_path;
  std::string label_path;
  std::string keypoint_path;  // empty when the clip has no visual stream
};

// Finds clip_*.wav with their _labels.csv / _keypoints.csv siblings.
std::vector<ClipRecord> scan_dataset_dir(const std::string& dir);

struct LoadedClip {
  std::string id;
  features::AcousticFeature acoustic;
  features::VisualFeature visual;  // all-zero when no keypoints exist
  train::SeldTargets targets;
};

// Loads one clip, optionally through the feature cache directory (cache
// files are refreshed when older than their inputs).
LoadedClip load_clip(const ClipRecord& rec, train::TaskMode mode, int n_classes,
                     const std::string& cache_dir = "");

// Writes/refreshes the acoustic and visual caches for one clip; returns the
// number of cache files actually written (0 when up to date).
int extract_clip_caches(const ClipRecord& rec, const std::string& cache_dir);

// Assembled model inputs for a batch of clips, channels-first.
struct Batch {
  nn::Tensor teacher_input;  // [B, 7, T, 64]
  nn::Tensor student_input;  // [B, 19, T, 64]; undefined when audio-only
  train::BatchTargets targets;
  int batch_size = 0;
  int label_frames = 0;
};

Batch make_batch(const std::vector<const LoadedClip*>& clips, bool with_student);

// Reorders per-clip targets by a batch permutation (partner targets under
// feature mixing).
train::BatchTargets permute_targets(const train::BatchTargets& t, int batch,
                                    const std::vector<int>& perm);

}  // namespace seldkd::data
