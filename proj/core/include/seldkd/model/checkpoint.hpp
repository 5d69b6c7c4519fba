#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "seldkd/nn/adam.hpp"
#include "seldkd/nn/module.hpp"

namespace seldkd::model {

inline constexpr const char* kCheckpointVersion = "seldkd-ckpt-v1";

struct NamedArray {
  std::string name;
  std::vector<int> dims;
  std::vector<double> data;
};

struct CheckpointData {
  std::string version;
  std::string config_text;
  std::map<std::string, std::string> metadata;  // epoch, global_step, seed, ...
  std::vector<NamedArray> params;
  std::vector<NamedArray> buffers;
  bool has_optimizer = false;
  std::int64_t optimizer_step = 0;
  std::vector<std::vector<double>> adam_m, adam_v;
};

void save_checkpoint(const std::string& path, const std::string& config_text,
                     const std::map<std::string, std::string>& metadata,
                     const nn::ParamStore& store, const nn::Adam* optimizer);

CheckpointData load_checkpoint(const std::string& path);

// Copies params/buffers (matched by name) and optimizer state into live objects.
void restore_into(const CheckpointData& ckpt, nn::ParamStore& store, nn::Adam* optimizer);

}  // namespace seldkd::model
