#pragma once

// Versioned binary checkpoints holding the student, the optional teacher and
// enough metadata to rebuild both.
//
//   "TEACKPT1" | u32 version | u32 scalar bytes | u64 header bytes | JSON header | tensor data
//
// The header lists every tensor as {owner, name, rows, cols}; data follows in that
// order as little-endian row-major float32.

#include "tea/model.hpp"

#include <optional>
#include <string>

namespace tea {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::string config_hash;
  std::string run_config;  // key/value rendering of the run configuration
  long long step = 0;
  long long teacher_step = 0;
  double best_ldiou = 0;

  bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
  ModelConfig config;
  CheckpointMeta meta;
  TeaModel<float> student;
  std::optional<TeaModel<float>> teacher;
};

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

void save_checkpoint(const std::string& path, const CheckpointMeta& meta, const TeaModel<float>& student,
                     const TeaModel<float>* teacher = nullptr);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tea
