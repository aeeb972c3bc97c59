#pragma once

// Run configuration. Every field is addressable in a sectioned key/value file
// and can be overridden with TEA_<SECTION>_<KEY> environment variables.
//
//   [data]      root
//   [model]     image_height image_width channels patch_size dim temporal_depth
//               spatial_depth heads mlp_dim num_classes max_day_offset
//               prototype_slots slot_span use_prototypes recon_hidden
//   [train]     preset epochs batch_size seed validation_interval output_dir
//   [lr]        warmup_epochs start peak floor
//   [optim]     beta1 beta2 eps weight_decay
//   [loss]      ce temporal spatial prototype reconstruction soft temperature
//   [ema]       warmup_fraction warmup_start warmup_end final
//   [crop]      min_ratio random_start
//   [eval]      ratios sweep_lengths sweep_step
//   [generator] samples seed height width channels frames revisit_days
//               day_jitter parcels_per_image dropout noise_std start_date
//
// `preset` (desk, desk-baseline, desk-random-crop) selects the starting
// values that the remaining keys override.

#include "tea/cropping.hpp"
#include "tea/data.hpp"
#include "tea/distillation.hpp"
#include "tea/keyvalue.hpp"
#include "tea/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tea {

struct LearningRatePolicy {
  double warmup_epochs = 10;
  double start = 1e-8;
  double peak = 1e-3;
  double floor = 1e-6;
};

struct OptimizerConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

struct LossWeights {
  double ce = 1;
  double temporal = 1;
  double spatial = 1;
  double prototype = 1;
  double reconstruction = 1;
  double soft = 1;
  double temperature = 1;

  bool needs_teacher() const { return temporal > 0 || spatial > 0 || prototype > 0 || soft > 0; }
};

struct RunConfig {
  ModelConfig model;
  std::string data_root;
  std::string output_dir = "runs/default";
  int epochs = 30;
  int batch_size = 8;
  std::uint64_t seed = 0;
  long long validation_interval = 500;
  LearningRatePolicy lr;
  OptimizerConfig optim;
  LossWeights loss;
  DecaySchedule ema;  // total_steps is filled in from the dataset size
  RandomCropPolicy crop;
  std::vector<double> eval_ratios = default_ratio_schedule();
  std::vector<double> sweep_lengths = {0.1, 0.2, 0.4, 0.8};
  double sweep_step = 0.1;

  void validate() const;
};

struct GeneratorConfig {
  int samples = 200;
  std::uint64_t seed = 0;
  SyntheticGeometry geometry;
  std::vector<PhenologyClassSpec> classes = default_phenology_classes();
};

RunConfig run_config_from(const KeyValueFile& kv);
KeyValueFile to_key_values(const RunConfig& config);
// Loads the file and applies environment overrides.
RunConfig load_run_config(const std::string& path);

GeneratorConfig generator_config_from(const KeyValueFile& kv);

// FNV-1a of the canonical key/value rendering.
std::string config_hash(const RunConfig& config);

// Desk-scale presets: d=32, depth 2+2, K=4, 16x16 images, patch 2, 10 epochs.
// The baseline drops every auxiliary loss and the prototypes and trains on
// full-length sequences; random-crop-only is the baseline plus random crops.
RunConfig preset_config(const std::string& name);
RunConfig desk_scale_config();
RunConfig baseline_config(RunConfig base);
RunConfig random_crop_only_config(RunConfig base);

}  // namespace tea
