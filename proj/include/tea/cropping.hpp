#pragma once

// Temporal sub-sequences of a sample: random training crops, prefix crops at
// graduated ratios for evaluation, and sliding start x length windows.
// Crops keep the absolute day offsets of the frames they retain.

#include "tea/data.hpp"

#include <random>
#include <vector>

namespace tea {

struct CropWindow {
  int start = 0;
  int length = 0;
  double ratio = 1.0;

  bool operator==(const CropWindow&) const = default;
};

// The evaluation ratio ladder, 0.1 through 1.0.
std::vector<double> default_ratio_schedule();
void validate_ratio_schedule(const std::vector<double>& ratios);

// round-half-up(ratio * frames), at least one frame.
int crop_length(int frames, double ratio);

SitsSample apply_crop(const SitsSample& sample, const CropWindow& window);

struct RandomCropPolicy {
  double min_ratio = 0.1;
  bool random_start = true;  // false crops from frame 0 ("random ratio" only)
};

CropWindow random_crop_window(int frames, std::mt19937_64& rng, const RandomCropPolicy& policy);

struct CropResult {
  SitsSample sample;
  CropWindow window;
};
CropResult random_crop(const SitsSample& sample, std::mt19937_64& rng, const RandomCropPolicy& policy);

SitsSample prefix_crop(const SitsSample& sample, double ratio);

// Windows of length_ratio starting at 0, step, 2 step, ... that fit in the
// sequence.
std::vector<CropWindow> sliding_windows(int frames, double length_ratio, double step_ratio);

}  // namespace tea
