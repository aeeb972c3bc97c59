#include "tea/cropping.hpp"

#include "tea/errors.hpp"

#include <cmath>

namespace tea {
namespace {

// Absorbs representation error in products like 0.1 * 46 = 4.6000000000000005.
constexpr double kRatioSlack = 1e-9;

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5 + kRatioSlack)); }

void check_ratio(double ratio, const char* op) {
  if (!(ratio > 0.0 && ratio <= 1.0 + kRatioSlack))
    throw InvalidInput(std::string(op) + ": ratio must be in (0, 1], got " + std::to_string(ratio));
}

}  // namespace

std::vector<double> default_ratio_schedule() {
  std::vector<double> r;
  for (int i = 1; i <= 10; ++i) r.push_back(i / 10.0);
  return r;
}

void validate_ratio_schedule(const std::vector<double>& ratios) {
  if (ratios.empty()) throw InvalidInput("ratio schedule is empty");
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    check_ratio(ratios[i], "ratio schedule");
    if (i > 0 && !(ratios[i] > ratios[i - 1])) throw InvalidInput("ratio schedule must be strictly increasing");
  }
}

int crop_length(int frames, double ratio) {
  check_ratio(ratio, "crop_length");
  return std::clamp(round_half_up(ratio * frames), 1, std::max(frames, 1));
}

SitsSample apply_crop(const SitsSample& sample, const CropWindow& w) {
  if (w.start < 0 || w.length < 1 || w.start + w.length > sample.frames)
    throw InvalidInput("apply_crop: window [" + std::to_string(w.start) + ", " + std::to_string(w.start + w.length) +
                       ") outside " + std::to_string(sample.frames) + " frames");
  SitsSample out;
  out.sample_id = sample.sample_id;
  out.frames = w.length;
  out.channels = sample.channels;
  out.height = sample.height;
  out.width = sample.width;
  const std::size_t fs = sample.frame_size();
  out.values.assign(sample.values.begin() + static_cast<std::ptrdiff_t>(w.start * fs),
                    sample.values.begin() + static_cast<std::ptrdiff_t>((w.start + w.length) * fs));
  out.day_offsets.assign(sample.day_offsets.begin() + w.start, sample.day_offsets.begin() + w.start + w.length);
  out.valid_mask.assign(sample.valid_mask.begin() + w.start, sample.valid_mask.begin() + w.start + w.length);
  out.labels = sample.labels;
  return out;
}

CropWindow random_crop_window(int frames, std::mt19937_64& rng, const RandomCropPolicy& policy) {
  check_ratio(policy.min_ratio, "random_crop");
  if (frames < 1) throw InvalidInput("random_crop: empty sequence");
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  const double ratio = policy.min_ratio + (1.0 - policy.min_ratio) * u;
  CropWindow w;
  w.ratio = ratio;
  w.length = crop_length(frames, ratio);
  const auto starts = static_cast<std::uint64_t>(frames - w.length + 1);
  w.start = policy.random_start ? static_cast<int>(rng() % starts) : 0;
  return w;
}

CropResult random_crop(const SitsSample& sample, std::mt19937_64& rng, const RandomCropPolicy& policy) {
  CropWindow w = random_crop_window(sample.frames, rng, policy);
  return {apply_crop(sample, w), w};
}

SitsSample prefix_crop(const SitsSample& sample, double ratio) {
  check_ratio(ratio, "prefix_crop");
  return apply_crop(sample, CropWindow{0, crop_length(sample.frames, ratio), ratio});
}

std::vector<CropWindow> sliding_windows(int frames, double length_ratio, double step_ratio) {
  check_ratio(length_ratio, "sliding_windows");
  if (!(step_ratio > 0)) throw InvalidInput("sliding_windows: step must be positive");
  std::vector<CropWindow> out;
  const int length = crop_length(frames, length_ratio);
  for (int k = 0;; ++k) {
    const double start_ratio = k * step_ratio;
    if (start_ratio + length_ratio > 1.0 + kRatioSlack) break;
    const int start = round_half_up(start_ratio * frames);
    if (start + length > frames) break;
    out.push_back(CropWindow{start, length, length_ratio});
  }
  return out;
}

}  // namespace tea
