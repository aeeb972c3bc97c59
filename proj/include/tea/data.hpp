#pragma once

// Satellite image time series samples, the on-disk corpus format, and a
// seeded synthetic corpus generator built on double-logistic phenology.

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

namespace tea {

using Date = std::chrono::year_month_day;

// Parses YYYY-MM-DD.
Date parse_date(const std::string& text);
std::string format_date(Date date);

// One time series of T frames of C x H x W reflectance with per-pixel labels.
struct SitsSample {
  std::string sample_id;
  int frames = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> values;     // T x C x H x W, row-major
  std::vector<int> day_offsets;  // length T
  std::vector<bool> valid_mask;  // length T
  std::vector<int> labels;       // H x W, row-major

  std::size_t frame_size() const { return static_cast<std::size_t>(channels) * height * width; }
  float& at(int t, int c, int y, int x) {
    return values[((static_cast<std::size_t>(t) * channels + c) * height + y) * width + x];
  }
  float at(int t, int c, int y, int x) const {
    return values[((static_cast<std::size_t>(t) * channels + c) * height + y) * width + x];
  }
  int valid_count() const;

  bool operator==(const SitsSample&) const = default;
};

// Throws ValidationError naming the sample when an invariant is broken.
void validate_sample(const SitsSample& sample, int num_classes);

// Whole days from start_date to date.
int encode_temporal_position(Date date, Date start_date);

// Appends all-zero invalid frames up to target_frames. Offsets of appended
// frames continue on the nominal revisit grid after the last frame.
SitsSample zero_pad(const SitsSample& sample, int target_frames, int revisit_days);

// Keeps the first `frames` frames.
SitsSample truncate_frames(const SitsSample& sample, int frames);

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct DatasetManifest {
  std::string root;
  int num_classes = 0;
  int padded_length = 0;
  int truncate_length = 0;  // 0 keeps every padded frame
  Date start_date{};
  SplitRatios split;
  std::uint64_t split_seed = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  int revisit_days = 5;
  std::vector<double> channel_mean;  // training-split statistics over valid frames
  std::vector<double> channel_std;

  void validate() const;
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

inline constexpr const char* kManifestName = "manifest.ini";
inline constexpr const char* kSampleDir = "samples";

struct DatasetSplits {
  std::vector<SitsSample> train;
  std::vector<SitsSample> val;
  std::vector<SitsSample> test;
};

// Sizes of the train/val/test partitions for n samples.
struct SplitSizes {
  std::size_t train = 0, val = 0, test = 0;
};
SplitSizes split_sizes(std::size_t n, const SplitRatios& ratios);

// Deterministic permutation of sample ids into train/val/test.
struct SplitAssignment {
  std::vector<std::string> train, val, test;
};
SplitAssignment assign_splits(std::vector<std::string> ids, const SplitRatios& ratios, std::uint64_t seed);

// Raw file I/O. `stem` is a path without extension; values go to stem.f32
// and metadata (shape, day offsets, mask, uint16 labels) to stem.json.
void write_sample(const SitsSample& sample, const std::string& stem);
SitsSample read_sample(const std::string& stem);

// Reads the manifest in root, pads/truncates every sample, standardizes
// valid frames with the manifest statistics and splits deterministically.
DatasetSplits load_dataset(const std::string& root);
DatasetSplits load_dataset(const DatasetManifest& manifest);

// Per-channel mean/std over valid frames.
void compute_normalization(const std::vector<SitsSample>& samples, std::vector<double>& mean,
                           std::vector<double>& std_dev);
void normalize_in_place(SitsSample& sample, const std::vector<double>& mean, const std::vector<double>& std_dev);

// ---------------------------------------------------------------------------
// Synthetic corpus

// Double-logistic seasonal curve per channel:
//   v(day) = base + amplitude * (sigmoid(growth * (day - onset)) - sigmoid(decay * (day - senescence)))
struct PhenologyClassSpec {
  double onset_day = 0;
  double senescence_day = 1;
  double growth_rate = 0.05;
  double decay_rate = 0.05;
  std::vector<double> base;       // per channel
  std::vector<double> amplitude;  // per channel
  double noise_std = 0;
  double prior = 1;  // relative share of parcels

  void validate(int channels) const;
  double value(int channel, double day) const;
};

struct SyntheticGeometry {
  int height = 16;
  int width = 16;
  int channels = 4;
  int frames = 24;
  int revisit_days = 15;
  int day_jitter = 2;
  int patch_size = 2;
  int parcels_per_image = 8;
  double dropout_prob = 0;  // per-frame probability of a missing acquisition
  std::string start_date = "2018-09-01";
  SplitRatios split;
};

// The four-class desk-scale corpus description.
std::vector<PhenologyClassSpec> default_phenology_classes();

// In-memory generation; raw (unnormalized) values.
std::vector<SitsSample> generate_synthetic_samples(const std::vector<PhenologyClassSpec>& specs,
                                                   const SyntheticGeometry& geometry, int n_samples,
                                                   std::uint64_t seed);

// Writes samples and a manifest (with training statistics) under out_dir.
DatasetManifest generate_synthetic_dataset(const std::vector<PhenologyClassSpec>& specs,
                                           const SyntheticGeometry& geometry, int n_samples, std::uint64_t seed,
                                           const std::string& out_dir);

}  // namespace tea
