#include "tea/data.hpp"

#include "tea/errors.hpp"
#include "tea/keyvalue.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace tea {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Fisher-Yates over the raw 64-bit stream so the permutation does not depend
// on the standard library's distribution implementations.
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename T>
void write_le(std::ofstream& out, const T* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(data[i]);
      std::reverse(bytes.begin(), bytes.end());
      out.write(bytes.data(), sizeof(T));
    }
  }
}

template <typename T>
void read_le(std::ifstream& in, T* data, std::size_t count) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  if constexpr (std::endian::native != std::endian::little) {
    for (std::size_t i = 0; i < count; ++i) {
      auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(data[i]);
      std::reverse(bytes.begin(), bytes.end());
      data[i] = std::bit_cast<T>(bytes);
    }
  }
}

}  // namespace

Date parse_date(const std::string& text) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) throw ParseError("bad date: " + text);
  Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw ParseError("invalid calendar date: " + text);
  return date;
}

std::string format_date(Date date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

int encode_temporal_position(Date date, Date start_date) {
  if (!date.ok() || !start_date.ok()) throw InvalidInput("encode_temporal_position: invalid date");
  const auto days = (std::chrono::sys_days{date} - std::chrono::sys_days{start_date}).count();
  if (days < 0) {
    throw InvalidInput("encode_temporal_position: " + format_date(date) + " precedes start " +
                       format_date(start_date));
  }
  return static_cast<int>(days);
}

int SitsSample::valid_count() const {
  return static_cast<int>(std::count(valid_mask.begin(), valid_mask.end(), true));
}

void validate_sample(const SitsSample& s, int num_classes) {
  auto fail = [&](const std::string& what) { throw ValidationError("sample " + s.sample_id + ": " + what); };
  if (s.frames < 0 || s.channels <= 0 || s.height <= 0 || s.width <= 0) fail("non-positive shape");
  if (s.values.size() != static_cast<std::size_t>(s.frames) * s.frame_size()) fail("value count mismatch");
  if (s.day_offsets.size() != static_cast<std::size_t>(s.frames)) fail("day_offsets length mismatch");
  if (s.valid_mask.size() != static_cast<std::size_t>(s.frames)) fail("valid_mask length mismatch");
  if (s.labels.size() != static_cast<std::size_t>(s.height) * s.width) fail("label count mismatch");
  int last = -1;
  for (int t = 0; t < s.frames; ++t) {
    if (s.day_offsets[t] < 0) fail("negative day offset");
    if (s.valid_mask[t]) {
      if (s.day_offsets[t] <= last) fail("day offsets not strictly increasing over valid frames");
      last = s.day_offsets[t];
    } else {
      const float* frame = s.values.data() + static_cast<std::size_t>(t) * s.frame_size();
      if (std::any_of(frame, frame + s.frame_size(), [](float v) { return v != 0.0f; }))
        fail("invalid frame " + std::to_string(t) + " is not zero");
    }
  }
  for (int label : s.labels) {
    if (label < 0 || label >= num_classes) fail("label " + std::to_string(label) + " outside [0, K)");
  }
}

SitsSample zero_pad(const SitsSample& sample, int target_frames, int revisit_days) {
  if (sample.frames > target_frames) {
    throw InvalidInput("zero_pad: sample " + sample.sample_id + " has " + std::to_string(sample.frames) +
                       " frames, longer than " + std::to_string(target_frames));
  }
  SitsSample out = sample;
  out.frames = target_frames;
  out.values.resize(static_cast<std::size_t>(target_frames) * sample.frame_size(), 0.0f);
  int next = sample.frames > 0 ? sample.day_offsets.back() + revisit_days : 0;
  for (int t = sample.frames; t < target_frames; ++t, next += revisit_days) {
    out.day_offsets.push_back(next);
    out.valid_mask.push_back(false);
  }
  return out;
}

SitsSample truncate_frames(const SitsSample& sample, int frames) {
  if (frames < 0 || frames > sample.frames) throw InvalidInput("truncate_frames: bad frame count");
  SitsSample out = sample;
  out.frames = frames;
  out.values.resize(static_cast<std::size_t>(frames) * sample.frame_size());
  out.day_offsets.resize(frames);
  out.valid_mask.resize(frames);
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

void DatasetManifest::validate() const {
  if (num_classes < 2) throw ConfigError("manifest: num_classes must be >= 2");
  if (padded_length <= 0) throw ConfigError("manifest: padded_length must be positive");
  if (truncate_length < 0 || truncate_length > padded_length)
    throw ConfigError("manifest: truncate_length must be in [0, padded_length]");
  if (split.train < 0 || split.val < 0 || split.test < 0 ||
      std::abs(split.train + split.val + split.test - 1.0) > 1e-9)
    throw ConfigError("manifest: split ratios must be non-negative and sum to 1");
  if (channels <= 0 || height <= 0 || width <= 0) throw ConfigError("manifest: shape must be positive");
  if (revisit_days <= 0) throw ConfigError("manifest: revisit_days must be positive");
  if (!channel_mean.empty() || !channel_std.empty()) {
    if (channel_mean.size() != static_cast<std::size_t>(channels) ||
        channel_std.size() != static_cast<std::size_t>(channels))
      throw ConfigError("manifest: normalization statistics must have one entry per channel");
    for (double s : channel_std)
      if (!(s > 0)) throw ConfigError("manifest: channel std must be positive");
  }
}

DatasetManifest load_manifest(const std::string& path) {
  auto kv = KeyValueFile::load(path);
  DatasetManifest m;
  m.root = fs::path(path).parent_path().string();
  m.num_classes = static_cast<int>(kv.get_int("dataset", "num_classes", 0));
  m.padded_length = static_cast<int>(kv.get_int("dataset", "padded_length", 0));
  m.truncate_length = static_cast<int>(kv.get_int("dataset", "truncate_length", 0));
  m.start_date = parse_date(kv.get_string("dataset", "start_date", "1970-01-01"));
  m.channels = static_cast<int>(kv.get_int("dataset", "channels", 0));
  m.height = static_cast<int>(kv.get_int("dataset", "height", 0));
  m.width = static_cast<int>(kv.get_int("dataset", "width", 0));
  m.revisit_days = static_cast<int>(kv.get_int("dataset", "revisit_days", 5));
  m.split.train = kv.get_double("split", "train", 0.6);
  m.split.val = kv.get_double("split", "val", 0.2);
  m.split.test = kv.get_double("split", "test", 0.2);
  m.split_seed = static_cast<std::uint64_t>(kv.get_int("split", "seed", 0));
  m.channel_mean = kv.get_doubles("normalization", "mean", {});
  m.channel_std = kv.get_doubles("normalization", "std", {});
  m.validate();
  return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
  KeyValueFile kv;
  kv.set("dataset", "num_classes", std::to_string(m.num_classes));
  kv.set("dataset", "padded_length", std::to_string(m.padded_length));
  kv.set("dataset", "truncate_length", std::to_string(m.truncate_length));
  kv.set("dataset", "start_date", format_date(m.start_date));
  kv.set("dataset", "channels", std::to_string(m.channels));
  kv.set("dataset", "height", std::to_string(m.height));
  kv.set("dataset", "width", std::to_string(m.width));
  kv.set("dataset", "revisit_days", std::to_string(m.revisit_days));
  kv.set("split", "train", join_doubles({m.split.train}));
  kv.set("split", "val", join_doubles({m.split.val}));
  kv.set("split", "test", join_doubles({m.split.test}));
  kv.set("split", "seed", std::to_string(m.split_seed));
  if (!m.channel_mean.empty()) {
    kv.set("normalization", "mean", join_doubles(m.channel_mean));
    kv.set("normalization", "std", join_doubles(m.channel_std));
  }
  kv.save(path);
}

SplitSizes split_sizes(std::size_t n, const SplitRatios& r) {
  SplitSizes s;
  s.train = std::min(n, static_cast<std::size_t>(std::llround(static_cast<double>(n) * r.train)));
  s.val = std::min(n - s.train, static_cast<std::size_t>(std::llround(static_cast<double>(n) * r.val)));
  s.test = n - s.train - s.val;
  return s;
}

SplitAssignment assign_splits(std::vector<std::string> ids, const SplitRatios& ratios, std::uint64_t seed) {
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(splitmix64(seed));
  seeded_shuffle(ids, rng);
  const auto sizes = split_sizes(ids.size(), ratios);
  SplitAssignment a;
  a.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(sizes.train));
  a.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(sizes.train),
               ids.begin() + static_cast<std::ptrdiff_t>(sizes.train + sizes.val));
  a.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(sizes.train + sizes.val), ids.end());
  return a;
}

// ---------------------------------------------------------------------------
// Sample files

void write_sample(const SitsSample& s, const std::string& stem) {
  {
    std::ofstream out(stem + ".f32", std::ios::binary);
    if (!out) throw Error(stem + ".f32: cannot write");
    write_le(out, s.values.data(), s.values.size());
  }
  json meta;
  meta["sample_id"] = s.sample_id;
  meta["shape"] = {s.frames, s.channels, s.height, s.width};
  meta["day_offsets"] = s.day_offsets;
  std::vector<int> mask(s.valid_mask.begin(), s.valid_mask.end());
  meta["valid_mask"] = mask;
  meta["labels_dtype"] = "uint16";
  meta["labels"] = s.labels;
  std::ofstream out(stem + ".json");
  if (!out) throw Error(stem + ".json: cannot write");
  out << meta.dump() << "\n";
}

SitsSample read_sample(const std::string& stem) {
  const std::string meta_path = stem + ".json";
  const std::string data_path = stem + ".f32";
  SitsSample s;
  try {
    std::ifstream in(meta_path);
    if (!in) throw ParseError(meta_path + ": cannot open");
    json meta = json::parse(in);
    s.sample_id = meta.at("sample_id").get<std::string>();
    auto shape = meta.at("shape").get<std::vector<int>>();
    if (shape.size() != 4) throw ParseError(meta_path + ": shape must have 4 entries");
    s.frames = shape[0];
    s.channels = shape[1];
    s.height = shape[2];
    s.width = shape[3];
    if (s.frames < 0 || s.channels <= 0 || s.height <= 0 || s.width <= 0)
      throw ParseError(meta_path + ": non-positive shape");
    s.day_offsets = meta.at("day_offsets").get<std::vector<int>>();
    for (int v : meta.at("valid_mask").get<std::vector<int>>()) s.valid_mask.push_back(v != 0);
    for (long long v : meta.at("labels").get<std::vector<long long>>()) {
      if (v < 0 || v > 65535) throw ParseError(meta_path + ": label outside uint16 range");
      s.labels.push_back(static_cast<int>(v));
    }
  } catch (const json::exception& e) {
    throw ParseError(meta_path + ": " + e.what());
  }
  if (s.day_offsets.size() != static_cast<std::size_t>(s.frames) ||
      s.valid_mask.size() != static_cast<std::size_t>(s.frames))
    throw ParseError(meta_path + ": per-frame arrays do not match shape");
  if (s.labels.size() != static_cast<std::size_t>(s.height) * s.width)
    throw ParseError(meta_path + ": label count does not match shape");

  std::ifstream in(data_path, std::ios::binary | std::ios::ate);
  if (!in) throw ParseError(data_path + ": cannot open");
  const auto bytes = static_cast<std::size_t>(in.tellg());
  const std::size_t expected = static_cast<std::size_t>(s.frames) * s.frame_size();
  if (bytes != expected * sizeof(float)) {
    throw ParseError(data_path + ": expected " + std::to_string(expected * sizeof(float)) + " bytes, found " +
                     std::to_string(bytes));
  }
  in.seekg(0);
  s.values.resize(expected);
  read_le(in, s.values.data(), expected);
  return s;
}

// ---------------------------------------------------------------------------
// Dataset

void compute_normalization(const std::vector<SitsSample>& samples, std::vector<double>& mean,
                           std::vector<double>& std_dev) {
  if (samples.empty()) throw InvalidInput("compute_normalization: no samples");
  const int channels = samples.front().channels;
  std::vector<double> sum(channels, 0.0), sq(channels, 0.0);
  std::vector<double> count(channels, 0.0);
  for (const auto& s : samples) {
    const std::size_t plane = static_cast<std::size_t>(s.height) * s.width;
    for (int t = 0; t < s.frames; ++t) {
      if (!s.valid_mask[t]) continue;
      for (int c = 0; c < channels; ++c) {
        const float* p = s.values.data() + (static_cast<std::size_t>(t) * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          sum[c] += p[i];
          sq[c] += static_cast<double>(p[i]) * p[i];
        }
        count[c] += static_cast<double>(plane);
      }
    }
  }
  mean.assign(channels, 0.0);
  std_dev.assign(channels, 1.0);
  for (int c = 0; c < channels; ++c) {
    if (count[c] == 0) continue;
    mean[c] = sum[c] / count[c];
    const double var = std::max(0.0, sq[c] / count[c] - mean[c] * mean[c]);
    std_dev[c] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
}

void normalize_in_place(SitsSample& s, const std::vector<double>& mean, const std::vector<double>& std_dev) {
  if (mean.empty()) return;
  const std::size_t plane = static_cast<std::size_t>(s.height) * s.width;
  for (int t = 0; t < s.frames; ++t) {
    if (!s.valid_mask[t]) continue;
    for (int c = 0; c < s.channels; ++c) {
      float* p = s.values.data() + (static_cast<std::size_t>(t) * s.channels + c) * plane;
      const double m = mean[c], inv = 1.0 / std_dev[c];
      for (std::size_t i = 0; i < plane; ++i) p[i] = static_cast<float>((p[i] - m) * inv);
    }
  }
}

DatasetSplits load_dataset(const std::string& root) {
  return load_dataset(load_manifest((fs::path(root) / kManifestName).string()));
}

DatasetSplits load_dataset(const DatasetManifest& manifest) {
  manifest.validate();
  const fs::path dir = fs::path(manifest.root) / kSampleDir;
  if (!fs::is_directory(dir)) throw ConfigError("dataset: missing directory " + dir.string());
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") stems.push_back(entry.path().stem().string());
  }
  std::sort(stems.begin(), stems.end());

  std::map<std::string, SitsSample> by_id;
  std::vector<std::string> ids;
  for (const auto& stem : stems) {
    const std::string path = (dir / stem).string();
    SitsSample s = read_sample(path);
    if (s.channels != manifest.channels || s.height != manifest.height || s.width != manifest.width)
      throw ValidationError(path + ": shape disagrees with manifest");
    validate_sample(s, manifest.num_classes);
    s = zero_pad(s, manifest.padded_length, manifest.revisit_days);
    if (manifest.truncate_length > 0) s = truncate_frames(s, manifest.truncate_length);
    normalize_in_place(s, manifest.channel_mean, manifest.channel_std);
    validate_sample(s, manifest.num_classes);
    if (by_id.count(s.sample_id)) throw ValidationError(path + ": duplicate sample id " + s.sample_id);
    ids.push_back(s.sample_id);
    by_id.emplace(s.sample_id, std::move(s));
  }
  auto assignment = assign_splits(ids, manifest.split, manifest.split_seed);
  DatasetSplits out;
  for (const auto& id : assignment.train) out.train.push_back(by_id.at(id));
  for (const auto& id : assignment.val) out.val.push_back(by_id.at(id));
  for (const auto& id : assignment.test) out.test.push_back(by_id.at(id));
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

void PhenologyClassSpec::validate(int channels) const {
  if (!(onset_day < senescence_day)) throw ConfigError("phenology: onset_day must precede senescence_day");
  if (base.size() != static_cast<std::size_t>(channels) || amplitude.size() != static_cast<std::size_t>(channels))
    throw ConfigError("phenology: base/amplitude need one entry per channel");
  for (double v : base)
    if (!std::isfinite(v)) throw ConfigError("phenology: non-finite base");
  for (double v : amplitude)
    if (!std::isfinite(v)) throw ConfigError("phenology: non-finite amplitude");
  if (!(growth_rate > 0) || !(decay_rate > 0)) throw ConfigError("phenology: rates must be positive");
  if (!(noise_std >= 0)) throw ConfigError("phenology: noise_std must be non-negative");
  if (!(prior >= 0)) throw ConfigError("phenology: prior must be non-negative");
}

double PhenologyClassSpec::value(int channel, double day) const {
  auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  return base[channel] + amplitude[channel] * (sigmoid(growth_rate * (day - onset_day)) -
                                               sigmoid(decay_rate * (day - senescence_day)));
}

std::vector<PhenologyClassSpec> default_phenology_classes() {
  std::vector<PhenologyClassSpec> specs(4);
  // background: bare soil and field margins, nearly flat
  specs[0].onset_day = 150;
  specs[0].senescence_day = 250;
  specs[0].base = {0.10, 0.12, 0.14, 0.22};
  specs[0].amplitude = {0.01, 0.01, 0.01, 0.02};
  // winter cereal: early green-up, summer harvest
  specs[1].onset_day = 70;
  specs[1].senescence_day = 230;
  specs[1].growth_rate = 0.06;
  specs[1].decay_rate = 0.08;
  specs[1].base = {0.08, 0.10, 0.12, 0.20};
  specs[1].amplitude = {-0.03, 0.02, -0.06, 0.35};
  // summer crop: late green-up
  specs[2].onset_day = 160;
  specs[2].senescence_day = 300;
  specs[2].growth_rate = 0.08;
  specs[2].decay_rate = 0.06;
  specs[2].base = {0.09, 0.11, 0.13, 0.21};
  specs[2].amplitude = {-0.02, 0.03, -0.05, 0.30};
  // meadow: long, moderate season
  specs[3].onset_day = 30;
  specs[3].senescence_day = 330;
  specs[3].growth_rate = 0.04;
  specs[3].decay_rate = 0.04;
  specs[3].base = {0.09, 0.11, 0.12, 0.23};
  specs[3].amplitude = {-0.01, 0.02, -0.03, 0.18};
  for (auto& s : specs) {
    s.noise_std = 0.02;
    s.prior = 1.0;
  }
  return specs;
}

namespace {

void validate_generator(const std::vector<PhenologyClassSpec>& specs, const SyntheticGeometry& g, int n_samples) {
  if (specs.size() < 2) throw ConfigError("generator: at least two classes are required");
  if (g.height <= 0 || g.width <= 0 || g.channels <= 0 || g.frames <= 0)
    throw ConfigError("generator: geometry must be positive");
  if (g.patch_size <= 0 || g.height % g.patch_size != 0 || g.width % g.patch_size != 0)
    throw ConfigError("generator: H and W must be divisible by the patch size " + std::to_string(g.patch_size));
  if (g.revisit_days <= 0 || g.day_jitter < 0 || g.day_jitter >= g.revisit_days)
    throw ConfigError("generator: need 0 <= day_jitter < revisit_days");
  if (g.parcels_per_image <= 0) throw ConfigError("generator: parcels_per_image must be positive");
  if (!(g.dropout_prob >= 0 && g.dropout_prob <= 1)) throw ConfigError("generator: dropout_prob must be in [0, 1]");
  if (n_samples <= 0) throw ConfigError("generator: n_samples must be positive");
  double total_prior = 0;
  for (const auto& s : specs) {
    s.validate(g.channels);
    total_prior += s.prior;
  }
  if (!(total_prior > 0)) throw ConfigError("generator: priors sum to zero");
}

// Per-class parcel counts by largest remainder so the corpus matches the
// configured priors as closely as whole parcels allow.
std::vector<int> parcel_quota(const std::vector<PhenologyClassSpec>& specs, int total) {
  double sum = 0;
  for (const auto& s : specs) sum += s.prior;
  std::vector<int> counts(specs.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const double exact = total * specs[k].prior / sum;
    counts[k] = static_cast<int>(std::floor(exact));
    assigned += counts[k];
    remainders.emplace_back(exact - counts[k], k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; assigned < total; ++i, ++assigned) counts[remainders[i].second]++;
  return counts;
}

}  // namespace

std::vector<SitsSample> generate_synthetic_samples(const std::vector<PhenologyClassSpec>& specs,
                                                   const SyntheticGeometry& g, int n_samples, std::uint64_t seed) {
  validate_generator(specs, g, n_samples);
  const int K = static_cast<int>(specs.size());
  std::mt19937_64 master(splitmix64(seed));

  std::vector<int> parcel_classes;
  const auto quota = parcel_quota(specs, n_samples * g.parcels_per_image);
  for (int k = 0; k < K; ++k) parcel_classes.insert(parcel_classes.end(), quota[k], k);
  seeded_shuffle(parcel_classes, master);

  std::vector<SitsSample> samples;
  samples.reserve(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i) + 1)));
    std::normal_distribution<double> normal(0.0, 1.0);
    SitsSample s;
    char id[32];
    std::snprintf(id, sizeof id, "sample_%05d", i);
    s.sample_id = id;
    s.frames = g.frames;
    s.channels = g.channels;
    s.height = g.height;
    s.width = g.width;

    for (int t = 0; t < g.frames; ++t) {
      const int jitter = g.day_jitter > 0 ? static_cast<int>(rng() % static_cast<std::uint64_t>(g.day_jitter + 1)) : 0;
      s.day_offsets.push_back(t * g.revisit_days + jitter);
      s.valid_mask.push_back(uniform01(rng) >= g.dropout_prob);
    }

    // Planar partition: nearest-seed (Voronoi) parcels.
    std::vector<std::pair<double, double>> seeds;
    for (int p = 0; p < g.parcels_per_image; ++p) seeds.emplace_back(uniform01(rng) * g.height, uniform01(rng) * g.width);
    s.labels.resize(static_cast<std::size_t>(g.height) * g.width);
    for (int y = 0; y < g.height; ++y) {
      for (int x = 0; x < g.width; ++x) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int p = 0; p < g.parcels_per_image; ++p) {
          const double dy = y + 0.5 - seeds[p].first, dx = x + 0.5 - seeds[p].second;
          const double d = dy * dy + dx * dx;
          if (d < best_d) {
            best_d = d;
            best = p;
          }
        }
        s.labels[static_cast<std::size_t>(y) * g.width + x] = parcel_classes[static_cast<std::size_t>(i) * g.parcels_per_image + best];
      }
    }

    s.values.assign(static_cast<std::size_t>(g.frames) * s.frame_size(), 0.0f);
    for (int t = 0; t < g.frames; ++t) {
      if (!s.valid_mask[t]) continue;
      for (int c = 0; c < g.channels; ++c) {
        std::vector<double> curve(K);
        for (int k = 0; k < K; ++k) curve[k] = specs[k].value(c, s.day_offsets[t]);
        for (int y = 0; y < g.height; ++y) {
          for (int x = 0; x < g.width; ++x) {
            const int k = s.labels[static_cast<std::size_t>(y) * g.width + x];
            double v = curve[k];
            if (specs[k].noise_std > 0) v += specs[k].noise_std * normal(rng);
            s.at(t, c, y, x) = static_cast<float>(v);
          }
        }
      }
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

DatasetManifest generate_synthetic_dataset(const std::vector<PhenologyClassSpec>& specs, const SyntheticGeometry& g,
                                           int n_samples, std::uint64_t seed, const std::string& out_dir) {
  auto samples = generate_synthetic_samples(specs, g, n_samples, seed);
  const fs::path root(out_dir);
  fs::create_directories(root / kSampleDir);

  DatasetManifest m;
  m.root = root.string();
  m.num_classes = static_cast<int>(specs.size());
  m.padded_length = g.frames;
  m.start_date = parse_date(g.start_date);
  m.split = g.split;
  m.split_seed = seed;
  m.channels = g.channels;
  m.height = g.height;
  m.width = g.width;
  m.revisit_days = g.revisit_days;

  std::vector<std::string> ids;
  for (const auto& s : samples) ids.push_back(s.sample_id);
  const auto assignment = assign_splits(ids, m.split, m.split_seed);
  std::vector<SitsSample> train;
  for (const auto& s : samples) {
    if (std::find(assignment.train.begin(), assignment.train.end(), s.sample_id) != assignment.train.end())
      train.push_back(s);
  }
  if (!train.empty()) compute_normalization(train, m.channel_mean, m.channel_std);
  m.validate();

  for (const auto& s : samples) write_sample(s, (root / kSampleDir / s.sample_id).string());
  save_manifest(m, (root / kManifestName).string());
  return m;
}

}  // namespace tea
