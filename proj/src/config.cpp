#include "tea/config.hpp"

#include "tea/errors.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace tea {
namespace {

std::string str(double v) { return join_doubles({v}); }
std::string str(long long v) { return std::to_string(v); }
std::string str(int v) { return std::to_string(v); }
std::string str(bool v) { return v ? "true" : "false"; }

std::vector<int> ints_from(const std::vector<double>& values) {
  std::vector<int> out;
  for (double v : values) out.push_back(static_cast<int>(std::lround(v)));
  return out;
}

std::string join_ints(const std::vector<int>& values) {
  std::ostringstream out;
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
  return out.str();
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  if (epochs < 0) throw ConfigError("train: epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
  if (validation_interval < 1) throw ConfigError("train: validation_interval must be positive");
  if (!(lr.peak > lr.floor) || lr.floor < 0 || lr.start < 0 || lr.warmup_epochs < 0)
    throw ConfigError("lr: need peak > floor >= 0, start >= 0, warmup_epochs >= 0");
  for (double w : {loss.ce, loss.temporal, loss.spatial, loss.prototype, loss.reconstruction, loss.soft})
    if (!(w >= 0)) throw ConfigError("loss: weights must be non-negative");
  if (!(loss.temperature > 0)) throw ConfigError("loss: temperature must be positive");
  if (!(optim.beta1 >= 0 && optim.beta1 < 1 && optim.beta2 >= 0 && optim.beta2 < 1 && optim.eps > 0 &&
        optim.weight_decay >= 0))
    throw ConfigError("optim: invalid moments, eps or weight decay");
  DecaySchedule probe = ema;
  probe.total_steps = std::max<long long>(probe.total_steps, 1);
  probe.validate();
  if (!(crop.min_ratio > 0 && crop.min_ratio <= 1)) throw ConfigError("crop: min_ratio must be in (0, 1]");
  try {
    validate_ratio_schedule(eval_ratios);
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("eval: ") + e.what());
  }
  for (double l : sweep_lengths)
    if (!(l > 0 && l <= 1)) throw ConfigError("eval: sweep lengths must be in (0, 1]");
  if (!(sweep_step > 0)) throw ConfigError("eval: sweep_step must be positive");
}

RunConfig run_config_from(const KeyValueFile& kv) {
  RunConfig c = preset_config(kv.get_string("train", "preset", ""));
  auto& b = c.model.backbone;
  c.data_root = kv.get_string("data", "root", c.data_root);

  b.image_height = static_cast<int>(kv.get_int("model", "image_height", b.image_height));
  b.image_width = static_cast<int>(kv.get_int("model", "image_width", b.image_width));
  b.channels = static_cast<int>(kv.get_int("model", "channels", b.channels));
  const int patch = static_cast<int>(kv.get_int("model", "patch_size", b.patch_height));
  b.patch_height = static_cast<int>(kv.get_int("model", "patch_height", patch));
  b.patch_width = static_cast<int>(kv.get_int("model", "patch_width", patch));
  b.dim = static_cast<int>(kv.get_int("model", "dim", b.dim));
  b.temporal_depth = static_cast<int>(kv.get_int("model", "temporal_depth", b.temporal_depth));
  b.spatial_depth = static_cast<int>(kv.get_int("model", "spatial_depth", b.spatial_depth));
  b.heads = static_cast<int>(kv.get_int("model", "heads", b.heads));
  b.mlp_dim = static_cast<int>(kv.get_int("model", "mlp_dim", b.mlp_dim));
  b.num_classes = static_cast<int>(kv.get_int("model", "num_classes", b.num_classes));
  b.max_day_offset = static_cast<int>(kv.get_int("model", "max_day_offset", b.max_day_offset));
  c.model.prototype_slots = static_cast<int>(kv.get_int("model", "prototype_slots", c.model.prototype_slots));
  c.model.slot_span = static_cast<int>(kv.get_int("model", "slot_span", c.model.slot_span));
  c.model.use_prototypes = kv.get_bool("model", "use_prototypes", c.model.use_prototypes);
  c.model.recon_hidden = ints_from(kv.get_doubles("model", "recon_hidden", {}));

  c.epochs = static_cast<int>(kv.get_int("train", "epochs", c.epochs));
  c.batch_size = static_cast<int>(kv.get_int("train", "batch_size", c.batch_size));
  c.seed = static_cast<std::uint64_t>(kv.get_int("train", "seed", static_cast<long long>(c.seed)));
  c.validation_interval = kv.get_int("train", "validation_interval", c.validation_interval);
  c.output_dir = kv.get_string("train", "output_dir", c.output_dir);

  c.lr.warmup_epochs = kv.get_double("lr", "warmup_epochs", c.lr.warmup_epochs);
  c.lr.start = kv.get_double("lr", "start", c.lr.start);
  c.lr.peak = kv.get_double("lr", "peak", c.lr.peak);
  c.lr.floor = kv.get_double("lr", "floor", c.lr.floor);

  c.optim.beta1 = kv.get_double("optim", "beta1", c.optim.beta1);
  c.optim.beta2 = kv.get_double("optim", "beta2", c.optim.beta2);
  c.optim.eps = kv.get_double("optim", "eps", c.optim.eps);
  c.optim.weight_decay = kv.get_double("optim", "weight_decay", c.optim.weight_decay);

  c.loss.ce = kv.get_double("loss", "ce", c.loss.ce);
  c.loss.temporal = kv.get_double("loss", "temporal", c.loss.temporal);
  c.loss.spatial = kv.get_double("loss", "spatial", c.loss.spatial);
  c.loss.prototype = kv.get_double("loss", "prototype", c.loss.prototype);
  c.loss.reconstruction = kv.get_double("loss", "reconstruction", c.loss.reconstruction);
  c.loss.soft = kv.get_double("loss", "soft", c.loss.soft);
  c.loss.temperature = kv.get_double("loss", "temperature", c.loss.temperature);

  c.ema.warmup_fraction = kv.get_double("ema", "warmup_fraction", c.ema.warmup_fraction);
  c.ema.warmup_start = kv.get_double("ema", "warmup_start", c.ema.warmup_start);
  c.ema.warmup_end = kv.get_double("ema", "warmup_end", c.ema.warmup_end);
  c.ema.final_decay = kv.get_double("ema", "final", c.ema.final_decay);

  c.crop.min_ratio = kv.get_double("crop", "min_ratio", c.crop.min_ratio);
  c.crop.random_start = kv.get_bool("crop", "random_start", c.crop.random_start);

  c.eval_ratios = kv.get_doubles("eval", "ratios", c.eval_ratios);
  c.sweep_lengths = kv.get_doubles("eval", "sweep_lengths", c.sweep_lengths);
  c.sweep_step = kv.get_double("eval", "sweep_step", c.sweep_step);
  c.validate();
  return c;
}

KeyValueFile to_key_values(const RunConfig& c) {
  KeyValueFile kv;
  const auto& b = c.model.backbone;
  kv.set("data", "root", c.data_root);
  kv.set("model", "image_height", str(b.image_height));
  kv.set("model", "image_width", str(b.image_width));
  kv.set("model", "channels", str(b.channels));
  kv.set("model", "patch_height", str(b.patch_height));
  kv.set("model", "patch_width", str(b.patch_width));
  kv.set("model", "dim", str(b.dim));
  kv.set("model", "temporal_depth", str(b.temporal_depth));
  kv.set("model", "spatial_depth", str(b.spatial_depth));
  kv.set("model", "heads", str(b.heads));
  kv.set("model", "mlp_dim", str(b.mlp_dim));
  kv.set("model", "num_classes", str(b.num_classes));
  kv.set("model", "max_day_offset", str(b.max_day_offset));
  kv.set("model", "prototype_slots", str(c.model.prototype_slots));
  kv.set("model", "slot_span", str(c.model.slot_span));
  kv.set("model", "use_prototypes", str(c.model.use_prototypes));
  kv.set("model", "recon_hidden", join_ints(c.model.recon_hidden));
  kv.set("train", "epochs", str(c.epochs));
  kv.set("train", "batch_size", str(c.batch_size));
  kv.set("train", "seed", std::to_string(c.seed));
  kv.set("train", "validation_interval", str(c.validation_interval));
  kv.set("train", "output_dir", c.output_dir);
  kv.set("lr", "warmup_epochs", str(c.lr.warmup_epochs));
  kv.set("lr", "start", str(c.lr.start));
  kv.set("lr", "peak", str(c.lr.peak));
  kv.set("lr", "floor", str(c.lr.floor));
  kv.set("optim", "beta1", str(c.optim.beta1));
  kv.set("optim", "beta2", str(c.optim.beta2));
  kv.set("optim", "eps", str(c.optim.eps));
  kv.set("optim", "weight_decay", str(c.optim.weight_decay));
  kv.set("loss", "ce", str(c.loss.ce));
  kv.set("loss", "temporal", str(c.loss.temporal));
  kv.set("loss", "spatial", str(c.loss.spatial));
  kv.set("loss", "prototype", str(c.loss.prototype));
  kv.set("loss", "reconstruction", str(c.loss.reconstruction));
  kv.set("loss", "soft", str(c.loss.soft));
  kv.set("loss", "temperature", str(c.loss.temperature));
  kv.set("ema", "warmup_fraction", str(c.ema.warmup_fraction));
  kv.set("ema", "warmup_start", str(c.ema.warmup_start));
  kv.set("ema", "warmup_end", str(c.ema.warmup_end));
  kv.set("ema", "final", str(c.ema.final_decay));
  kv.set("crop", "min_ratio", str(c.crop.min_ratio));
  kv.set("crop", "random_start", str(c.crop.random_start));
  kv.set("eval", "ratios", join_doubles(c.eval_ratios));
  kv.set("eval", "sweep_lengths", join_doubles(c.sweep_lengths));
  kv.set("eval", "sweep_step", str(c.sweep_step));
  return kv;
}

RunConfig load_run_config(const std::string& path) {
  auto kv = KeyValueFile::load(path);
  kv.apply_environment("TEA");
  return run_config_from(kv);
}

GeneratorConfig generator_config_from(const KeyValueFile& kv) {
  GeneratorConfig g;
  auto& geo = g.geometry;
  g.samples = static_cast<int>(kv.get_int("generator", "samples", g.samples));
  g.seed = static_cast<std::uint64_t>(kv.get_int("generator", "seed", static_cast<long long>(g.seed)));
  geo.height = static_cast<int>(kv.get_int("generator", "height", geo.height));
  geo.width = static_cast<int>(kv.get_int("generator", "width", geo.width));
  geo.channels = static_cast<int>(kv.get_int("generator", "channels", geo.channels));
  geo.frames = static_cast<int>(kv.get_int("generator", "frames", geo.frames));
  geo.revisit_days = static_cast<int>(kv.get_int("generator", "revisit_days", geo.revisit_days));
  geo.day_jitter = static_cast<int>(kv.get_int("generator", "day_jitter", geo.day_jitter));
  geo.parcels_per_image = static_cast<int>(kv.get_int("generator", "parcels_per_image", geo.parcels_per_image));
  geo.dropout_prob = kv.get_double("generator", "dropout", geo.dropout_prob);
  geo.start_date = kv.get_string("generator", "start_date", geo.start_date);
  geo.patch_size = static_cast<int>(kv.get_int("model", "patch_size", kv.get_int("model", "patch_height", geo.patch_size)));
  geo.split.train = kv.get_double("generator", "split_train", geo.split.train);
  geo.split.val = kv.get_double("generator", "split_val", geo.split.val);
  geo.split.test = kv.get_double("generator", "split_test", geo.split.test);
  if (auto noise = kv.get("generator", "noise_std")) {
    const double v = kv.get_double("generator", "noise_std", 0);
    for (auto& c : g.classes) c.noise_std = v;
  }
  if (geo.channels != 4) throw ConfigError("generator: the built-in phenology classes are defined for 4 channels");
  return g;
}

std::string config_hash(const RunConfig& c) {
  const std::string text = to_key_values(c).to_string();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig preset_config(const std::string& name) {
  if (name.empty()) return RunConfig{};
  if (name == "desk") return desk_scale_config();
  if (name == "desk-baseline") return baseline_config(desk_scale_config());
  if (name == "desk-random-crop") return random_crop_only_config(desk_scale_config());
  throw ConfigError("unknown preset '" + name + "' (expected desk, desk-baseline or desk-random-crop)");
}

RunConfig desk_scale_config() {
  RunConfig c;
  auto& b = c.model.backbone;
  b.image_height = 16;
  b.image_width = 16;
  b.channels = 4;
  b.patch_height = 2;
  b.patch_width = 2;
  b.dim = 32;
  b.temporal_depth = 2;
  b.spatial_depth = 2;
  b.heads = 4;
  b.mlp_dim = 64;
  b.num_classes = 4;
  b.max_day_offset = 400;
  c.model.prototype_slots = 24;
  c.model.slot_span = 15;
  c.epochs = 10;
  c.batch_size = 8;
  c.lr.warmup_epochs = 2;
  c.validation_interval = 45;
  // Feature alignment at unit weight slows a 150-step run; soft labels and
  // reconstruction keep unit weight.
  c.loss.temporal = 0.1;
  c.loss.spatial = 0.1;
  c.loss.prototype = 0.1;
  return c;
}

RunConfig baseline_config(RunConfig c) {
  c.loss = LossWeights{};
  c.loss.temporal = c.loss.spatial = c.loss.prototype = c.loss.reconstruction = c.loss.soft = 0;
  c.model.use_prototypes = false;
  c.crop.min_ratio = 1.0;
  return c;
}

RunConfig random_crop_only_config(RunConfig c) {
  const RandomCropPolicy crop = c.crop;
  c = baseline_config(std::move(c));
  c.crop = crop;
  if (c.crop.min_ratio >= 1.0) c.crop.min_ratio = 0.1;
  return c;
}

}  // namespace tea
