#include "tea/trainer.hpp"

#include "tea/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

namespace tea {
using json = nlohmann::json;

void AdamW::step(const std::vector<ad::Var<float>>& params, double lr) {
  if (slots_.empty()) slots_.resize(params.size());
  if (slots_.size() != params.size()) throw InvalidInput("AdamW: parameter list changed size");
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    const Matrix<float>& g = p.grad();
    if (g.size() == 0) continue;
    Slot& s = slots_[i];
    if (s.m.size() == 0) {
      s.m = Matrix<float>::Zero(g.rows(), g.cols());
      s.v = Matrix<float>::Zero(g.rows(), g.cols());
    }
    ++s.t;
    s.m = static_cast<float>(b1) * s.m + static_cast<float>(1 - b1) * g;
    s.v = static_cast<float>(b2) * s.v + static_cast<float>(1 - b2) * g.cwiseProduct(g);
    const float c1 = static_cast<float>(1 - std::pow(b1, static_cast<double>(s.t)));
    const float c2 = static_cast<float>(1 - std::pow(b2, static_cast<double>(s.t)));
    Matrix<float>& w = p.mutable_value();
    w *= static_cast<float>(1 - lr * cfg_.weight_decay);
    w.array() -= static_cast<float>(lr) * (s.m.array() / c1) /
                 ((s.v.array() / c2).sqrt() + static_cast<float>(cfg_.eps));
  }
}

StepPlan plan_steps(std::size_t train_samples, const RunConfig& config) {
  StepPlan plan;
  const auto b = static_cast<std::size_t>(config.batch_size);
  plan.steps_per_epoch = static_cast<long long>((train_samples + b - 1) / b);
  plan.total_steps = plan.steps_per_epoch * config.epochs;
  return plan;
}

double learning_rate_at(long long step, const LearningRatePolicy& p, const StepPlan& plan) {
  if (step < 0) throw InvalidInput("learning_rate_at: negative step");
  const long long warm =
      std::min(plan.total_steps, std::llround(p.warmup_epochs * static_cast<double>(plan.steps_per_epoch)));
  if (step < warm) return p.start + (p.peak - p.start) * static_cast<double>(step) / static_cast<double>(warm);
  const long long span = plan.total_steps - 1 - warm;
  if (span <= 0) return step == warm && span == 0 ? p.floor : (step >= plan.total_steps - 1 ? p.floor : p.peak);
  const double f = std::min(1.0, static_cast<double>(step - warm) / static_cast<double>(span));
  return p.floor + (p.peak - p.floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * f));
}

TrainState TrainState::initialize(const RunConfig& config) {
  TrainState s;
  s.student = TeaModel<float>(config.model, config.seed);
  s.teacher = TeacherState<float>::from_student(s.student);
  s.optimizer = AdamW(config.optim);
  s.shuffle_rng = Rng(config.seed ^ 0x5eed5eed5eed5eedULL);
  s.crop_rng = Rng(config.seed ^ 0xc409c409c409c409ULL);
  return s;
}

StepRecord train_step(const std::vector<const SitsSample*>& batch, TrainState& state, const RunConfig& config,
                      const StepPlan& plan) {
  if (batch.empty()) throw InvalidInput("train_step: empty batch");
  const auto& bcfg = config.model.backbone;
  const bool use_teacher = config.loss.needs_teacher();
  const float inv_b = 1.0f / static_cast<float>(batch.size());

  StepRecord rec;
  rec.step = state.step;
  for (const SitsSample* sample : batch) {
    const CropResult crop = random_crop(*sample, state.crop_rng, config.crop);
    std::optional<TeacherTargets<float>> targets;
    if (use_teacher) targets = teacher_targets(state.teacher.model, make_input<float>(*sample, bcfg));
    auto obj = sample_objective(state.student, make_input<float>(crop.sample, bcfg), crop.sample.labels,
                                targets ? &*targets : nullptr, config.loss);
    ad::backward(obj.total * inv_b);
    rec.loss += obj.components;
  }
  rec.loss *= 1.0 / static_cast<double>(batch.size());

  rec.lr = learning_rate_at(state.step, config.lr, plan);
  std::vector<ad::Var<float>> params;
  state.student.visit([&](const std::string&, const ad::Var<float>& v) { params.push_back(v); });
  state.optimizer.step(params, rec.lr);
  state.student.zero_grad();

  DecaySchedule schedule = config.ema;
  schedule.total_steps = std::max<long long>(plan.total_steps, 1);
  rec.decay = decay_at(std::min(state.teacher.step, schedule.total_steps), schedule);
  state.teacher.update(state.student, schedule);
  ++state.step;
  return rec;
}

ConfusionMatrix evaluate_samples(const TeaModel<float>& model, const std::vector<SitsSample>& samples,
                                 const std::function<SitsSample(const SitsSample&)>& crop) {
  ad::NoGradGuard no_grad;
  ConfusionMatrix cm(model.config().backbone.num_classes);
  for (const auto& s : samples) {
    const SitsSample view = crop(s);
    const auto out = model.forward(view);
    cm.add(s.labels, argmax_labels(out.logits.value()));
  }
  return cm;
}

EvalReport validate(const TeaModel<float>& model, const std::vector<SitsSample>& samples,
                    const std::vector<double>& ratios) {
  validate_ratio_schedule(ratios);
  if (samples.empty()) throw ConfigError("validate: no samples");
  EvalReport r;
  r.ratios = ratios;
  for (double ratio : ratios)
    r.per_ratio_miou.push_back(
        miou(evaluate_samples(model, samples, [ratio](const SitsSample& s) { return prefix_crop(s, ratio); })));
  finalize_report(r);
  return r;
}

std::vector<SweepCell> sweep(const TeaModel<float>& model, const std::vector<SitsSample>& samples,
                             const std::vector<double>& lengths, double step_ratio) {
  if (samples.empty()) throw ConfigError("sweep: no samples");
  std::vector<SweepCell> cells;
  for (double length : lengths) {
    const auto windows = sliding_windows(samples.front().frames, length, step_ratio);
    for (std::size_t i = 0; i < windows.size(); ++i) {
      const CropWindow w = windows[i];
      const double m = miou(evaluate_samples(model, samples, [&](const SitsSample& s) {
        if (s.frames != samples.front().frames) throw InvalidInput("sweep: samples differ in length");
        return apply_crop(s, w);
      }));
      cells.push_back({static_cast<double>(i) * step_ratio, length, m});
    }
  }
  return cells;
}

std::string step_record_to_json(const StepRecord& r) {
  json j = {{"kind", "step"},
            {"step", r.step},
            {"lr", r.lr},
            {"decay", r.decay},
            {"ce", r.loss.ce},
            {"temporal", r.loss.temporal},
            {"spatial", r.loss.spatial},
            {"prototype", r.loss.prototype},
            {"reconstruction", r.loss.reconstruction},
            {"soft", r.loss.soft},
            {"total", r.loss.total}};
  return j.dump();
}

namespace {

std::string validation_to_json(long long step, const EvalReport& r) {
  return json{{"kind", "validation"},
              {"step", step},
              {"per_ratio_miou", r.per_ratio_miou},
              {"mmiou", r.mmiou},
              {"ldiou", r.ldiou}}
      .dump();
}

}  // namespace

FitResult fit(const RunConfig& config, const DatasetSplits& data) {
  config.validate();
  if (data.train.empty()) throw ConfigError("fit: training split is empty");
  if (data.val.empty()) throw ConfigError("fit: validation split is empty");
  namespace fs = std::filesystem;
  fs::create_directories(config.output_dir);
  const std::string ckpt_path = (fs::path(config.output_dir) / kBestCheckpointName).string();
  std::ofstream log((fs::path(config.output_dir) / kTrainLogName).string());
  if (!log) throw Error(config.output_dir + ": cannot write training log");

  const StepPlan plan = plan_steps(data.train.size(), config);
  TrainState state = TrainState::initialize(config);
  FitResult result;
  result.best_checkpoint = ckpt_path;

  CheckpointMeta meta;
  meta.config_hash = config_hash(config);
  meta.run_config = to_key_values(config).to_string();

  auto run_validation = [&]() {
    EvalReport report = validate(state.student, data.val, config.eval_ratios);
    log << validation_to_json(state.step, report) << "\n";
    result.validation.push_back({state.step, report});
    if (report.ldiou > state.best_ldiou) {
      state.best_ldiou = report.ldiou;
      result.best_ldiou = report.ldiou;
      result.best_step = state.step;
      meta.step = state.step;
      meta.teacher_step = state.teacher.step;
      meta.best_ldiou = report.ldiou;
      save_checkpoint(ckpt_path, meta, state.student, &state.teacher.model);
    }
  };

  std::vector<std::size_t> order(data.train.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[state.shuffle_rng() % i]);
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      std::vector<const SitsSample*> batch;
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&data.train[order[i]]);
      const StepRecord rec = train_step(batch, state, config, plan);
      log << step_record_to_json(rec) << "\n";
      result.log.push_back(rec);
      if (state.step % config.validation_interval == 0 && state.step < plan.total_steps) run_validation();
    }
  }
  run_validation();
  return result;
}

FitResult fit(const RunConfig& config) {
  if (config.data_root.empty()) throw ConfigError("fit: data root is not set");
  return fit(config, load_dataset(config.data_root));
}

}  // namespace tea
