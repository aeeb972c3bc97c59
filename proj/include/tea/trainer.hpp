#pragma once

// Training loop: random crops for the student, full sequences for the EMA
// teacher, AdamW with linear warmup and cosine decay, periodic validation on
// the ratio ladder and best-checkpoint selection by LDIoU.

#include "tea/checkpoint.hpp"
#include "tea/config.hpp"
#include "tea/cropping.hpp"
#include "tea/data.hpp"
#include "tea/distillation.hpp"
#include "tea/metrics.hpp"
#include "tea/objective.hpp"

#include <functional>
#include <string>
#include <vector>

namespace tea {

// Decoupled weight decay Adam. Parameters that received no gradient in a step
// are left untouched, moments included.
class AdamW {
 public:
  AdamW() = default;
  explicit AdamW(const OptimizerConfig& config) : cfg_(config) {}

  void step(const std::vector<ad::Var<float>>& params, double lr);

 private:
  struct Slot {
    Matrix<float> m, v;
    long long t = 0;
  };
  OptimizerConfig cfg_;
  std::vector<Slot> slots_;
};

struct StepPlan {
  long long steps_per_epoch = 1;
  long long total_steps = 0;
};

StepPlan plan_steps(std::size_t train_samples, const RunConfig& config);

// Linear start -> peak over round(warmup_epochs * steps_per_epoch) steps, then
// cosine from peak to floor reached at the last step (total_steps - 1).
double learning_rate_at(long long step, const LearningRatePolicy& policy, const StepPlan& plan);

struct StepRecord {
  long long step = 0;
  double lr = 0;
  double decay = 0;
  LossComponents loss;  // mean over the batch

  bool operator==(const StepRecord&) const = default;
};

struct TrainState {
  TeaModel<float> student;
  TeacherState<float> teacher;
  AdamW optimizer;
  long long step = 0;
  double best_ldiou = -1;
  Rng shuffle_rng;
  Rng crop_rng;

  static TrainState initialize(const RunConfig& config);
};

// One optimizer step over `batch`; throws NonFiniteLoss naming the first bad
// component.
StepRecord train_step(const std::vector<const SitsSample*>& batch, TrainState& state, const RunConfig& config,
                      const StepPlan& plan);

// Pooled confusion matrix of the model over `samples` after `crop`.
ConfusionMatrix evaluate_samples(const TeaModel<float>& model, const std::vector<SitsSample>& samples,
                                 const std::function<SitsSample(const SitsSample&)>& crop);

// Prefix-crop evaluation at each ratio, plus mmIoU and LDIoU.
EvalReport validate(const TeaModel<float>& model, const std::vector<SitsSample>& samples,
                    const std::vector<double>& ratios);

// mIoU of every sliding (start, length) window.
std::vector<SweepCell> sweep(const TeaModel<float>& model, const std::vector<SitsSample>& samples,
                             const std::vector<double>& lengths, double step_ratio);

struct ValidationPoint {
  long long step = 0;
  EvalReport report;
};

struct FitResult {
  std::string best_checkpoint;
  double best_ldiou = 0;
  long long best_step = 0;
  std::vector<StepRecord> log;
  std::vector<ValidationPoint> validation;
};

inline constexpr const char* kBestCheckpointName = "best.ckpt";
inline constexpr const char* kTrainLogName = "train_log.jsonl";

// Trains on data.train, validates on data.val every validation_interval steps
// and after the last step, and keeps the best model in output_dir.
FitResult fit(const RunConfig& config, const DatasetSplits& data);
// Loads the dataset from config.data_root.
FitResult fit(const RunConfig& config);

std::string step_record_to_json(const StepRecord& record);

}  // namespace tea
