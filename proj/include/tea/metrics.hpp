#pragma once

// Segmentation scoring: confusion matrices, mIoU, and the length-weighted
// summaries over a ratio ladder (mmIoU and length-decayed mIoU).

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace tea {

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes = 0);

  int num_classes() const { return k_; }
  std::uint64_t at(int truth, int predicted) const { return counts_[index(truth, predicted)]; }
  std::uint64_t total() const;

  void add(int truth, int predicted, std::uint64_t count = 1);
  void add(const std::vector<int>& truth, const std::vector<int>& predicted);
  void merge(const ConfusionMatrix& other);

  // IoU per class; classes with zero union are reported as NaN.
  std::vector<double> class_iou() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t index(int truth, int predicted) const;

  int k_ = 0;
  std::vector<std::uint64_t> counts_;  // row = truth, column = prediction
};

// Mean IoU over classes with nonzero union.
double miou(const ConfusionMatrix& cm);

// Weights (1 / tau_j) / sum_k (1 / tau_k).
std::vector<double> length_decay_weights(const std::vector<double>& lengths);

// Sum_j w_j * miou_j with length_decay_weights.
double ldiou(const std::vector<double>& per_ratio_miou, const std::vector<double>& lengths);

double mmiou(const std::vector<double>& per_ratio_miou);

struct SweepCell {
  double start = 0;   // start ratio
  double length = 0;  // length ratio
  double miou = 0;

  bool operator==(const SweepCell&) const = default;
};

struct EvalReport {
  std::vector<double> ratios;
  std::vector<double> per_ratio_miou;
  double mmiou = 0;
  double ldiou = 0;
  std::vector<SweepCell> sweep;

  bool operator==(const EvalReport&) const = default;
};

// Fills mmiou and ldiou from ratios and per_ratio_miou (tau_j = ratio).
void finalize_report(EvalReport& report);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
void save_report(const EvalReport& report, const std::string& path);
EvalReport load_report(const std::string& path);

// kind,start,length,miou rows: one per ratio, one per sweep cell, then summaries.
std::string report_to_csv(const EvalReport& report);

// Human-readable table with one column per ratio plus mmIoU and LDIoU (percent).
std::string report_to_table(const EvalReport& report, const std::string& label = "model");

}  // namespace tea
