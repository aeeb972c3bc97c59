#pragma once

// Per-sample training objective: segmentation cross-entropy plus the weighted
// teacher alignment and reconstruction terms. Terms with zero weight are not
// built, so a cross-entropy-only configuration records exactly the graph of a
// plain supervised trainer.

#include "tea/config.hpp"
#include "tea/distillation.hpp"
#include "tea/model.hpp"
#include "tea/reconstruction.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace tea {

// Teacher outputs on the full-length sequence, detached from any graph.
template <typename Scalar>
struct TeacherTargets {
  Matrix<Scalar> pooled_class_tokens;  // K x d
  Matrix<Scalar> spatial_tokens;       // K*(N+1) x d
  Matrix<Scalar> similarity;           // N x K, empty when unavailable
  Matrix<Scalar> logits;               // H*W x K
};

template <typename Scalar>
TeacherTargets<Scalar> teacher_targets(const TeaModel<Scalar>& teacher, const ModelInput<Scalar>& full) {
  ad::NoGradGuard no_grad;
  const auto out = teacher.forward(full);
  TeacherTargets<Scalar> t;
  const Index K = teacher.config().backbone.num_classes;
  t.pooled_class_tokens = pool_class_tokens(out.temporal.class_tokens, out.temporal.patches, K).value();
  t.spatial_tokens = out.spatial.all_tokens.value();
  if (out.similarity.defined()) t.similarity = out.similarity.value();
  t.logits = out.logits.value();
  return t;
}

struct LossComponents {
  double ce = 0;
  double temporal = 0;
  double spatial = 0;
  double prototype = 0;
  double reconstruction = 0;
  double soft = 0;
  double total = 0;

  LossComponents& operator+=(const LossComponents& o) {
    ce += o.ce;
    temporal += o.temporal;
    spatial += o.spatial;
    prototype += o.prototype;
    reconstruction += o.reconstruction;
    soft += o.soft;
    total += o.total;
    return *this;
  }
  LossComponents& operator*=(double s) {
    ce *= s;
    temporal *= s;
    spatial *= s;
    prototype *= s;
    reconstruction *= s;
    soft *= s;
    total *= s;
    return *this;
  }
  bool operator==(const LossComponents&) const = default;
};

class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(const std::string& component)
      : Error("non-finite loss component: " + component), component_(component) {}
  const std::string& component() const { return component_; }

 private:
  std::string component_;
};

template <typename Scalar>
struct SampleObjective {
  ad::Var<Scalar> total;
  LossComponents components;
};

// Builds the weighted objective for one (crop, labels) pair. `teacher` may be
// null when every alignment weight is zero. The prototype term is skipped when
// either side has no similarity map (no valid frame).
template <typename Scalar>
SampleObjective<Scalar> sample_objective(const TeaModel<Scalar>& student, const ModelInput<Scalar>& crop,
                                         const std::vector<int>& labels, const TeacherTargets<Scalar>* teacher,
                                         const LossWeights& w) {
  if (w.needs_teacher() && !teacher) throw InvalidInput("sample_objective: alignment weights need teacher targets");
  const bool any_valid = std::find(crop.valid_mask.begin(), crop.valid_mask.end(), true) != crop.valid_mask.end();
  const auto out = student.forward(crop, w.reconstruction > 0 && any_valid);
  const Index K = student.config().backbone.num_classes;

  SampleObjective<Scalar> obj;
  auto& c = obj.components;
  std::vector<std::pair<double, ad::Var<Scalar>>> terms;
  auto add = [&](const char* name, double weight, double& slot, const ad::Var<Scalar>& loss) {
    slot = static_cast<double>(loss.item());
    if (!std::isfinite(slot)) throw NonFiniteLoss(name);
    terms.emplace_back(weight, loss);
  };

  if (w.ce > 0) add("ce", w.ce, c.ce, ad::cross_entropy(out.logits, labels));
  if (w.temporal > 0)
    add("temporal", w.temporal, c.temporal,
        temporal_distill_loss(pool_class_tokens(out.temporal.class_tokens, out.temporal.patches, K),
                              teacher->pooled_class_tokens));
  if (w.spatial > 0)
    add("spatial", w.spatial, c.spatial, spatial_distill_loss(out.spatial.all_tokens, teacher->spatial_tokens));
  if (w.prototype > 0 && out.similarity.defined() && teacher->similarity.size() > 0)
    add("prototype", w.prototype, c.prototype, prototype_align_loss(out.similarity, teacher->similarity));
  if (w.reconstruction > 0 && out.reconstruction.defined())
    add("reconstruction", w.reconstruction, c.reconstruction,
        reconstruction_loss(out.reconstruction, crop.patches, out.temporal.patches, crop.valid_mask));
  if (w.soft > 0)
    add("soft", w.soft, c.soft, soft_label_loss(out.logits, teacher->logits, static_cast<Scalar>(w.temperature)));

  if (terms.empty()) throw ConfigError("sample_objective: every loss weight is zero");
  obj.total = terms.front().second * static_cast<Scalar>(terms.front().first);
  for (std::size_t i = 1; i < terms.size(); ++i) obj.total = obj.total + terms[i].second * static_cast<Scalar>(terms[i].first);
  c.total = c.ce * w.ce + c.temporal * w.temporal + c.spatial * w.spatial + c.prototype * w.prototype +
            c.reconstruction * w.reconstruction + c.soft * w.soft;
  if (!std::isfinite(c.total)) throw NonFiniteLoss("total");
  return obj;
}

}  // namespace tea
