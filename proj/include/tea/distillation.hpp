#pragma once

// Teacher lifecycle and the student-teacher alignment losses.
//
// The teacher shares the student's architecture, sees the full-length
// sequence, and is updated only by an exponential moving average of the
// student's parameters. Teacher outputs enter every loss as constants.

#include "tea/model.hpp"

#include <cmath>

namespace tea {

struct DecaySchedule {
  double warmup_fraction = 0.15;
  double warmup_start = 0.1;
  double warmup_end = 0.9;
  double final_decay = 0.999;
  long long total_steps = 1;

  void validate() const;
  long long warmup_steps() const;
  // Rate of the exponential approach after warmup.
  double rate() const;
};

// Linear warmup_start -> warmup_end over the warmup steps, then
// final - (final - warmup_end) * exp(-rate * (step - warmup_steps)).
double decay_at(long long step, const DecaySchedule& schedule);

// teacher <- decay * teacher + (1 - decay) * student, parameter-wise.
template <typename Scalar>
void ema_update(const TeaModel<Scalar>& teacher, const TeaModel<Scalar>& student, double decay) {
  if (!(decay >= 0.0 && decay <= 1.0)) throw InvalidInput("ema_update: decay must be in [0, 1]");
  auto t = teacher.named_parameters();
  auto s = student.named_parameters();
  TeaModel<Scalar>::check_same_schema(t, s);
  const Scalar keep = static_cast<Scalar>(decay);
  const Scalar take = static_cast<Scalar>(1.0 - decay);
  for (std::size_t i = 0; i < t.size(); ++i) {
    Matrix<Scalar>& tv = t[i].second.mutable_value();
    if (decay == 1.0) continue;
    if (decay == 0.0) {
      tv = s[i].second.value();
    } else {
      tv = keep * tv + take * s[i].second.value();
    }
  }
}

template <typename Scalar>
struct TeacherState {
  TeaModel<Scalar> model;
  long long step = 0;

  // Teacher starts as a copy of the student.
  static TeacherState from_student(const TeaModel<Scalar>& student) { return {student.clone(), 0}; }

  void update(const TeaModel<Scalar>& student, const DecaySchedule& schedule) {
    ema_update(model, student, decay_at(std::min(step, schedule.total_steps), schedule));
    ++step;
  }
};

// Class tokens (N*K x d, row p * K + k) mean-pooled over patches -> K x d.
template <typename Scalar>
ad::Var<Scalar> pool_class_tokens(const ad::Var<Scalar>& class_tokens, Index patches, Index classes) {
  if (class_tokens.rows() != patches * classes) throw InvalidInput("pool_class_tokens: row count mismatch");
  std::vector<Index> by_class(static_cast<std::size_t>(patches * classes));
  for (Index k = 0; k < classes; ++k)
    for (Index p = 0; p < patches; ++p) by_class[static_cast<std::size_t>(k * patches + p)] = p * classes + k;
  return ad::block_row_mean(ad::gather_rows(class_tokens, std::move(by_class)), patches);
}

// Mean squared difference over classes and embedding (one sample; batch
// losses are averaged over samples, giving the B*K*d normalization).
template <typename Scalar>
ad::Var<Scalar> temporal_distill_loss(const ad::Var<Scalar>& student, const Matrix<Scalar>& teacher) {
  if (student.rows() != teacher.rows() || student.cols() != teacher.cols())
    throw InvalidInput("temporal_distill_loss: shape mismatch");
  return ad::mse(student, ad::constant<Scalar>(teacher));
}

// Mean squared difference over the K*(N+1) spatial tokens (class tokens
// included) and the embedding.
template <typename Scalar>
ad::Var<Scalar> spatial_distill_loss(const ad::Var<Scalar>& student, const Matrix<Scalar>& teacher) {
  if (student.rows() != teacher.rows() || student.cols() != teacher.cols())
    throw InvalidInput("spatial_distill_loss: shape mismatch");
  return ad::mse(student, ad::constant<Scalar>(teacher));
}

// Mean squared difference between student (crop) and teacher (full sequence)
// prototype similarity maps.
template <typename Scalar>
ad::Var<Scalar> prototype_align_loss(const ad::Var<Scalar>& student, const Matrix<Scalar>& teacher) {
  if (student.rows() != teacher.rows() || student.cols() != teacher.cols())
    throw InvalidInput("prototype_align_loss: shape mismatch");
  return ad::mse(student, ad::constant<Scalar>(teacher));
}

template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& logits, Scalar temperature) {
  Matrix<Scalar> p = logits / temperature;
  ColVector<Scalar> mx = p.rowwise().maxCoeff();
  p = (p.colwise() - mx).array().exp();
  ColVector<Scalar> z = p.rowwise().sum();
  return p.array().colwise() / z.array();
}

// Pixelwise cross-entropy of the student's tempered distribution against the
// teacher's tempered distribution.
template <typename Scalar>
ad::Var<Scalar> soft_label_loss(const ad::Var<Scalar>& student_logits, const Matrix<Scalar>& teacher_logits,
                                Scalar temperature) {
  if (!(temperature > 0)) throw InvalidInput("soft_label_loss: temperature must be positive");
  if (student_logits.rows() != teacher_logits.rows() || student_logits.cols() != teacher_logits.cols())
    throw InvalidInput("soft_label_loss: shape mismatch");
  return ad::soft_cross_entropy(student_logits, softmax_rows(teacher_logits, temperature), temperature);
}

}  // namespace tea
