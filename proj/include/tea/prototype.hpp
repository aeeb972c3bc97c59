#pragma once

// Learnable per-class temporal prototypes. A crop's per-frame tokens are
// compared by cosine similarity with the prototype slot covering the frame's
// day offset, then averaged over valid frames to give an N x K class
// confidence map that is added to the segmentation scores.

#include "tea/autograd.hpp"
#include "tea/errors.hpp"
#include "tea/nn.hpp"

#include <algorithm>
#include <vector>

namespace tea {

inline constexpr double kCosineEps = 1e-6;

template <typename Scalar>
struct PrototypeBank {
  ad::Var<Scalar> prototypes;  // row k * slots + s, D columns
  Index classes = 0;
  Index slots = 0;
  int slot_span = 1;  // days per slot

  PrototypeBank() = default;
  PrototypeBank(Index num_classes, Index num_slots, Index dim, int span_days, Rng& rng)
      : prototypes(ad::parameter<Scalar>(truncated_normal<Scalar>(num_classes * num_slots, dim, kInitStd, rng))),
        classes(num_classes),
        slots(num_slots),
        slot_span(span_days) {
    if (num_slots < 1 || span_days < 1) throw ConfigError("prototype bank: slots and slot span must be positive");
  }

  Index slot_for_day(int day) const {
    return std::min<Index>(static_cast<Index>(std::max(day, 0) / slot_span), slots - 1);
  }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) const {
    fn(prefix + ".bank", prototypes);
  }
};

// sequence_tokens: row p * frames + t. Returns N x K, row p, column k.
template <typename Scalar>
ad::Var<Scalar> similarity_map(const ad::Var<Scalar>& sequence_tokens, Index patches, Index frames,
                               const std::vector<int>& day_offsets, const std::vector<bool>& valid_mask,
                               const PrototypeBank<Scalar>& bank) {
  if (sequence_tokens.rows() != patches * frames) throw InvalidInput("similarity_map: token count mismatch");
  if (sequence_tokens.cols() != bank.prototypes.cols()) throw InvalidInput("similarity_map: embedding width mismatch");
  if (static_cast<Index>(day_offsets.size()) != frames || static_cast<Index>(valid_mask.size()) != frames)
    throw InvalidInput("similarity_map: per-frame arrays do not match frames");
  std::vector<Index> valid;
  for (Index t = 0; t < frames; ++t)
    if (valid_mask[static_cast<std::size_t>(t)]) valid.push_back(t);
  if (valid.empty()) throw InvalidInput("similarity_map: no valid frames to average over");

  const Index K = bank.classes, V = static_cast<Index>(valid.size());
  std::vector<Index> token_rows, proto_rows;
  token_rows.reserve(static_cast<std::size_t>(patches * K * V));
  proto_rows.reserve(static_cast<std::size_t>(patches * K * V));
  for (Index p = 0; p < patches; ++p) {
    for (Index k = 0; k < K; ++k) {
      for (Index t : valid) {
        token_rows.push_back(p * frames + t);
        proto_rows.push_back(k * bank.slots + bank.slot_for_day(day_offsets[static_cast<std::size_t>(t)]));
      }
    }
  }
  auto cos = ad::row_cosine(ad::gather_rows(sequence_tokens, std::move(token_rows)),
                            ad::gather_rows(bank.prototypes, std::move(proto_rows)), static_cast<Scalar>(kCosineEps));
  return ad::reshape(ad::block_row_mean(cos, V), patches, K);
}

// scores + scale * similarity
template <typename Scalar>
ad::Var<Scalar> apply_confidence(const ad::Var<Scalar>& scores, const ad::Var<Scalar>& similarity,
                                 const ad::Var<Scalar>& scale) {
  return scores + ad::scale_by(similarity, scale);
}

}  // namespace tea
