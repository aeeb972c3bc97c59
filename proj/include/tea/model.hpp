#pragma once

// The full segmentation network: backbone, prototype bank with its learnable
// confidence scale, and the reconstruction decoder.

#include "tea/backbone.hpp"
#include "tea/prototype.hpp"
#include "tea/reconstruction.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace tea {

struct ModelConfig {
  BackboneConfig backbone;
  int prototype_slots = 24;
  int slot_span = 15;  // days per prototype slot
  bool use_prototypes = true;
  std::vector<int> recon_hidden;

  void validate() const {
    backbone.validate();
    if (prototype_slots < 1 || slot_span < 1) throw ConfigError("model: prototype slots and span must be positive");
    for (int w : recon_hidden)
      if (w <= 0) throw ConfigError("model: reconstruction hidden widths must be positive");
  }

  ReconDecoderConfig recon_config() const {
    return {recon_hidden, backbone.patch_height, backbone.patch_width, backbone.channels};
  }

  bool operator==(const ModelConfig&) const = default;
};

// A sample (or crop) prepared for the network.
template <typename Scalar>
struct ModelInput {
  Matrix<Scalar> patches;  // N*T x h*w*C
  Index frames = 0;
  std::vector<int> day_offsets;
  std::vector<bool> valid_mask;
};

template <typename Scalar>
ModelInput<Scalar> make_input(const SitsSample& sample, const BackboneConfig& cfg) {
  return {patchify<Scalar>(sample, cfg), sample.frames, sample.day_offsets, sample.valid_mask};
}

template <typename Scalar>
struct ForwardResult {
  TemporalOutput<Scalar> temporal;
  SpatialOutput<Scalar> spatial;
  ad::Var<Scalar> similarity;      // N x K; undefined without prototypes or valid frames
  ad::Var<Scalar> logits;          // H*W x K
  ad::Var<Scalar> reconstruction;  // N*T x h*w*C; undefined unless requested
};

template <typename Scalar>
class TeaModel {
 public:
  TeaModel() = default;
  TeaModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    backbone = Backbone<Scalar>(cfg.backbone, rng);
    prototypes = PrototypeBank<Scalar>(cfg.backbone.num_classes, cfg.prototype_slots, cfg.backbone.dim, cfg.slot_span, rng);
    confidence_scale = ad::parameter<Scalar>(Matrix<Scalar>::Ones(1, 1));
    decoder = ReconstructionDecoder<Scalar>(cfg.backbone.dim, cfg.recon_config(), rng);
  }

  const ModelConfig& config() const { return cfg_; }

  ForwardResult<Scalar> forward(const ModelInput<Scalar>& in, bool with_reconstruction = false) const {
    ForwardResult<Scalar> out;
    out.temporal = backbone.temporal_encode(backbone.tokenize(in.patches, in.frames), in.day_offsets, in.valid_mask);
    out.spatial = backbone.spatial_encode(out.temporal.class_tokens);
    const bool any_valid = std::find(in.valid_mask.begin(), in.valid_mask.end(), true) != in.valid_mask.end();
    if (cfg_.use_prototypes && any_valid) {
      out.similarity = similarity_map(out.temporal.sequence_tokens, out.temporal.patches, out.temporal.frames,
                                      in.day_offsets, in.valid_mask, prototypes);
      auto confidence = ad::scale_by(out.similarity, confidence_scale);
      out.logits = backbone.segment(out.spatial.dense_tokens, &confidence);
    } else {
      out.logits = backbone.segment(out.spatial.dense_tokens);
    }
    if (with_reconstruction) out.reconstruction = decoder(out.temporal.sequence_tokens);
    return out;
  }

  ForwardResult<Scalar> forward(const SitsSample& sample, bool with_reconstruction = false) const {
    return forward(make_input<Scalar>(sample, cfg_.backbone), with_reconstruction);
  }

  // Visits every parameter as (name, handle) in a fixed order.
  template <typename Fn>
  void visit(Fn&& fn) const {
    backbone.visit("backbone", fn);
    prototypes.visit("prototype", fn);
    fn(std::string("prototype.confidence_scale"), confidence_scale);
    decoder.visit("reconstruction", fn);
  }

  std::vector<std::pair<std::string, ad::Var<Scalar>>> named_parameters() const {
    std::vector<std::pair<std::string, ad::Var<Scalar>>> out;
    visit([&](const std::string& name, const ad::Var<Scalar>& v) { out.emplace_back(name, v); });
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const ad::Var<Scalar>& v) { n += static_cast<std::size_t>(v.value().size()); });
    return n;
  }

  void zero_grad() const {
    visit([](const std::string&, const ad::Var<Scalar>& v) { v.zero_grad(); });
  }

  // Copies parameter values from a model with the same schema.
  void copy_values_from(const TeaModel& other) const {
    auto mine = named_parameters();
    auto theirs = other.named_parameters();
    check_same_schema(mine, theirs);
    for (std::size_t i = 0; i < mine.size(); ++i) mine[i].second.mutable_value() = theirs[i].second.value();
  }

  // Deep copy with independent parameter storage.
  TeaModel clone() const {
    TeaModel copy(cfg_, 0);
    copy.copy_values_from(*this);
    return copy;
  }

  static void check_same_schema(const std::vector<std::pair<std::string, ad::Var<Scalar>>>& a,
                                const std::vector<std::pair<std::string, ad::Var<Scalar>>>& b) {
    if (a.size() != b.size()) throw InvalidInput("parameter schema mismatch: different parameter counts");
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].first != b[i].first || a[i].second.rows() != b[i].second.rows() ||
          a[i].second.cols() != b[i].second.cols())
        throw InvalidInput("parameter schema mismatch at " + a[i].first);
    }
  }

  Backbone<Scalar> backbone;
  PrototypeBank<Scalar> prototypes;
  ad::Var<Scalar> confidence_scale;
  ReconstructionDecoder<Scalar> decoder;

 private:
  ModelConfig cfg_;
};

}  // namespace tea
