#pragma once

// Auxiliary decoder from per-frame temporal tokens back to input patches.

#include "tea/autograd.hpp"
#include "tea/errors.hpp"
#include "tea/nn.hpp"

#include <vector>

namespace tea {

struct ReconDecoderConfig {
  std::vector<int> hidden;  // widths of GELU hidden layers, empty for a single projection
  int patch_height = 2;
  int patch_width = 2;
  int channels = 4;

  int output_features() const { return patch_height * patch_width * channels; }
};

template <typename Scalar>
struct ReconstructionDecoder {
  std::vector<Linear<Scalar>> layers;
  ReconDecoderConfig config;

  ReconstructionDecoder() = default;
  ReconstructionDecoder(Index dim, const ReconDecoderConfig& cfg, Rng& rng) : config(cfg) {
    Index in = dim;
    for (int width : cfg.hidden) {
      if (width <= 0) throw ConfigError("reconstruction: hidden widths must be positive");
      layers.emplace_back(in, width, rng);
      in = width;
    }
    layers.emplace_back(in, cfg.output_features(), rng);
  }

  // (N*T x d) tokens -> (N*T x h*w*C) patches in patchify order.
  ad::Var<Scalar> operator()(const ad::Var<Scalar>& sequence_tokens) const {
    if (layers.empty() || sequence_tokens.cols() != layers.front().in_features())
      throw ConfigError("reconstruction: token width does not match decoder");
    ad::Var<Scalar> x = sequence_tokens;
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) x = ad::gelu(layers[i](x));
    return layers.back()(x);
  }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) const {
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].visit(prefix + "." + std::to_string(i), fn);
  }
};

// Row weights selecting the valid frames of a (N*T)-row patch matrix.
template <typename Scalar>
ColVector<Scalar> frame_row_weights(Index patches, const std::vector<bool>& valid_mask) {
  const Index T = static_cast<Index>(valid_mask.size());
  ColVector<Scalar> w(patches * T);
  for (Index p = 0; p < patches; ++p)
    for (Index t = 0; t < T; ++t) w(p * T + t) = valid_mask[static_cast<std::size_t>(t)] ? Scalar(1) : Scalar(0);
  return w;
}

// Mean squared error over every pixel and channel of the valid frames.
template <typename Scalar>
ad::Var<Scalar> reconstruction_loss(const ad::Var<Scalar>& reconstructed, const Matrix<Scalar>& original, Index patches,
                                    const std::vector<bool>& valid_mask) {
  if (reconstructed.rows() != original.rows() || reconstructed.cols() != original.cols())
    throw InvalidInput("reconstruction_loss: shape mismatch");
  return ad::weighted_mse(reconstructed, ad::constant<Scalar>(original), frame_row_weights<Scalar>(patches, valid_mask));
}

// Same loss on image-layout (T x C x H x W) arrays.
double reconstruction_loss(const std::vector<float>& original, const std::vector<float>& reconstructed, int frames,
                           const std::vector<bool>& valid_mask);

}  // namespace tea
