#pragma once

// Layers shared by the encoders and heads. Each layer owns its parameters as
// Var handles and exposes them through visit(prefix, fn) so models can be
// enumerated, copied and serialized by name.

#include "tea/autograd.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace tea {

using Rng = std::mt19937_64;

// Normal(0, std) truncated to [-2 std, 2 std] by rejection.
template <typename Scalar>
Matrix<Scalar> truncated_normal(Index rows, Index cols, double std_dev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix<Scalar> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) {
    double z = normal(rng);
    while (std::abs(z) > 2.0) z = normal(rng);
    m.data()[i] = static_cast<Scalar>(z * std_dev);
  }
  return m;
}

inline constexpr double kInitStd = 0.02;

template <typename Scalar>
struct Linear {
  ad::Var<Scalar> weight;  // in x out
  ad::Var<Scalar> bias;    // 1 x out

  Linear() = default;
  Linear(Index in, Index out, Rng& rng)
      : weight(ad::parameter<Scalar>(truncated_normal<Scalar>(in, out, kInitStd, rng))),
        bias(ad::parameter<Scalar>(Matrix<Scalar>::Zero(1, out))) {}

  ad::Var<Scalar> operator()(const ad::Var<Scalar>& x) const { return ad::add_row(ad::matmul(x, weight), bias); }

  Index in_features() const { return weight.rows(); }
  Index out_features() const { return weight.cols(); }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) const {
    fn(prefix + ".weight", weight);
    fn(prefix + ".bias", bias);
  }
};

template <typename Scalar>
struct LayerNorm {
  ad::Var<Scalar> gain;
  ad::Var<Scalar> bias;

  LayerNorm() = default;
  explicit LayerNorm(Index dim)
      : gain(ad::parameter<Scalar>(Matrix<Scalar>::Ones(1, dim))),
        bias(ad::parameter<Scalar>(Matrix<Scalar>::Zero(1, dim))) {}

  ad::Var<Scalar> operator()(const ad::Var<Scalar>& x) const { return ad::layer_norm(x, gain, bias); }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) const {
    fn(prefix + ".gain", gain);
    fn(prefix + ".bias", bias);
  }
};

// Pre-norm transformer block: x + MHA(LN(x)), then x + MLP(LN(x)) with GELU.
template <typename Scalar>
struct TransformerBlock {
  LayerNorm<Scalar> attn_norm;
  Linear<Scalar> qkv;
  Linear<Scalar> proj;
  LayerNorm<Scalar> mlp_norm;
  Linear<Scalar> fc1;
  Linear<Scalar> fc2;
  Index heads = 1;

  TransformerBlock() = default;
  TransformerBlock(Index dim, Index mlp_dim, Index num_heads, Rng& rng)
      : attn_norm(dim),
        qkv(dim, 3 * dim, rng),
        proj(dim, dim, rng),
        mlp_norm(dim),
        fc1(dim, mlp_dim, rng),
        fc2(mlp_dim, dim, rng),
        heads(num_heads) {}

  // x: groups * length rows, each group attends only within itself.
  ad::Var<Scalar> operator()(const ad::Var<Scalar>& x, Index groups, Index length,
                             const std::vector<bool>& key_mask) const {
    auto attended = proj(ad::grouped_attention(qkv(attn_norm(x)), groups, length, heads, key_mask));
    auto h = x + attended;
    return h + fc2(ad::gelu(fc1(mlp_norm(h))));
  }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) const {
    attn_norm.visit(prefix + ".attn_norm", fn);
    qkv.visit(prefix + ".qkv", fn);
    proj.visit(prefix + ".proj", fn);
    mlp_norm.visit(prefix + ".mlp_norm", fn);
    fc1.visit(prefix + ".fc1", fn);
    fc2.visit(prefix + ".fc2", fn);
  }
};

}  // namespace tea
