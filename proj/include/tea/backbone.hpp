#pragma once

// Factorized temporal-then-spatial transformer for SITS segmentation.
//
//   patches (N*T x h*w*C) --tokenize--> (N*T x d)
//   + temporal position row looked up by day offset
//   per patch: [K class tokens | T frame tokens] --temporal blocks-->
//       class tokens (N*K x d), sequence tokens (N*T x d)
//   per class stream: [spatial class token | N patch tokens + P_S] --spatial blocks-->
//       global (K x d), dense (K*N x d)
//   dense --linear--> h*w scores per class per patch --unfold--> logits (H*W x K)
//
// N = number of patches. All token matrices are row-major with the layouts
// noted on each struct below.

#include "tea/autograd.hpp"
#include "tea/data.hpp"
#include "tea/errors.hpp"
#include "tea/nn.hpp"

#include <string>
#include <vector>

namespace tea {

struct BackboneConfig {
  int image_height = 16;
  int image_width = 16;
  int channels = 4;
  int patch_height = 2;
  int patch_width = 2;
  int dim = 32;
  int temporal_depth = 2;
  int spatial_depth = 2;
  int heads = 4;
  int mlp_dim = 64;
  int num_classes = 4;
  int max_day_offset = 400;  // rows in the temporal position table

  int patches_y() const { return image_height / patch_height; }
  int patches_x() const { return image_width / patch_width; }
  int num_patches() const { return patches_y() * patches_x(); }
  int patch_pixels() const { return patch_height * patch_width; }
  int patch_features() const { return patch_pixels() * channels; }

  void validate() const {
    if (image_height <= 0 || image_width <= 0 || channels <= 0) throw ConfigError("backbone: image shape must be positive");
    if (patch_height <= 0 || patch_width <= 0) throw ConfigError("backbone: patch size must be positive");
    if (image_height % patch_height != 0 || image_width % patch_width != 0)
      throw ConfigError("backbone: image size must be divisible by the patch size");
    if (dim <= 0 || heads <= 0 || dim % heads != 0) throw ConfigError("backbone: dim must be divisible by heads");
    if (temporal_depth < 0 || spatial_depth < 0 || mlp_dim <= 0) throw ConfigError("backbone: bad depth or mlp width");
    if (num_classes < 1) throw ConfigError("backbone: num_classes must be positive");
    if (max_day_offset <= 0) throw ConfigError("backbone: max_day_offset must be positive");
  }

  bool operator==(const BackboneConfig&) const = default;
};

// Patch tokens, row p * frames + t.
template <typename Scalar>
struct TokenGrid {
  ad::Var<Scalar> tokens;
  Index patches = 0;
  Index frames = 0;
};

template <typename Scalar>
struct TemporalOutput {
  ad::Var<Scalar> class_tokens;     // row p * K + k
  ad::Var<Scalar> sequence_tokens;  // row p * T + t
  Index patches = 0;
  Index frames = 0;
};

template <typename Scalar>
struct SpatialOutput {
  ad::Var<Scalar> global_tokens;  // row k
  ad::Var<Scalar> dense_tokens;   // row k * N + p
  ad::Var<Scalar> all_tokens;     // row k * (N + 1) + i, i = 0 is the stream's class token
};

// (T x C x H x W) values -> (N*T x h*w*C), feature order (c, dy, dx).
template <typename Scalar>
Matrix<Scalar> patchify(const SitsSample& sample, const BackboneConfig& cfg) {
  if (sample.channels != cfg.channels || sample.height != cfg.image_height || sample.width != cfg.image_width)
    throw ConfigError("patchify: sample " + sample.sample_id + " shape does not match backbone config");
  const int T = sample.frames, ph = cfg.patch_height, pw = cfg.patch_width, nx = cfg.patches_x();
  Matrix<Scalar> out(static_cast<Index>(cfg.num_patches()) * T, cfg.patch_features());
  for (int p = 0; p < cfg.num_patches(); ++p) {
    const int y0 = (p / nx) * ph, x0 = (p % nx) * pw;
    for (int t = 0; t < T; ++t) {
      auto row = out.row(static_cast<Index>(p) * T + t);
      Index f = 0;
      for (int c = 0; c < cfg.channels; ++c)
        for (int dy = 0; dy < ph; ++dy)
          for (int dx = 0; dx < pw; ++dx) row(f++) = static_cast<Scalar>(sample.at(t, c, y0 + dy, x0 + dx));
    }
  }
  return out;
}

// Inverse of patchify: (N*T x h*w*C) -> T x C x H x W values.
template <typename Scalar>
std::vector<float> unpatchify(const Matrix<Scalar>& patches, int frames, const BackboneConfig& cfg) {
  if (patches.rows() != static_cast<Index>(cfg.num_patches()) * frames || patches.cols() != cfg.patch_features())
    throw ConfigError("unpatchify: patch matrix does not match geometry");
  const int ph = cfg.patch_height, pw = cfg.patch_width, nx = cfg.patches_x();
  const int H = cfg.image_height, W = cfg.image_width, C = cfg.channels;
  std::vector<float> out(static_cast<std::size_t>(frames) * C * H * W);
  for (int p = 0; p < cfg.num_patches(); ++p) {
    const int y0 = (p / nx) * ph, x0 = (p % nx) * pw;
    for (int t = 0; t < frames; ++t) {
      auto row = patches.row(static_cast<Index>(p) * frames + t);
      Index f = 0;
      for (int c = 0; c < C; ++c)
        for (int dy = 0; dy < ph; ++dy)
          for (int dx = 0; dx < pw; ++dx)
            out[((static_cast<std::size_t>(t) * C + c) * H + y0 + dy) * W + x0 + dx] = static_cast<float>(row(f++));
    }
  }
  return out;
}

// Logits (H*W x K) -> per-pixel argmax labels.
template <typename Scalar>
std::vector<int> argmax_labels(const Matrix<Scalar>& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Index i = 0; i < logits.rows(); ++i) {
    Index best = 0;
    logits.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

template <typename Scalar>
class Backbone {
 public:
  Backbone() = default;
  Backbone(const BackboneConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const Index d = cfg.dim;
    tokenizer = Linear<Scalar>(cfg.patch_features(), d, rng);
    temporal_pos = ad::parameter<Scalar>(truncated_normal<Scalar>(cfg.max_day_offset, d, kInitStd, rng));
    temporal_cls = ad::parameter<Scalar>(truncated_normal<Scalar>(cfg.num_classes, d, kInitStd, rng));
    for (int i = 0; i < cfg.temporal_depth; ++i) temporal_blocks.emplace_back(d, cfg.mlp_dim, cfg.heads, rng);
    temporal_norm = LayerNorm<Scalar>(d);
    spatial_pos = ad::parameter<Scalar>(truncated_normal<Scalar>(cfg.num_patches(), d, kInitStd, rng));
    spatial_cls = ad::parameter<Scalar>(truncated_normal<Scalar>(cfg.num_classes, d, kInitStd, rng));
    for (int i = 0; i < cfg.spatial_depth; ++i) spatial_blocks.emplace_back(d, cfg.mlp_dim, cfg.heads, rng);
    spatial_norm = LayerNorm<Scalar>(d);
    seg_head = Linear<Scalar>(d, cfg.patch_pixels(), rng);
    cls_head = Linear<Scalar>(d, 1, rng);
  }

  const BackboneConfig& config() const { return cfg_; }

  TokenGrid<Scalar> tokenize(const Matrix<Scalar>& patches, Index frames) const {
    const Index n = cfg_.num_patches();
    if (frames < 1 || patches.rows() != n * frames || patches.cols() != cfg_.patch_features())
      throw ConfigError("tokenize: patch matrix is " + std::to_string(patches.rows()) + "x" +
                        std::to_string(patches.cols()) + ", expected " + std::to_string(n * frames) + "x" +
                        std::to_string(cfg_.patch_features()));
    return {tokenizer(ad::constant<Scalar>(patches)), n, frames};
  }

  TemporalOutput<Scalar> temporal_encode(const TokenGrid<Scalar>& grid, const std::vector<int>& day_offsets,
                                         const std::vector<bool>& valid_mask) const {
    const Index n = grid.patches, T = grid.frames, K = cfg_.num_classes, L = K + T;
    if (static_cast<Index>(day_offsets.size()) != T || static_cast<Index>(valid_mask.size()) != T)
      throw InvalidInput("temporal_encode: per-frame arrays do not match token grid");
    for (int day : day_offsets) {
      if (day < 0 || day >= cfg_.max_day_offset)
        throw std::out_of_range("temporal_encode: day offset " + std::to_string(day) + " outside position table of " +
                                std::to_string(cfg_.max_day_offset));
    }
    std::vector<Index> pos_index(static_cast<std::size_t>(n * T));
    for (Index p = 0; p < n; ++p)
      for (Index t = 0; t < T; ++t) pos_index[static_cast<std::size_t>(p * T + t)] = day_offsets[static_cast<std::size_t>(t)];
    auto frames = grid.tokens + ad::gather_rows(temporal_pos, std::move(pos_index));

    std::vector<Index> layout(static_cast<std::size_t>(n * L));
    for (Index p = 0; p < n; ++p) {
      for (Index k = 0; k < K; ++k) layout[static_cast<std::size_t>(p * L + k)] = k;
      for (Index t = 0; t < T; ++t) layout[static_cast<std::size_t>(p * L + K + t)] = K + p * T + t;
    }
    auto x = ad::gather_rows(ad::concat_rows<Scalar>({temporal_cls, frames}), std::move(layout));

    std::vector<bool> key_mask(static_cast<std::size_t>(L), true);
    for (Index t = 0; t < T; ++t) key_mask[static_cast<std::size_t>(K + t)] = valid_mask[static_cast<std::size_t>(t)];
    for (const auto& block : temporal_blocks) x = block(x, n, L, key_mask);
    x = temporal_norm(x);

    std::vector<Index> cls_rows, seq_rows;
    cls_rows.reserve(static_cast<std::size_t>(n * K));
    seq_rows.reserve(static_cast<std::size_t>(n * T));
    for (Index p = 0; p < n; ++p) {
      for (Index k = 0; k < K; ++k) cls_rows.push_back(p * L + k);
      for (Index t = 0; t < T; ++t) seq_rows.push_back(p * L + K + t);
    }
    return {ad::gather_rows(x, std::move(cls_rows)), ad::gather_rows(x, std::move(seq_rows)), n, T};
  }

  SpatialOutput<Scalar> spatial_encode(const ad::Var<Scalar>& class_tokens) const {
    const Index n = cfg_.num_patches(), K = cfg_.num_classes, L = n + 1;
    if (class_tokens.rows() != n * K || class_tokens.cols() != cfg_.dim)
      throw InvalidInput("spatial_encode: expected (N*K x d) class tokens");
    std::vector<Index> to_streams(static_cast<std::size_t>(K * n)), pos_index(static_cast<std::size_t>(K * n));
    for (Index k = 0; k < K; ++k) {
      for (Index p = 0; p < n; ++p) {
        to_streams[static_cast<std::size_t>(k * n + p)] = p * K + k;
        pos_index[static_cast<std::size_t>(k * n + p)] = p;
      }
    }
    auto streams = ad::gather_rows(class_tokens, std::move(to_streams)) + ad::gather_rows(spatial_pos, std::move(pos_index));

    std::vector<Index> layout(static_cast<std::size_t>(K * L));
    for (Index k = 0; k < K; ++k) {
      layout[static_cast<std::size_t>(k * L)] = k;
      for (Index p = 0; p < n; ++p) layout[static_cast<std::size_t>(k * L + 1 + p)] = K + k * n + p;
    }
    auto x = ad::gather_rows(ad::concat_rows<Scalar>({spatial_cls, streams}), std::move(layout));
    const std::vector<bool> key_mask(static_cast<std::size_t>(L), true);
    for (const auto& block : spatial_blocks) x = block(x, K, L, key_mask);
    x = spatial_norm(x);

    std::vector<Index> global_rows, dense_rows;
    for (Index k = 0; k < K; ++k) {
      global_rows.push_back(k * L);
      for (Index p = 0; p < n; ++p) dense_rows.push_back(k * L + 1 + p);
    }
    return {ad::gather_rows(x, std::move(global_rows)), ad::gather_rows(x, std::move(dense_rows)), x};
  }

  // Per-pixel logits (H*W x K). `confidence` (N x K), if given, is added to
  // every pixel score of its patch and class.
  ad::Var<Scalar> segment(const ad::Var<Scalar>& dense_tokens, const ad::Var<Scalar>* confidence = nullptr) const {
    const Index n = cfg_.num_patches(), K = cfg_.num_classes, pp = cfg_.patch_pixels();
    if (dense_tokens.rows() != K * n) throw InvalidInput("segment: expected (K*N x d) dense tokens");
    auto scores = seg_head(dense_tokens);  // row k * N + p, column dy * pw + dx
    if (confidence) {
      if (confidence->rows() != n || confidence->cols() != K) throw InvalidInput("segment: confidence must be N x K");
      std::vector<Index> idx(static_cast<std::size_t>(K * n));
      for (Index k = 0; k < K; ++k)
        for (Index p = 0; p < n; ++p) idx[static_cast<std::size_t>(k * n + p)] = p * K + k;
      scores = ad::add_col(scores, ad::gather_elements(*confidence, K * n, 1, std::move(idx)));
    }
    const int H = cfg_.image_height, W = cfg_.image_width, ph = cfg_.patch_height, pw = cfg_.patch_width;
    const int nx = cfg_.patches_x();
    std::vector<Index> unfold(static_cast<std::size_t>(H) * W * K);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const Index p = (y / ph) * nx + (x / pw);
        const Index off = (y % ph) * pw + (x % pw);
        for (Index k = 0; k < K; ++k)
          unfold[(static_cast<std::size_t>(y) * W + x) * K + k] = (k * n + p) * pp + off;
      }
    }
    return ad::gather_elements(scores, static_cast<Index>(H) * W, K, std::move(unfold));
  }

  // Class logits (K x 1) from the spatial global tokens.
  ad::Var<Scalar> classify(const ad::Var<Scalar>& global_tokens) const { return cls_head(global_tokens); }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) const {
    tokenizer.visit(prefix + ".tokenizer", fn);
    fn(prefix + ".temporal_pos", temporal_pos);
    fn(prefix + ".temporal_cls", temporal_cls);
    for (std::size_t i = 0; i < temporal_blocks.size(); ++i)
      temporal_blocks[i].visit(prefix + ".temporal." + std::to_string(i), fn);
    temporal_norm.visit(prefix + ".temporal_norm", fn);
    fn(prefix + ".spatial_pos", spatial_pos);
    fn(prefix + ".spatial_cls", spatial_cls);
    for (std::size_t i = 0; i < spatial_blocks.size(); ++i)
      spatial_blocks[i].visit(prefix + ".spatial." + std::to_string(i), fn);
    spatial_norm.visit(prefix + ".spatial_norm", fn);
    seg_head.visit(prefix + ".seg_head", fn);
    cls_head.visit(prefix + ".cls_head", fn);
  }

  Linear<Scalar> tokenizer;
  ad::Var<Scalar> temporal_pos;  // max_day_offset x d
  ad::Var<Scalar> temporal_cls;  // K x d
  std::vector<TransformerBlock<Scalar>> temporal_blocks;
  LayerNorm<Scalar> temporal_norm;
  ad::Var<Scalar> spatial_pos;  // N x d
  ad::Var<Scalar> spatial_cls;  // K x d
  std::vector<TransformerBlock<Scalar>> spatial_blocks;
  LayerNorm<Scalar> spatial_norm;
  Linear<Scalar> seg_head;
  Linear<Scalar> cls_head;

 private:
  BackboneConfig cfg_;
};

}  // namespace tea
