#include "helpers.hpp"

#include "tea/cropping.hpp"
#include "tea/model.hpp"

#include <doctest.h>

#include <numeric>

using namespace tea;
using tea::testing::random_matrix;
using tea::testing::random_sample;

namespace {

BackboneConfig small_config() {
  BackboneConfig c;
  c.image_height = 8;
  c.image_width = 8;
  c.channels = 3;
  c.patch_height = 2;
  c.patch_width = 2;
  c.dim = 16;
  c.temporal_depth = 2;
  c.spatial_depth = 1;
  c.heads = 2;
  c.mlp_dim = 24;
  c.num_classes = 3;
  c.max_day_offset = 200;
  return c;
}

BackboneConfig tiny_config() {
  BackboneConfig c;
  c.image_height = 4;
  c.image_width = 4;
  c.channels = 2;
  c.patch_height = 2;
  c.patch_width = 2;
  c.dim = 8;
  c.temporal_depth = 1;
  c.spatial_depth = 1;
  c.heads = 2;
  c.mlp_dim = 16;
  c.num_classes = 2;
  c.max_day_offset = 64;
  return c;
}

template <typename Scalar>
TemporalOutput<Scalar> encode(const Backbone<Scalar>& b, const SitsSample& s) {
  return b.temporal_encode(b.tokenize(patchify<Scalar>(s, b.config()), s.frames), s.day_offsets, s.valid_mask);
}

SitsSample permute_frames(const SitsSample& s, const std::vector<int>& order) {
  SitsSample out = s;
  const std::size_t fs = s.frame_size();
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto src = static_cast<std::size_t>(order[i]);
    std::copy(s.values.begin() + src * fs, s.values.begin() + (src + 1) * fs, out.values.begin() + i * fs);
    out.day_offsets[i] = s.day_offsets[src];
    out.valid_mask[i] = s.valid_mask[src];
  }
  return out;
}

}  // namespace

TEST_CASE("a 16x16 image with 2x2 patches has 64 patch positions") {
  BackboneConfig c;
  CHECK(c.num_patches() == 64);
  c.patch_height = c.patch_width = 1;
  CHECK(c.num_patches() == 256);
  CHECK(c.patch_features() == 4);
}

TEST_CASE("config validation") {
  BackboneConfig c = small_config();
  c.patch_height = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.heads = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("patchify and unpatchify are inverse") {
  const BackboneConfig c = small_config();
  const SitsSample s = random_sample(5, 3, 8, 8, 3, 2);
  const Matrix<double> p = patchify<double>(s, c);
  CHECK(p.rows() == 16 * 5);
  CHECK(p.cols() == 12);
  const auto back = unpatchify(p, 5, c);
  REQUIRE(back.size() == s.values.size());
  CHECK(std::equal(back.begin(), back.end(), s.values.begin()));
  // Pixel (y=3, x=4), channel 1, frame 2 lives in patch (1, 2), offset (1, 0).
  const float v = s.values[((2 * 3 + 1) * 8 + 3) * 8 + 4];
  CHECK(p((1 * 4 + 2) * 5 + 2, (1 * 2 + 1) * 2 + 0) == doctest::Approx(v));
  CHECK_THROWS_AS(patchify<double>(random_sample(5, 2, 8, 8, 3, 2), c), ConfigError);
}

TEST_CASE("encoder output shapes for every sequence length") {
  Rng rng(1);
  const BackboneConfig c = small_config();
  const Backbone<float> b(c, rng);
  for (int T : {1, 2, 7, 24}) {
    const SitsSample s = random_sample(T, 3, 8, 8, 3, static_cast<std::uint64_t>(T), 5);
    const auto t = encode(b, s);
    CHECK(t.class_tokens.rows() == 16 * 3);
    CHECK(t.class_tokens.cols() == 16);
    CHECK(t.sequence_tokens.rows() == 16 * T);
    const auto sp = b.spatial_encode(t.class_tokens);
    CHECK(sp.global_tokens.rows() == 3);
    CHECK(sp.dense_tokens.rows() == 3 * 16);
    CHECK(sp.all_tokens.rows() == sp.global_tokens.rows() + sp.dense_tokens.rows());
    const auto logits = b.segment(sp.dense_tokens);
    CHECK(logits.rows() == 64);
    CHECK(logits.cols() == 3);
    CHECK(logits.value().allFinite());
    CHECK(b.classify(sp.global_tokens).rows() == 3);
  }
}

TEST_CASE("single-class config degenerates to one stream") {
  Rng rng(2);
  BackboneConfig c = small_config();
  c.num_classes = 1;
  const Backbone<float> b(c, rng);
  const auto sp = b.spatial_encode(encode(b, random_sample(4, 3, 8, 8, 1, 4)).class_tokens);
  CHECK(sp.global_tokens.rows() == 1);
  CHECK(sp.dense_tokens.rows() == 16);
}

TEST_CASE("zero input with zero tokenizer bias gives zero tokens") {
  Rng rng(3);
  const BackboneConfig c = small_config();
  const Backbone<double> b(c, rng);
  const auto grid = b.tokenize(Matrix<double>::Zero(16 * 4, 12), 4);
  CHECK(grid.tokens.value().isZero(0));
  CHECK_THROWS_AS(b.tokenize(Matrix<double>::Zero(16 * 4, 11), 4), ConfigError);
}

TEST_CASE("single-pixel patches project each pixel on its own") {
  Rng rng(4);
  BackboneConfig c = small_config();
  c.patch_height = c.patch_width = 1;
  const Backbone<double> b(c, rng);
  const SitsSample s = random_sample(2, 3, 8, 8, 3, 4);
  const auto grid = b.tokenize(patchify<double>(s, c), 2);
  // Pixel (y=5, x=6) at frame 1 is patch 46.
  RowVector<double> pixel(3);
  for (int ch = 0; ch < 3; ++ch) pixel(ch) = s.values[((1 * 3 + ch) * 8 + 5) * 8 + 6];
  const RowVector<double> expected = pixel * b.tokenizer.weight.value() + b.tokenizer.bias.value();
  CHECK((grid.tokens.value().row(46 * 2 + 1) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("class tokens are invariant to permuting frames with their day offsets") {
  Rng rng(5);
  const Backbone<double> b(small_config(), rng);
  SitsSample s = random_sample(9, 3, 8, 8, 3, 5);
  s.valid_mask[4] = false;
  std::vector<int> order(9);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(9));
  const auto a = encode(b, s);
  const auto p = encode(b, permute_frames(s, order));
  CHECK((a.class_tokens.value() - p.class_tokens.value()).cwiseAbs().maxCoeff() <= 1e-5);
  // Sequence tokens follow the frames.
  double worst = 0;
  for (int patch = 0; patch < 16; ++patch)
    for (int t = 0; t < 9; ++t)
      worst = std::max(worst, (p.sequence_tokens.value().row(patch * 9 + t) -
                               a.sequence_tokens.value().row(patch * 9 + order[t]))
                                  .cwiseAbs()
                                  .maxCoeff());
  CHECK(worst <= 1e-5);
}

TEST_CASE("masked frames do not influence the class tokens") {
  Rng rng(6);
  const Backbone<double> b(small_config(), rng);
  SitsSample s = random_sample(6, 3, 8, 8, 3, 6);
  s.valid_mask[2] = s.valid_mask[5] = false;
  SitsSample other = s;
  const std::size_t fs = s.frame_size();
  for (std::size_t i = 0; i < fs; ++i) {
    other.values[2 * fs + i] = 7.0f;
    other.values[5 * fs + i] = -3.0f;
  }
  CHECK((encode(b, s).class_tokens.value() - encode(b, other).class_tokens.value()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("permuting patches together with their spatial positions permutes dense tokens") {
  Rng rng(7);
  const BackboneConfig c = small_config();
  const Backbone<double> b(c, rng);
  const Index n = c.num_patches(), K = c.num_classes;
  std::mt19937_64 mrng(70);
  const auto cls = ad::constant<double>(random_matrix<double>(n * K, c.dim, mrng));
  const auto ref = b.spatial_encode(cls);

  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), mrng);
  Matrix<double> cls_p(n * K, c.dim), pos_p(n, c.dim);
  const Matrix<double> pos = b.spatial_pos.value();
  for (Index q = 0; q < n; ++q) {
    pos_p.row(q) = pos.row(perm[q]);
    for (Index k = 0; k < K; ++k) cls_p.row(q * K + k) = cls.value().row(perm[q] * K + k);
  }
  b.spatial_pos.mutable_value() = pos_p;
  const auto moved = b.spatial_encode(ad::constant<double>(cls_p));
  b.spatial_pos.mutable_value() = pos;

  CHECK((moved.global_tokens.value() - ref.global_tokens.value()).cwiseAbs().maxCoeff() <= 1e-5);
  double worst = 0;
  for (Index k = 0; k < K; ++k)
    for (Index q = 0; q < n; ++q)
      worst = std::max(worst, (moved.dense_tokens.value().row(k * n + q) - ref.dense_tokens.value().row(k * n + perm[q]))
                                  .cwiseAbs()
                                  .maxCoeff());
  CHECK(worst <= 1e-5);
}

TEST_CASE("segmentation head: confidence handling and argmax dominance") {
  Rng rng(8);
  BackboneConfig c = small_config();
  c.num_classes = 2;
  const Backbone<double> b(c, rng);
  std::mt19937_64 mrng(80);
  const auto dense = ad::constant<double>(random_matrix<double>(2 * 16, c.dim, mrng));
  const auto zero = ad::constant<double>(Matrix<double>::Zero(16, 2));
  CHECK(b.segment(dense).value() == b.segment(dense, &zero).value());

  b.seg_head.weight.mutable_value().setZero();
  Matrix<double> conf = Matrix<double>::Zero(16, 2);
  conf.col(1).setConstant(0.5);
  const auto conf_var = ad::constant<double>(conf);
  const auto labels = argmax_labels(b.segment(dense, &conf_var).value());
  CHECK(std::all_of(labels.begin(), labels.end(), [](int l) { return l == 1; }));
  const auto wrong = ad::constant<double>(Matrix<double>::Zero(16, 3));
  CHECK_THROWS_AS(b.segment(dense, &wrong), InvalidInput);
}

TEST_CASE("out-of-range day offsets are rejected") {
  Rng rng(9);
  const Backbone<float> b(small_config(), rng);
  SitsSample s = random_sample(3, 3, 8, 8, 3, 9);
  s.day_offsets[2] = 200;
  CHECK_THROWS_AS(encode(b, s), std::out_of_range);
}

TEST_CASE("forward passes are bitwise deterministic") {
  ModelConfig mc;
  mc.backbone = small_config();
  const TeaModel<float> a(mc, 11), b(mc, 11);
  const SitsSample s = random_sample(12, 3, 8, 8, 3, 11);
  const Matrix<float> la = a.forward(s).logits.value();
  CHECK(la == a.forward(s).logits.value());
  CHECK(la == b.forward(s).logits.value());
  const TeaModel<float> c(mc, 12);
  CHECK(la != c.forward(s).logits.value());
}

TEST_CASE("the full model accepts every length up to the maximum") {
  ModelConfig mc;
  mc.backbone = small_config();
  const TeaModel<float> m(mc, 13);
  const SitsSample full = random_sample(13, 3, 8, 8, 3, 13);
  for (int T = 1; T <= 13; ++T) {
    const auto out = m.forward(prefix_crop(full, T / 13.0), true);
    CHECK(out.logits.value().allFinite());
    CHECK(out.similarity.defined());
    CHECK(out.reconstruction.rows() == 16 * T);
  }
}

TEST_CASE("segmentation cross-entropy gradients match finite differences") {
  ModelConfig mc;
  mc.backbone = tiny_config();
  mc.prototype_slots = 4;
  const TeaModel<double> m(mc, 21);
  const SitsSample s = random_sample(3, 2, 4, 4, 2, 21);
  const auto input = make_input<double>(s, mc.backbone);
  auto loss = [&] { return ad::cross_entropy(m.forward(input).logits, s.labels); };

  const auto params = m.named_parameters();
  m.zero_grad();
  ad::backward(loss());

  std::mt19937_64 pick(22);
  const double h = 1e-6;
  double worst = 0;
  int checked = 0;
  while (checked < 20) {
    const auto& [name, p] = params[pick() % params.size()];
    if (name.rfind("reconstruction", 0) == 0) continue;  // not on this loss path
    const Index i = static_cast<Index>(pick() % static_cast<std::uint64_t>(p.value().size()));
    const double analytic = p.grad().size() ? p.grad().data()[i] : 0.0;
    if (analytic == 0.0 && name.find("temporal_pos") != std::string::npos) continue;  // unused day row
    double& x = p.mutable_value().data()[i];
    const double keep = x;
    x = keep + h;
    const double up = loss().item();
    x = keep - h;
    const double down = loss().item();
    x = keep;
    const double err = tea::testing::relative_error(analytic, (up - down) / (2 * h));
    INFO(name << "[" << i << "] analytic " << analytic << " numeric " << (up - down) / (2 * h));
    CHECK(err < 1e-3);
    worst = std::max(worst, err);
    ++checked;
  }
  MESSAGE("worst relative gradient error " << worst);
}
