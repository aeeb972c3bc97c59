#include "helpers.hpp"

#include "tea/model.hpp"
#include "tea/prototype.hpp"

#include <doctest.h>

using namespace tea;
using tea::testing::random_matrix;

namespace {

PrototypeBank<double> bank_with(const Matrix<double>& rows, Index classes, Index slots, int span) {
  Rng rng(0);
  PrototypeBank<double> b(classes, slots, rows.cols(), span, rng);
  b.prototypes.mutable_value() = rows;
  return b;
}

}  // namespace

TEST_CASE("hand example: tokens (1,0),(0,1) against slots (1,0),(1,0) average to 0.5") {
  Matrix<double> slots(2, 2);
  slots << 1, 0, 1, 0;
  const auto bank = bank_with(slots, 1, 2, 15);
  Matrix<double> tokens(2, 2);
  tokens << 1, 0, 0, 1;
  const auto sim = similarity_map(ad::constant(tokens), 1, 2, {0, 15}, {true, true}, bank);
  REQUIRE(sim.rows() == 1);
  REQUIRE(sim.cols() == 1);
  CHECK(sim.value()(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("slot lookup buckets day offsets and clamps to the last slot") {
  const auto bank = bank_with(Matrix<double>::Zero(6, 3), 2, 3, 10);
  CHECK(bank.slot_for_day(0) == 0);
  CHECK(bank.slot_for_day(9) == 0);
  CHECK(bank.slot_for_day(10) == 1);
  CHECK(bank.slot_for_day(29) == 2);
  CHECK(bank.slot_for_day(400) == 2);
}

TEST_CASE("tokens equal to their slot score 1, orthogonal tokens score 0") {
  std::mt19937_64 rng(1);
  const Index K = 2, slots = 3, d = 4, T = 5, n = 2;
  // Class 0 slots span the first two axes, class 1 slots the last two.
  Matrix<double> P = Matrix<double>::Zero(K * slots, d);
  for (Index s = 0; s < slots; ++s) {
    P(s, 0) = 1.0 + s;
    P(s, 1) = 0.5;
    P(slots + s, 2) = 1.0;
    P(slots + s, 3) = -0.3 * (s + 1);
  }
  const auto bank = bank_with(P, K, slots, 10);
  const std::vector<int> days{0, 7, 12, 25, 40};
  const std::vector<bool> valid(T, true);
  Matrix<double> tokens(n * T, d);
  for (Index p = 0; p < n; ++p)
    for (Index t = 0; t < T; ++t) tokens.row(p * T + t) = P.row(bank.slot_for_day(days[t])) * (1.0 + p);
  const auto sim = similarity_map(ad::constant(tokens), n, T, days, valid, bank).value();
  for (Index p = 0; p < n; ++p) {
    CHECK(sim(p, 0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(sim(p, 1)) < 1e-12);
  }
}

TEST_CASE("similarity is bounded and invariant to token scale") {
  std::mt19937_64 rng(2);
  Rng init(3);
  const Index K = 3, slots = 4, d = 6, T = 7, n = 5;
  const PrototypeBank<double> bank(K, slots, d, 12, init);
  std::vector<int> days;
  for (Index t = 0; t < T; ++t) days.push_back(static_cast<int>(t * 9));
  std::vector<bool> valid(T, true);
  valid[3] = false;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix<double> tokens = random_matrix<double>(n * T, d, rng, 3.0);
    const auto a = similarity_map(ad::constant(tokens), n, T, days, valid, bank).value();
    const auto b = similarity_map(ad::constant<double>(tokens * 4.25), n, T, days, valid, bank).value();
    CHECK(a.maxCoeff() <= 1 + 1e-6);
    CHECK(a.minCoeff() >= -1 - 1e-6);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("invalid frames are left out of the average") {
  Matrix<double> slots(1, 2);
  slots << 1, 0;
  const auto bank = bank_with(slots, 1, 1, 15);
  Matrix<double> tokens(3, 2);
  tokens << 1, 0, 0, 1, 5, 5;
  const auto sim = similarity_map(ad::constant(tokens), 1, 3, {0, 15, 30}, {true, true, false}, bank);
  CHECK(sim.value()(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK_THROWS_AS(similarity_map(ad::constant(tokens), 1, 3, {0, 15, 30}, {false, false, false}, bank), InvalidInput);
}

TEST_CASE("a model sees no similarity map when no frame is valid") {
  ModelConfig mc;
  mc.backbone.image_height = mc.backbone.image_width = 4;
  mc.backbone.dim = 8;
  mc.backbone.heads = 2;
  mc.backbone.num_classes = 2;
  const TeaModel<float> m(mc, 4);
  SitsSample s = tea::testing::random_sample(3, 4, 4, 4, 2, 4);
  s.valid_mask.assign(3, false);
  const auto out = m.forward(s);
  CHECK_FALSE(out.similarity.defined());
  CHECK(out.logits.value().allFinite());
}

TEST_CASE("apply_confidence is additive") {
  std::mt19937_64 rng(5);
  const auto scores = ad::constant<double>(random_matrix<double>(6, 3, rng));
  const auto sim = ad::constant<double>(random_matrix<double>(6, 3, rng));
  const auto zero_scale = ad::constant<double>(Matrix<double>::Zero(1, 1));
  const auto unit = ad::constant<double>(Matrix<double>::Ones(1, 1));
  CHECK(apply_confidence(scores, sim, zero_scale).value() == scores.value());
  CHECK(apply_confidence(scores, ad::constant<double>(Matrix<double>::Zero(6, 3)), unit).value() == scores.value());
  CHECK(apply_confidence(ad::constant<double>(Matrix<double>::Zero(6, 3)), sim, unit).value() == sim.value());
}

TEST_CASE("positive confidence keeps the argmax where scores and similarity agree") {
  std::mt19937_64 rng(6);
  int agreeing = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix<double> scores = random_matrix<double>(8, 4, rng, 2.0);
    const Matrix<double> sim = random_matrix<double>(8, 4, rng, 1.0);
    const double scale = std::uniform_real_distribution<double>(0.01, 5.0)(rng);
    const auto out = apply_confidence(ad::constant(scores), ad::constant(sim),
                                      ad::constant<double>(Matrix<double>::Constant(1, 1, scale)))
                         .value();
    const auto a = argmax_labels(scores), b = argmax_labels(sim), c = argmax_labels(out);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] != b[i]) continue;
      ++agreeing;
      CHECK(c[i] == a[i]);
    }
  }
  CHECK(agreeing > 100);
}

TEST_CASE("similarity gradients match finite differences") {
  std::mt19937_64 rng(7);
  Rng init(8);
  const PrototypeBank<double> bank(2, 3, 4, 10, init);
  const auto tokens = ad::parameter<double>(random_matrix<double>(2 * 4, 4, rng));
  const std::vector<int> days{0, 11, 23, 35};
  const std::vector<bool> valid{true, false, true, true};
  const auto weights = random_matrix<double>(2, 2, rng);
  auto loss = [&] {
    return ad::sum(ad::hadamard(similarity_map(tokens, 2, 4, days, valid, bank), ad::constant(weights)));
  };
  CHECK(tea::testing::max_gradient_error(loss, {tokens, bank.prototypes}) < 1e-5);
}
