#include "helpers.hpp"

#include "tea/autograd.hpp"

#include <doctest.h>

using namespace tea;
using tea::testing::max_gradient_error;
using tea::testing::random_matrix;

namespace {

ad::Var<double> param(Index r, Index c, std::mt19937_64& rng) { return ad::parameter<double>(random_matrix<double>(r, c, rng)); }

// Reduces any matrix output to a scalar with fixed random weights so every
// output entry carries a distinct upstream gradient.
ad::Var<double> probe(const ad::Var<double>& out, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  auto w = ad::constant<double>(random_matrix<double>(out.rows(), out.cols(), rng));
  return ad::sum(ad::hadamard(out, w));
}

}  // namespace

TEST_CASE("elementwise and linear ops match central differences") {
  std::mt19937_64 rng(1);
  auto a = param(3, 4, rng), b = param(4, 2, rng), c = param(3, 4, rng), row = param(1, 4, rng), col = param(3, 1, rng);
  auto s = param(1, 1, rng);
  CHECK(max_gradient_error([&] { return probe(ad::matmul(a, b)); }, {a, b}) < 1e-6);
  CHECK(max_gradient_error([&] { return probe(a + c); }, {a, c}) < 1e-6);
  CHECK(max_gradient_error([&] { return probe(a - c); }, {a, c}) < 1e-6);
  CHECK(max_gradient_error([&] { return probe(a * 2.5); }, {a}) < 1e-6);
  CHECK(max_gradient_error([&] { return probe(ad::hadamard(a, c)); }, {a, c}) < 1e-6);
  CHECK(max_gradient_error([&] { return probe(ad::add_row(a, row)); }, {a, row}) < 1e-6);
  CHECK(max_gradient_error([&] { return probe(ad::add_col(a, col)); }, {a, col}) < 1e-6);
  CHECK(max_gradient_error([&] { return probe(ad::scale_by(a, s)); }, {a, s}) < 1e-6);
  CHECK(max_gradient_error([&] { return ad::mean(ad::hadamard(a, a)); }, {a}) < 1e-6);
}

TEST_CASE("rearrangement ops match central differences") {
  std::mt19937_64 rng(2);
  auto a = param(4, 3, rng), b = param(2, 3, rng);
  CHECK(max_gradient_error([&] { return probe(ad::gather_rows(a, {3, 0, 0, 2})); }, {a}) < 1e-6);
  CHECK(max_gradient_error([&] { return probe(ad::gather_elements(a, 2, 2, {0, 11, 5, 5})); }, {a}) < 1e-6);
  CHECK(max_gradient_error([&] { return probe(ad::concat_rows<double>({a, b, a})); }, {a, b}) < 1e-6);
  CHECK(max_gradient_error([&] { return probe(ad::reshape(a, 2, 6)); }, {a}) < 1e-6);
  CHECK(max_gradient_error([&] { return probe(ad::block_row_mean(a, 2)); }, {a}) < 1e-6);
  CHECK(max_gradient_error([&] { return probe(ad::slice_cols(a, 1, 2)); }, {a}) < 1e-6);
}

TEST_CASE("nonlinearities, normalization and attention match central differences") {
  std::mt19937_64 rng(3);
  auto x = param(5, 6, rng), gain = param(1, 6, rng), bias = param(1, 6, rng);
  CHECK(max_gradient_error([&] { return probe(ad::gelu(x)); }, {x}) < 1e-6);
  CHECK(max_gradient_error([&] { return probe(ad::layer_norm(x, gain, bias)); }, {x, gain, bias}) < 1e-5);
  auto qkv = param(2 * 4, 12, rng);
  const std::vector<bool> mask = {true, false, true, true};
  CHECK(max_gradient_error([&] { return probe(ad::grouped_attention(qkv, 2, 4, 2, mask)); }, {qkv}) < 1e-6);
}

TEST_CASE("losses match central differences") {
  std::mt19937_64 rng(4);
  auto logits = param(5, 3, rng), other = param(5, 3, rng);
  const std::vector<int> labels = {0, 2, 1, 1, 0};
  Matrix<double> target = random_matrix<double>(5, 3, rng).array().abs();
  target = target.array().colwise() / target.rowwise().sum().array();
  ColVector<double> w(5);
  w << 1, 0, 1, 2, 1;
  CHECK(max_gradient_error([&] { return ad::cross_entropy(logits, labels); }, {logits}) < 1e-6);
  CHECK(max_gradient_error([&] { return ad::soft_cross_entropy(logits, target, 2.0); }, {logits}) < 1e-6);
  CHECK(max_gradient_error([&] { return ad::weighted_mse(logits, other, w); }, {logits, other}) < 1e-6);
  CHECK(max_gradient_error([&] { return ad::mse(logits, other); }, {logits, other}) < 1e-6);
  CHECK(max_gradient_error([&] { return probe(ad::row_cosine(logits, other, 1e-6)); }, {logits, other}) < 1e-5);
}

TEST_CASE("masked keys receive no attention and no gradient") {
  std::mt19937_64 rng(5);
  Matrix<double> base = random_matrix<double>(3, 6, rng);
  auto qkv = ad::parameter<double>(base);
  const std::vector<bool> mask = {true, true, false};
  auto out = ad::grouped_attention(qkv, 1, 3, 1, mask);
  ad::backward(probe(out));
  // Key and value columns of the masked row get zero gradient.
  CHECK(qkv.grad().block(2, 2, 1, 4).cwiseAbs().maxCoeff() == 0.0);
  // Changing the masked row's key/value leaves every output unchanged.
  Matrix<double> changed = base;
  changed.block(2, 2, 1, 4).setConstant(50.0);
  auto out2 = ad::grouped_attention(ad::constant<double>(changed), 1, 3, 1, mask);
  CHECK((out2.value().topRows(2) - out.value().topRows(2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("closed-form loss values") {
  auto zeros = ad::constant<double>(Matrix<double>::Zero(1, 2));
  Matrix<double> uniform(1, 2);
  uniform << 0.5, 0.5;
  CHECK(ad::soft_cross_entropy(zeros, uniform, 1.0).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(ad::cross_entropy(zeros, {1}).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  Matrix<double> a(1, 2), b(1, 2);
  a << 0, 0;
  b << 1, 3;
  CHECK(ad::mse(ad::constant<double>(a), ad::constant<double>(b)).item() == doctest::Approx(5.0));
}

TEST_CASE("gradients accumulate across backward calls and clear on zero_grad") {
  auto p = ad::parameter<double>(Matrix<double>::Constant(1, 1, 3.0));
  ad::backward(ad::sum(ad::hadamard(p, p)));
  ad::backward(ad::sum(ad::hadamard(p, p)));
  CHECK(p.grad()(0, 0) == doctest::Approx(12.0));
  p.zero_grad();
  CHECK(p.grad().size() == 0);
}

TEST_CASE("no-grad guard records no graph") {
  auto p = ad::parameter<double>(Matrix<double>::Ones(2, 2));
  {
    ad::NoGradGuard guard;
    auto y = ad::sum(p * 2.0);
    CHECK_FALSE(y.requires_grad());
    ad::backward(y);
  }
  CHECK(p.grad().size() == 0);
  CHECK(ad::sum(p * 2.0).requires_grad());
}

TEST_CASE("invalid shapes are rejected") {
  auto a = ad::constant<double>(Matrix<double>::Zero(2, 3));
  auto b = ad::constant<double>(Matrix<double>::Zero(3, 2));
  CHECK_THROWS(ad::hadamard(a, b));
  CHECK_THROWS(ad::gather_rows(a, {5}));
  CHECK_THROWS(ad::block_row_mean(a, 4));
  CHECK_THROWS(ad::backward(a));
  CHECK_THROWS(ad::grouped_attention(ad::constant<double>(Matrix<double>::Zero(2, 6)), 1, 2, 1, {false, false}));
}
