#pragma once

// Minimal reverse-mode differentiation over dense row-major Eigen matrices.
//
// A Var is a handle to a node holding a value, an accumulated gradient and a
// closure that pushes the node's gradient into its parents. Graphs are built
// eagerly by the free functions below and released when the last handle goes
// away. Every op is templated on the scalar so the same model code runs in
// float for training and in double for finite-difference checks.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace tea {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

template <typename Scalar>
using ColVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

namespace ad {

inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}

inline bool grad_enabled() { return grad_enabled_flag(); }

// Suspends graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(grad_enabled_flag()) { grad_enabled_flag() = false; }
  ~NoGradGuard() { grad_enabled_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename Scalar>
struct Node {
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Node&)> backward_fn;

  void accumulate(const Matrix<Scalar>& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

template <typename Scalar>
class Var {
 public:
  using NodePtr = std::shared_ptr<Node<Scalar>>;

  Var() = default;
  explicit Var(Matrix<Scalar> value, bool requires_grad = false)
      : node_(std::make_shared<Node<Scalar>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Matrix<Scalar>& value() const { return node_->value; }
  Matrix<Scalar>& mutable_value() const { return node_->value; }
  const Matrix<Scalar>& grad() const { return node_->grad; }
  Matrix<Scalar>& mutable_grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Scalar item() const { return node_->value(0, 0); }
  void zero_grad() const { node_->grad.resize(0, 0); }
  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

template <typename Scalar>
Var<Scalar> parameter(Matrix<Scalar> value) {
  return Var<Scalar>(std::move(value), true);
}

template <typename Scalar>
Var<Scalar> constant(Matrix<Scalar> value) {
  return Var<Scalar>(std::move(value), false);
}

// Wraps an op result. Backward receives the finished node so closures can read
// node.grad and node.value without copying them.
template <typename Scalar, typename Backward>
Var<Scalar> make_op(Matrix<Scalar> value, std::vector<Var<Scalar>> inputs, Backward&& backward) {
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  auto node = std::make_shared<Node<Scalar>>();
  node->value = std::move(value);
  if (!needs) return Var<Scalar>(node);
  node->requires_grad = true;
  node->parents.reserve(inputs.size());
  for (auto& in : inputs) node->parents.push_back(in.node());
  node->backward_fn = std::forward<Backward>(backward);
  return Var<Scalar>(node);
}

// Seeds d(loss)/d(loss) = 1 and propagates through the recorded graph.
template <typename Scalar>
void backward(const Var<Scalar>& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw std::invalid_argument("backward: loss must be a 1x1 scalar");
  }
  if (!loss.requires_grad()) return;
  using NodePtr = std::shared_ptr<Node<Scalar>>;
  std::vector<Node<Scalar>*> order;
  std::unordered_set<Node<Scalar>*> seen;
  std::vector<std::pair<Node<Scalar>*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      const NodePtr& parent = node->parents[next++];
      if (parent->requires_grad && seen.insert(parent.get()).second) {
        stack.emplace_back(parent.get(), 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  loss.node()->accumulate(Matrix<Scalar>::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<Scalar>* node = *it;
    if (node->backward_fn && node->grad.size() != 0) node->backward_fn(*node);
  }
  // Interior gradients are no longer needed once propagated.
  for (Node<Scalar>* node : order) {
    if (node->backward_fn) node->grad.resize(0, 0);
  }
}

namespace detail {

inline void check(bool ok, const char* op, const std::string& what) {
  if (!ok) throw std::invalid_argument(std::string(op) + ": " + what);
}

template <typename Scalar>
void same_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), op,
        "shape mismatch " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
            std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and linear algebra

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::check(a.cols() == b.rows(), "matmul", "inner dimension mismatch");
  Matrix<Scalar> out = a.value() * b.value();
  auto an = a.node(), bn = b.node();
  return make_op<Scalar>(std::move(out), {a, b}, [an, bn](const Node<Scalar>& self) {
    if (an->requires_grad) an->accumulate(self.grad * bn->value.transpose());
    if (bn->requires_grad) bn->accumulate(an->value.transpose() * self.grad);
  });
}

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::same_shape(a, b, "add");
  auto an = a.node(), bn = b.node();
  return make_op<Scalar>(a.value() + b.value(), {a, b}, [an, bn](const Node<Scalar>& self) {
    an->accumulate(self.grad);
    bn->accumulate(self.grad);
  });
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::same_shape(a, b, "sub");
  auto an = a.node(), bn = b.node();
  return make_op<Scalar>(a.value() - b.value(), {a, b}, [an, bn](const Node<Scalar>& self) {
    an->accumulate(self.grad);
    bn->accumulate(-self.grad);
  });
}

template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, Scalar s) {
  auto an = a.node();
  return make_op<Scalar>(a.value() * s, {a},
                         [an, s](const Node<Scalar>& self) { an->accumulate(self.grad * s); });
}

template <typename Scalar>
Var<Scalar> operator*(Scalar s, const Var<Scalar>& a) {
  return a * s;
}

template <typename Scalar>
Var<Scalar> hadamard(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::same_shape(a, b, "hadamard");
  auto an = a.node(), bn = b.node();
  return make_op<Scalar>(a.value().cwiseProduct(b.value()), {a, b},
                         [an, bn](const Node<Scalar>& self) {
                           if (an->requires_grad) an->accumulate(self.grad.cwiseProduct(bn->value));
                           if (bn->requires_grad) bn->accumulate(self.grad.cwiseProduct(an->value));
                         });
}

// a (r x c) + row (1 x c), broadcast over rows.
template <typename Scalar>
Var<Scalar> add_row(const Var<Scalar>& a, const Var<Scalar>& row) {
  detail::check(row.rows() == 1 && row.cols() == a.cols(), "add_row", "row must be 1 x cols");
  Matrix<Scalar> out = a.value();
  out.rowwise() += row.value().row(0);
  auto an = a.node(), rn = row.node();
  return make_op<Scalar>(std::move(out), {a, row}, [an, rn](const Node<Scalar>& self) {
    an->accumulate(self.grad);
    if (rn->requires_grad) rn->accumulate(self.grad.colwise().sum());
  });
}

// a (r x c) + col (r x 1), broadcast over columns.
template <typename Scalar>
Var<Scalar> add_col(const Var<Scalar>& a, const Var<Scalar>& col) {
  detail::check(col.cols() == 1 && col.rows() == a.rows(), "add_col", "col must be rows x 1");
  Matrix<Scalar> out = a.value();
  out.colwise() += col.value().col(0);
  auto an = a.node(), cn = col.node();
  return make_op<Scalar>(std::move(out), {a, col}, [an, cn](const Node<Scalar>& self) {
    an->accumulate(self.grad);
    if (cn->requires_grad) cn->accumulate(self.grad.rowwise().sum());
  });
}

// a * s where s is a learnable 1x1.
template <typename Scalar>
Var<Scalar> scale_by(const Var<Scalar>& a, const Var<Scalar>& s) {
  detail::check(s.rows() == 1 && s.cols() == 1, "scale_by", "scale must be 1x1");
  auto an = a.node(), sn = s.node();
  return make_op<Scalar>(a.value() * s.item(), {a, s}, [an, sn](const Node<Scalar>& self) {
    if (an->requires_grad) an->accumulate(self.grad * sn->value(0, 0));
    if (sn->requires_grad) {
      Matrix<Scalar> g(1, 1);
      g(0, 0) = self.grad.cwiseProduct(an->value).sum();
      sn->accumulate(g);
    }
  });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  auto an = a.node();
  const Index r = a.rows(), c = a.cols();
  return make_op<Scalar>(std::move(out), {a}, [an, r, c](const Node<Scalar>& self) {
    an->accumulate(Matrix<Scalar>::Constant(r, c, self.grad(0, 0)));
  });
}

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& a) {
  return sum(a) * (Scalar(1) / static_cast<Scalar>(a.value().size()));
}

// ---------------------------------------------------------------------------
// Rearrangement

// out.row(i) = a.row(index[i]); repeated indices accumulate on backward.
template <typename Scalar>
Var<Scalar> gather_rows(const Var<Scalar>& a, std::vector<Index> index) {
  const Index rows = a.rows();
  for (Index i : index) detail::check(i >= 0 && i < rows, "gather_rows", "index out of range");
  Matrix<Scalar> out(static_cast<Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) out.row(static_cast<Index>(i)) = a.value().row(index[i]);
  auto an = a.node();
  return make_op<Scalar>(std::move(out), {a},
                         [an, rows, index = std::move(index)](const Node<Scalar>& self) {
                           Matrix<Scalar> g = Matrix<Scalar>::Zero(rows, self.grad.cols());
                           for (std::size_t i = 0; i < index.size(); ++i)
                             g.row(index[i]) += self.grad.row(static_cast<Index>(i));
                           an->accumulate(g);
                         });
}

// out(r, c) = a.data()[index[r * cols + c]] in row-major flat order.
template <typename Scalar>
Var<Scalar> gather_elements(const Var<Scalar>& a, Index rows, Index cols, std::vector<Index> index) {
  detail::check(static_cast<Index>(index.size()) == rows * cols, "gather_elements", "index size mismatch");
  const Index n = a.value().size();
  for (Index i : index) detail::check(i >= 0 && i < n, "gather_elements", "index out of range");
  Matrix<Scalar> out(rows, cols);
  const Scalar* src = a.value().data();
  Scalar* dst = out.data();
  for (std::size_t i = 0; i < index.size(); ++i) dst[i] = src[index[i]];
  auto an = a.node();
  const Index ar = a.rows(), ac = a.cols();
  return make_op<Scalar>(std::move(out), {a},
                         [an, ar, ac, index = std::move(index)](const Node<Scalar>& self) {
                           Matrix<Scalar> g = Matrix<Scalar>::Zero(ar, ac);
                           const Scalar* gs = self.grad.data();
                           Scalar* gd = g.data();
                           for (std::size_t i = 0; i < index.size(); ++i) gd[index[i]] += gs[i];
                           an->accumulate(g);
                         });
}

template <typename Scalar>
Var<Scalar> concat_rows(const std::vector<Var<Scalar>>& parts) {
  detail::check(!parts.empty(), "concat_rows", "no inputs");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    detail::check(p.cols() == cols, "concat_rows", "column mismatch");
    rows += p.rows();
  }
  Matrix<Scalar> out(rows, cols);
  std::vector<Index> offsets;
  Index at = 0;
  for (const auto& p : parts) {
    offsets.push_back(at);
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<std::shared_ptr<Node<Scalar>>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return make_op<Scalar>(std::move(out), parts, [nodes, offsets](const Node<Scalar>& self) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i]->requires_grad)
        nodes[i]->accumulate(self.grad.middleRows(offsets[i], nodes[i]->value.rows()));
    }
  });
}

// Same row-major data viewed as rows x cols.
template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& a, Index rows, Index cols) {
  detail::check(rows * cols == a.value().size(), "reshape", "element count mismatch");
  Matrix<Scalar> out = Eigen::Map<const Matrix<Scalar>>(a.value().data(), rows, cols);
  auto an = a.node();
  const Index ar = a.rows(), ac = a.cols();
  return make_op<Scalar>(std::move(out), {a}, [an, ar, ac](const Node<Scalar>& self) {
    an->accumulate(Eigen::Map<const Matrix<Scalar>>(self.grad.data(), ar, ac));
  });
}

// Mean of each run of `block` consecutive rows: (n x c) -> (n / block x c).
template <typename Scalar>
Var<Scalar> block_row_mean(const Var<Scalar>& a, Index block) {
  detail::check(block > 0 && a.rows() % block == 0, "block_row_mean", "rows not divisible by block");
  const Index groups = a.rows() / block, cols = a.cols();
  Matrix<Scalar> out(groups, cols);
  for (Index g = 0; g < groups; ++g) out.row(g) = a.value().middleRows(g * block, block).colwise().mean();
  auto an = a.node();
  return make_op<Scalar>(std::move(out), {a}, [an, block, groups, cols](const Node<Scalar>& self) {
    Matrix<Scalar> g(groups * block, cols);
    const Scalar inv = Scalar(1) / static_cast<Scalar>(block);
    for (Index i = 0; i < groups; ++i) g.middleRows(i * block, block).rowwise() = self.grad.row(i) * inv;
    an->accumulate(g);
  });
}

template <typename Scalar>
Var<Scalar> slice_cols(const Var<Scalar>& a, Index start, Index count) {
  detail::check(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols", "range out of bounds");
  auto an = a.node();
  const Index r = a.rows(), c = a.cols();
  return make_op<Scalar>(a.value().middleCols(start, count), {a},
                         [an, r, c, start, count](const Node<Scalar>& self) {
                           Matrix<Scalar> g = Matrix<Scalar>::Zero(r, c);
                           g.middleCols(start, count) = self.grad;
                           an->accumulate(g);
                         });
}

// ---------------------------------------------------------------------------
// Nonlinearities and normalization

template <typename Scalar>
Var<Scalar> gelu(const Var<Scalar>& a) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  Matrix<Scalar> out = a.value().unaryExpr([](Scalar x) {
    return static_cast<Scalar>(0.5 * x * (1.0 + std::erf(static_cast<double>(x) * inv_sqrt2)));
  });
  auto an = a.node();
  return make_op<Scalar>(std::move(out), {a}, [an](const Node<Scalar>& self) {
    Matrix<Scalar> d = an->value.unaryExpr([](Scalar xs) {
      const double x = static_cast<double>(xs);
      return static_cast<Scalar>(0.5 * (1.0 + std::erf(x * inv_sqrt2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x));
    });
    an->accumulate(self.grad.cwiseProduct(d));
  });
}

// Row-wise layer normalization with learnable gain and bias rows.
template <typename Scalar>
Var<Scalar> layer_norm(const Var<Scalar>& x, const Var<Scalar>& gain, const Var<Scalar>& bias,
                       Scalar eps = Scalar(1e-5)) {
  detail::check(gain.rows() == 1 && gain.cols() == x.cols() && bias.rows() == 1 && bias.cols() == x.cols(),
                "layer_norm", "gain/bias must be 1 x cols");
  const Index n = x.cols();
  const Matrix<Scalar>& xv = x.value();
  ColVector<Scalar> mu = xv.rowwise().mean();
  Matrix<Scalar> centered = xv.colwise() - mu;
  ColVector<Scalar> inv_std =
      ((centered.array().square().rowwise().sum() / static_cast<Scalar>(n)) + eps).rsqrt().matrix();
  Matrix<Scalar> xhat = centered.array().colwise() * inv_std.array();
  Matrix<Scalar> out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  auto xn = x.node(), gn = gain.node(), bn = bias.node();
  return make_op<Scalar>(std::move(out), {x, gain, bias},
                         [xn, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std), n](
                             const Node<Scalar>& self) {
                           const Matrix<Scalar>& g = self.grad;
                           if (gn->requires_grad) gn->accumulate(g.cwiseProduct(xhat).colwise().sum());
                           if (bn->requires_grad) bn->accumulate(g.colwise().sum());
                           if (xn->requires_grad) {
                             Matrix<Scalar> dxhat = g.array().rowwise() * gn->value.row(0).array();
                             ColVector<Scalar> m1 = dxhat.rowwise().mean();
                             ColVector<Scalar> m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
                             Matrix<Scalar> dx = dxhat;
                             dx.colwise() -= m1;
                             dx -= (xhat.array().colwise() * m2.array()).matrix();
                             dx = dx.array().colwise() * inv_std.array();
                             xn->accumulate(dx);
                           }
                           (void)n;
                         });
}

// Multi-head scaled dot-product attention over independent row groups.
//
// qkv holds groups * length rows laid out group-major, with query, key and
// value projections side by side in columns [0, d), [d, 2d), [2d, 3d). Keys
// whose key_mask entry is false receive zero attention weight in every group.
template <typename Scalar>
Var<Scalar> grouped_attention(const Var<Scalar>& qkv, Index groups, Index length, Index heads,
                              const std::vector<bool>& key_mask) {
  detail::check(qkv.rows() == groups * length, "grouped_attention", "rows != groups * length");
  detail::check(qkv.cols() % 3 == 0, "grouped_attention", "cols must be 3 * dim");
  const Index dim = qkv.cols() / 3;
  detail::check(heads > 0 && dim % heads == 0, "grouped_attention", "dim not divisible by heads");
  detail::check(static_cast<Index>(key_mask.size()) == length, "grouped_attention", "key mask length mismatch");
  detail::check(std::any_of(key_mask.begin(), key_mask.end(), [](bool b) { return b; }), "grouped_attention",
                "every key is masked");
  const Index head_dim = dim / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));
  const Matrix<Scalar>& in = qkv.value();

  RowVector<Scalar> bias = RowVector<Scalar>::Zero(length);
  for (Index j = 0; j < length; ++j)
    if (!key_mask[static_cast<std::size_t>(j)]) bias(j) = -std::numeric_limits<Scalar>::infinity();

  Matrix<Scalar> out(groups * length, dim);
  auto weights = std::make_shared<std::vector<Matrix<Scalar>>>();
  weights->reserve(static_cast<std::size_t>(groups * heads));
  for (Index g = 0; g < groups; ++g) {
    for (Index h = 0; h < heads; ++h) {
      const auto q = in.block(g * length, h * head_dim, length, head_dim);
      const auto k = in.block(g * length, dim + h * head_dim, length, head_dim);
      const auto v = in.block(g * length, 2 * dim + h * head_dim, length, head_dim);
      Matrix<Scalar> a = (q * k.transpose()) * scale;
      a.rowwise() += bias;
      ColVector<Scalar> mx = a.rowwise().maxCoeff();
      a = (a.colwise() - mx).array().exp();
      ColVector<Scalar> z = a.rowwise().sum();
      a = a.array().colwise() / z.array();
      out.block(g * length, h * head_dim, length, head_dim).noalias() = a * v;
      weights->push_back(std::move(a));
    }
  }
  auto qn = qkv.node();
  return make_op<Scalar>(std::move(out), {qkv},
                         [qn, weights, groups, length, heads, dim, head_dim, scale](const Node<Scalar>& self) {
                           const Matrix<Scalar>& in = qn->value;
                           Matrix<Scalar> d_in = Matrix<Scalar>::Zero(in.rows(), in.cols());
                           for (Index g = 0; g < groups; ++g) {
                             for (Index h = 0; h < heads; ++h) {
                               const Matrix<Scalar>& a = (*weights)[static_cast<std::size_t>(g * heads + h)];
                               const auto q = in.block(g * length, h * head_dim, length, head_dim);
                               const auto k = in.block(g * length, dim + h * head_dim, length, head_dim);
                               const auto v = in.block(g * length, 2 * dim + h * head_dim, length, head_dim);
                               const auto d_out = self.grad.block(g * length, h * head_dim, length, head_dim);
                               Matrix<Scalar> d_a = d_out * v.transpose();
                               ColVector<Scalar> r = d_a.cwiseProduct(a).rowwise().sum();
                               Matrix<Scalar> d_s = a.cwiseProduct(d_a.colwise() - r) * scale;
                               d_in.block(g * length, h * head_dim, length, head_dim).noalias() += d_s * k;
                               d_in.block(g * length, dim + h * head_dim, length, head_dim).noalias() +=
                                   d_s.transpose() * q;
                               d_in.block(g * length, 2 * dim + h * head_dim, length, head_dim).noalias() +=
                                   a.transpose() * d_out;
                             }
                           }
                           qn->accumulate(d_in);
                         });
}

// ---------------------------------------------------------------------------
// Losses and similarities

// Mean over rows of -log softmax(logits)[label].
template <typename Scalar>
Var<Scalar> cross_entropy(const Var<Scalar>& logits, const std::vector<int>& labels) {
  detail::check(static_cast<Index>(labels.size()) == logits.rows(), "cross_entropy", "label count mismatch");
  const Index n = logits.rows(), k = logits.cols();
  Matrix<Scalar> probs = logits.value();
  ColVector<Scalar> mx = probs.rowwise().maxCoeff();
  probs = (probs.colwise() - mx).array().exp();
  ColVector<Scalar> z = probs.rowwise().sum();
  probs = probs.array().colwise() / z.array();
  Scalar total = 0;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    detail::check(y >= 0 && y < k, "cross_entropy", "label out of range");
    total -= (logits.value()(i, y) - mx(i)) - std::log(z(i));
  }
  Matrix<Scalar> out(1, 1);
  out(0, 0) = total / static_cast<Scalar>(n);
  auto ln = logits.node();
  return make_op<Scalar>(std::move(out), {logits},
                         [ln, probs = std::move(probs), labels, n](const Node<Scalar>& self) {
                           Matrix<Scalar> g = probs;
                           for (Index i = 0; i < n; ++i) g(i, labels[static_cast<std::size_t>(i)]) -= Scalar(1);
                           ln->accumulate(g * (self.grad(0, 0) / static_cast<Scalar>(n)));
                         });
}

// Mean over rows of -sum_k target[k] * log softmax(logits / temperature)[k].
template <typename Scalar>
Var<Scalar> soft_cross_entropy(const Var<Scalar>& logits, const Matrix<Scalar>& target, Scalar temperature) {
  detail::check(target.rows() == logits.rows() && target.cols() == logits.cols(), "soft_cross_entropy",
                "target shape mismatch");
  detail::check(temperature > 0, "soft_cross_entropy", "temperature must be positive");
  const Index n = logits.rows();
  Matrix<Scalar> scaled = logits.value() / temperature;
  ColVector<Scalar> mx = scaled.rowwise().maxCoeff();
  Matrix<Scalar> shifted = scaled.colwise() - mx;
  ColVector<Scalar> lse = shifted.array().exp().rowwise().sum().log();
  Matrix<Scalar> log_probs = shifted.colwise() - lse;
  Matrix<Scalar> out(1, 1);
  out(0, 0) = -(target.cwiseProduct(log_probs)).sum() / static_cast<Scalar>(n);
  auto ln = logits.node();
  return make_op<Scalar>(std::move(out), {logits},
                         [ln, log_probs = std::move(log_probs), target, temperature, n](const Node<Scalar>& self) {
                           // d/dz of -sum p log q(z/T) = (q - p * sum p) / T
                           ColVector<Scalar> mass = target.rowwise().sum();
                           Matrix<Scalar> g = log_probs.array().exp().matrix();
                           g = g.array().colwise() * mass.array();
                           g -= target;
                           ln->accumulate(g * (self.grad(0, 0) / (temperature * static_cast<Scalar>(n))));
                         });
}

// sum(row_weight[i] * ||a_i - b_i||^2) / (sum(row_weight) * cols)
template <typename Scalar>
Var<Scalar> weighted_mse(const Var<Scalar>& a, const Var<Scalar>& b, const ColVector<Scalar>& row_weight) {
  detail::same_shape(a, b, "weighted_mse");
  detail::check(row_weight.size() == a.rows(), "weighted_mse", "weight length mismatch");
  const Scalar denom = row_weight.sum() * static_cast<Scalar>(a.cols());
  detail::check(denom > 0, "weighted_mse", "no weighted rows");
  Matrix<Scalar> diff = a.value() - b.value();
  Matrix<Scalar> out(1, 1);
  out(0, 0) = (diff.array().square().colwise() * row_weight.array()).sum() / denom;
  auto an = a.node(), bn = b.node();
  return make_op<Scalar>(std::move(out), {a, b},
                         [an, bn, diff = std::move(diff), row_weight, denom](const Node<Scalar>& self) {
                           Matrix<Scalar> g = (diff.array().colwise() * row_weight.array()).matrix() *
                                              (Scalar(2) * self.grad(0, 0) / denom);
                           if (an->requires_grad) an->accumulate(g);
                           if (bn->requires_grad) bn->accumulate(-g);
                         });
}

template <typename Scalar>
Var<Scalar> mse(const Var<Scalar>& a, const Var<Scalar>& b) {
  return weighted_mse(a, b, ColVector<Scalar>(ColVector<Scalar>::Ones(a.rows())));
}

// Row-wise cosine a_i . b_i / (|a_i| |b_i| + eps), returned as rows x 1.
template <typename Scalar>
Var<Scalar> row_cosine(const Var<Scalar>& a, const Var<Scalar>& b, Scalar eps = Scalar(1e-6)) {
  detail::same_shape(a, b, "row_cosine");
  const Matrix<Scalar>& av = a.value();
  const Matrix<Scalar>& bv = b.value();
  ColVector<Scalar> dot = av.cwiseProduct(bv).rowwise().sum();
  ColVector<Scalar> na = av.rowwise().norm();
  ColVector<Scalar> nb = bv.rowwise().norm();
  ColVector<Scalar> den = (na.array() * nb.array() + eps).matrix();
  Matrix<Scalar> out = dot.cwiseQuotient(den);
  auto an = a.node(), bn = b.node();
  return make_op<Scalar>(std::move(out), {a, b}, [an, bn, dot, na, nb, den](const Node<Scalar>& self) {
    const Matrix<Scalar>& av = an->value;
    const Matrix<Scalar>& bv = bn->value;
    const Index n = av.rows();
    // d/da [dot / (|a||b| + eps)] = b / den - dot * |b| a / (|a| den^2)
    ColVector<Scalar> g = self.grad.col(0);
    if (an->requires_grad) {
      Matrix<Scalar> ga(n, av.cols());
      for (Index i = 0; i < n; ++i) {
        const Scalar coef = na(i) > 0 ? dot(i) * nb(i) / (na(i) * den(i) * den(i)) : Scalar(0);
        ga.row(i) = g(i) * (bv.row(i) / den(i) - coef * av.row(i));
      }
      an->accumulate(ga);
    }
    if (bn->requires_grad) {
      Matrix<Scalar> gb(n, bv.cols());
      for (Index i = 0; i < n; ++i) {
        const Scalar coef = nb(i) > 0 ? dot(i) * na(i) / (nb(i) * den(i) * den(i)) : Scalar(0);
        gb.row(i) = g(i) * (av.row(i) / den(i) - coef * bv.row(i));
      }
      bn->accumulate(gb);
    }
  });
}

}  // namespace ad
}  // namespace tea
