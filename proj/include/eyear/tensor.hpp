#pragma once

// Reverse-mode automatic differentiation over dense float64 tensors.
//
// Define-by-run: a Tape, while alive on the current thread, records every
// primitive whose inputs require gradients. Tape::backward walks the record
// in reverse execution order (which is a topological order by construction)
// and accumulates adjoints. Leaf gradients persist across backward calls and
// accumulate additively until zeroed; intermediate adjoints are scratch,
// valid for one pass only.
//
// Broadcasting is limited to size-1-with-tensor; anything else is an explicit
// reshape at the call site.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "eyear/common.hpp"

namespace eyear {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

class BackwardPass;

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // persistent; leaves only
  bool requires_grad = false;
  // Recorded primitives get a vector-Jacobian product: given the adjoint of
  // this node, accumulate into the adjoints of the inputs it captured.
  std::function<void(const std::vector<double>&, BackwardPass&)> vjp;
  // Scratch adjoint for one backward pass.
  std::vector<double> adj;
  std::uint64_t adj_pass = 0;
  std::ptrdiff_t tape_pos = -1;

  bool is_leaf() const { return !vjp; }
  std::size_t numel() const { return values.size(); }
};

using NodePtr = std::shared_ptr<TensorNode>;

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr n) : node_(std::move(n)) {}

  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false) {
    if (shape_numel(shape) != values.size())
      throw ShapeMismatch("tensor values length " +
                          std::to_string(values.size()) +
                          " does not match shape " + shape_str(shape));
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from({}, {v}, requires_grad);
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<double> v(shape_numel(shape), 0.0);
    return from(std::move(shape), std::move(v), requires_grad);
  }

  static Tensor vec2(const Vec2& p, bool requires_grad = false) {
    return from({2}, {p.x, p.y}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->values.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  const std::vector<double>& values() const { return node_->values; }
  std::vector<double>& values() { return node_->values; }
  double value() const {
    if (numel() != 1) throw NotScalar("value() on tensor " + shape_str(shape()));
    return node_->values[0];
  }
  double operator[](std::size_t i) const { return node_->values[i]; }
  Vec2 as_vec2() const {
    if (numel() != 2) throw ShapeMismatch("as_vec2 on " + shape_str(shape()));
    return {node_->values[0], node_->values[1]};
  }

  // Gradient of a leaf, zeros until a backward pass reaches it.
  const std::vector<double>& grad() const {
    ensure_grad();
    return node_->grad;
  }
  void zero_grad() {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }
  void ensure_grad() const {
    if (node_->grad.size() != node_->values.size())
      node_->grad.assign(node_->values.size(), 0.0);
  }

  // Fresh leaf with the same values (used for per-thread parameter clones).
  Tensor clone_leaf() const {
    return from(node_->shape, node_->values, node_->requires_grad);
  }

  NodePtr node() const { return node_; }
  TensorNode* raw() const { return node_.get(); }

 private:
  NodePtr node_;
};

// ---------------------------------------------------------------------------
// Tape

class Tape;

namespace detail {
inline thread_local Tape* g_active_tape = nullptr;
inline std::uint64_t next_pass_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}
}  // namespace detail

class BackwardPass {
 public:
  explicit BackwardPass(std::uint64_t id) : id_(id) {}

  // Accumulation buffer for a node's adjoint. Leaves get their persistent
  // grad; recorded nodes get pass-scoped scratch.
  double* adj(const NodePtr& n) {
    if (n->is_leaf()) {
      if (n->grad.size() != n->values.size())
        n->grad.assign(n->values.size(), 0.0);
      return n->grad.data();
    }
    if (n->adj_pass != id_) {
      n->adj.assign(n->values.size(), 0.0);
      n->adj_pass = id_;
    }
    return n->adj.data();
  }

  bool seen(const TensorNode* n) const { return n->adj_pass == id_; }
  std::uint64_t id() const { return id_; }

 private:
  std::uint64_t id_;
};

class Tape {
 public:
  Tape() : prev_(detail::g_active_tape) { detail::g_active_tape = this; }
  ~Tape() { detail::g_active_tape = prev_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return detail::g_active_tape; }

  std::size_t size() const { return order_.size(); }

  void record(const NodePtr& n) {
    n->tape_pos = static_cast<std::ptrdiff_t>(order_.size());
    order_.push_back(n);
  }

  // Accumulates d(loss)/d(leaf) into every requires_grad leaf reachable from
  // `loss`. Repeated calls accumulate additively.
  void backward(const Tensor& loss) {
    if (loss.numel() != 1)
      throw NotScalar("backward requires a scalar loss, got " +
                      shape_str(loss.shape()));
    const NodePtr& root = loss.node();
    if (root->tape_pos < 0 || static_cast<std::size_t>(root->tape_pos) >=
                                  order_.size() ||
        order_[static_cast<std::size_t>(root->tape_pos)] != root)
      throw Error("backward: loss is not recorded on this tape");

    BackwardPass pass(detail::next_pass_id());
    pass.adj(root)[0] += 1.0;
    for (std::ptrdiff_t i = root->tape_pos; i >= 0; --i) {
      TensorNode* n = order_[static_cast<std::size_t>(i)].get();
      if (!pass.seen(n)) continue;
      n->vjp(n->adj, pass);
    }
  }

 private:
  std::vector<NodePtr> order_;
  Tape* prev_ = nullptr;
};

// ---------------------------------------------------------------------------
// Primitive plumbing

namespace detail {

inline bool any_requires_grad(std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts)
    if (t->requires_grad()) return true;
  return false;
}

// Finalize a primitive's output: record on the active tape when gradients are
// wanted, otherwise strip graph info and hand back a plain value.
inline Tensor make_result(
    Shape shape, std::vector<double> values,
    std::initializer_list<const Tensor*> inputs,
    std::function<void(const std::vector<double>&, BackwardPass&)> vjp) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  if (Tape::active() && any_requires_grad(inputs)) {
    n->requires_grad = true;
    n->vjp = std::move(vjp);
    Tape::active()->record(n);
  }
  return Tensor(std::move(n));
}

inline void check_same_shape(const Tensor& a, const Tensor& b,
                             const char* op) {
  if (a.shape() != b.shape())
    throw ShapeMismatch(std::string(op) + ": shapes " + shape_str(a.shape()) +
                        " and " + shape_str(b.shape()) + " differ");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops with size-1 broadcast

namespace detail {

enum class BinKind { Add, Sub, Mul };

inline Tensor binary_op(const Tensor& a, const Tensor& b, BinKind kind,
                        const char* name) {
  const bool a_scalar = a.numel() == 1;
  const bool b_scalar = b.numel() == 1;
  if (!a_scalar && !b_scalar) check_same_shape(a, b, name);

  const Shape& out_shape = a_scalar && !b_scalar ? b.shape() : a.shape();
  const std::size_t n = shape_numel(out_shape);
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[a_scalar ? 0 : i];
    const double y = bv[b_scalar ? 0 : i];
    out[i] = kind == BinKind::Add ? x + y
             : kind == BinKind::Sub ? x - y
                                    : x * y;
  }

  NodePtr an = a.node(), bn = b.node();
  auto vjp = [an, bn, kind, a_scalar, b_scalar, n](
                 const std::vector<double>& g, BackwardPass& pass) {
    if (an->requires_grad) {
      double* ga = pass.adj(an);
      for (std::size_t i = 0; i < n; ++i) {
        double d = g[i];
        if (kind == BinKind::Mul) d *= bn->values[b_scalar ? 0 : i];
        ga[a_scalar ? 0 : i] += d;
      }
    }
    if (bn->requires_grad) {
      double* gb = pass.adj(bn);
      for (std::size_t i = 0; i < n; ++i) {
        double d = g[i];
        if (kind == BinKind::Sub) d = -d;
        if (kind == BinKind::Mul)
          d = g[i] * an->values[a_scalar ? 0 : i];
        gb[b_scalar ? 0 : i] += d;
      }
    }
  };
  return make_result(out_shape, std::move(out), {&a, &b}, std::move(vjp));
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary_op(a, b, detail::BinKind::Add, "add");
}
inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary_op(a, b, detail::BinKind::Sub, "sub");
}
inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary_op(a, b, detail::BinKind::Mul, "mul");
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// Scalar-constant conveniences (constants carry no gradient)
inline Tensor add_scalar(const Tensor& a, double c) {
  return add(a, Tensor::scalar(c));
}
inline Tensor mul_scalar(const Tensor& a, double c) {
  return mul(a, Tensor::scalar(c));
}
inline Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

// ---------------------------------------------------------------------------
// Elementwise unary ops

namespace detail {

inline Tensor unary_op(const Tensor& a, const char* name,
                       double (*fwd)(double),
                       double (*dfd_from_out)(double out, double in)) {
  const std::size_t n = a.numel();
  std::vector<double> out(n);
  const auto& av = a.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i]);

  NodePtr an = a.node();
  std::vector<double> outs_copy = out;  // captured for the derivative
  auto vjp = [an, dfd_from_out, outs_copy = std::move(outs_copy), n](
                 const std::vector<double>& g, BackwardPass& pass) {
    if (!an->requires_grad) return;
    double* ga = pass.adj(an);
    for (std::size_t i = 0; i < n; ++i)
      ga[i] += g[i] * dfd_from_out(outs_copy[i], an->values[i]);
  };
  (void)name;
  return make_result(a.shape(), std::move(out), {&a}, std::move(vjp));
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) {
    const double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

}  // namespace detail

inline Tensor tanh(const Tensor& a) {
  return detail::unary_op(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double y, double) { return 1.0 - y * y; });
}

inline Tensor sigmoid(const Tensor& a) {
  return detail::unary_op(
      a, "sigmoid", +[](double x) { return detail::stable_sigmoid(x); },
      [](double y, double) { return y * (1.0 - y); });
}

inline Tensor exp(const Tensor& a) {
  return detail::unary_op(
      a, "exp", [](double x) { return std::exp(x); },
      [](double y, double) { return y; });
}

inline Tensor log(const Tensor& a) {
  return detail::unary_op(
      a, "log", [](double x) { return std::log(x); },
      [](double, double x) { return 1.0 / x; });
}

// Elementwise clamp; subgradient passes only strictly inside the interval.
inline Tensor clamp(const Tensor& a, double lo, double hi) {
  const std::size_t n = a.numel();
  std::vector<double> out(n);
  const auto& av = a.values();
  for (std::size_t i = 0; i < n; ++i)
    out[i] = av[i] < lo ? lo : (av[i] > hi ? hi : av[i]);

  NodePtr an = a.node();
  auto vjp = [an, lo, hi, n](const std::vector<double>& g,
                             BackwardPass& pass) {
    if (!an->requires_grad) return;
    double* ga = pass.adj(an);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = an->values[i];
      if (x > lo && x < hi) ga[i] += g[i];
    }
  };
  return detail::make_result(a.shape(), std::move(out), {&a}, std::move(vjp));
}

inline Tensor clamp_max(const Tensor& a, double hi) {
  return clamp(a, -std::numeric_limits<double>::infinity(), hi);
}

// ---------------------------------------------------------------------------
// matmul: 2D x 2D, 2D x 1D, 1D x 2D, 1D x 1D (dot -> scalar)

namespace detail {

// C[m x p] += A[m x k] * B[k x p] on raw buffers
inline void mm_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const double av = a[i * k + l];
      const double* brow = b + l * p;
      double* crow = c + i * p;
      for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x p] += A^T[m x k] * B[k x p] where A is stored [k x m]
inline void mtm_acc(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t p) {
  for (std::size_t l = 0; l < k; ++l) {
    const double* arow = a + l * m;
    const double* brow = b + l * p;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + i * p;
      for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x p] += A[m x k] * B^T[k x p] where B is stored [p x k]
inline void mmt_acc(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * p;
    for (std::size_t j = 0; j < p; ++j) {
      const double* brow = b + j * k;
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += arow[l] * brow[l];
      crow[j] += s;
    }
  }
}

}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 1 || sa.size() > 2 || sb.size() < 1 || sb.size() > 2)
    throw ShapeMismatch("matmul: ranks must be 1 or 2, got " + shape_str(sa) +
                        " and " + shape_str(sb));

  const std::size_t m = sa.size() == 2 ? sa[0] : 1;
  const std::size_t ka = sa.size() == 2 ? sa[1] : sa[0];
  const std::size_t kb = sb.size() == 2 ? sb[0] : sb[0];
  const std::size_t p = sb.size() == 2 ? sb[1] : 1;
  if (ka != kb)
    throw ShapeMismatch("matmul: inner dimensions of " + shape_str(sa) +
                        " and " + shape_str(sb) + " differ");

  Shape out_shape;
  if (sa.size() == 2 && sb.size() == 2) out_shape = {m, p};
  else if (sa.size() == 2) out_shape = {m};
  else if (sb.size() == 2) out_shape = {p};
  // 1D x 1D -> scalar {}

  std::vector<double> out(m * p, 0.0);
  detail::mm_acc(a.values().data(), b.values().data(), out.data(), m, ka, p);

  NodePtr an = a.node(), bn = b.node();
  auto vjp = [an, bn, m, k = ka, p](const std::vector<double>& g,
                                    BackwardPass& pass) {
    // dA += g * B^T, dB += A^T * g
    if (an->requires_grad)
      detail::mmt_acc(g.data(), bn->values.data(), pass.adj(an), m, p, k);
    if (bn->requires_grad)
      detail::mtm_acc(an->values.data(), g.data(), pass.adj(bn), k, m, p);
  };
  return detail::make_result(std::move(out_shape), std::move(out), {&a, &b},
                             std::move(vjp));
}

// ---------------------------------------------------------------------------
// softmax over the last axis (rank 1 or 2)

inline Tensor softmax(const Tensor& a) {
  const Shape& s = a.shape();
  if (s.size() < 1 || s.size() > 2)
    throw ShapeMismatch("softmax: rank must be 1 or 2, got " + shape_str(s));
  const std::size_t cols = s.back();
  const std::size_t rows = a.numel() / cols;
  if (cols == 0) throw ShapeMismatch("softmax: empty axis");

  const auto& av = a.values();
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * cols;
    double* y = out.data() + r * cols;
    double mx = x[0];
    for (std::size_t i = 1; i < cols; ++i) mx = std::max(mx, x[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < cols; ++i) {
      y[i] = std::exp(x[i] - mx);
      sum += y[i];
    }
    const double inv = 1.0 / sum;
    for (std::size_t i = 0; i < cols; ++i) y[i] *= inv;
  }

  NodePtr an = a.node();
  std::vector<double> ycopy = out;
  auto vjp = [an, rows, cols, ycopy = std::move(ycopy)](
                 const std::vector<double>& g, BackwardPass& pass) {
    if (!an->requires_grad) return;
    double* ga = pass.adj(an);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = ycopy.data() + r * cols;
      const double* gr = g.data() + r * cols;
      double dot = 0.0;
      for (std::size_t i = 0; i < cols; ++i) dot += gr[i] * y[i];
      for (std::size_t i = 0; i < cols; ++i)
        ga[r * cols + i] += y[i] * (gr[i] - dot);
    }
  };
  return detail::make_result(s, std::move(out), {&a}, std::move(vjp));
}

// ---------------------------------------------------------------------------
// Reductions to scalar

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  NodePtr an = a.node();
  auto vjp = [an](const std::vector<double>& g, BackwardPass& pass) {
    if (!an->requires_grad) return;
    double* ga = pass.adj(an);
    const std::size_t n = an->values.size();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g[0];
  };
  return detail::make_result({}, {s}, {&a}, std::move(vjp));
}

inline Tensor mean(const Tensor& a) {
  const std::size_t n = a.numel();
  if (n == 0) throw ShapeMismatch("mean of empty tensor");
  double s = 0.0;
  for (double v : a.values()) s += v;
  NodePtr an = a.node();
  auto vjp = [an, n](const std::vector<double>& g, BackwardPass& pass) {
    if (!an->requires_grad) return;
    double* ga = pass.adj(an);
    const double d = g[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) ga[i] += d;
  };
  return detail::make_result({}, {s / static_cast<double>(n)}, {&a},
                             std::move(vjp));
}

// ---------------------------------------------------------------------------
// Structure ops

inline Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw ShapeMismatch("reshape: " + shape_str(a.shape()) + " to " +
                        shape_str(shape) + " changes element count");
  NodePtr an = a.node();
  auto vjp = [an](const std::vector<double>& g, BackwardPass& pass) {
    if (!an->requires_grad) return;
    double* ga = pass.adj(an);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  };
  return detail::make_result(std::move(shape), a.values(), {&a},
                             std::move(vjp));
}

// Concatenate along axis 0. All operands share rank and trailing extents.
inline Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat of zero tensors");
  const Shape& first = parts[0].shape();
  if (first.empty()) throw ShapeMismatch("concat of scalars");
  Shape out_shape = first;
  std::size_t rows = 0;
  for (const Tensor& t : parts) {
    const Shape& s = t.shape();
    if (s.size() != first.size() ||
        !std::equal(s.begin() + 1, s.end(), first.begin() + 1))
      throw ShapeMismatch("concat: incompatible shapes " + shape_str(first) +
                          " and " + shape_str(s));
    rows += s[0];
  }
  out_shape[0] = rows;

  std::vector<double> out;
  out.reserve(shape_numel(out_shape));
  for (const Tensor& t : parts)
    out.insert(out.end(), t.values().begin(), t.values().end());

  std::vector<NodePtr> nodes;
  nodes.reserve(parts.size());
  bool any_rg = false;
  for (const Tensor& t : parts) {
    nodes.push_back(t.node());
    any_rg = any_rg || t.requires_grad();
  }
  auto vjp = [nodes](const std::vector<double>& g, BackwardPass& pass) {
    std::size_t offset = 0;
    for (const NodePtr& n : nodes) {
      const std::size_t len = n->values.size();
      if (n->requires_grad) {
        double* ga = pass.adj(n);
        for (std::size_t i = 0; i < len; ++i) ga[i] += g[offset + i];
      }
      offset += len;
    }
  };

  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(out_shape);
  n->values = std::move(out);
  if (Tape::active() && any_rg) {
    n->requires_grad = true;
    n->vjp = std::move(vjp);
    Tape::active()->record(n);
  }
  return Tensor(std::move(n));
}

// Slice [start, start+len) along axis 0.
inline Tensor slice(const Tensor& a, std::size_t start, std::size_t len) {
  const Shape& s = a.shape();
  if (s.empty()) throw ShapeMismatch("slice of a scalar");
  if (start + len > s[0])
    throw ShapeMismatch("slice [" + std::to_string(start) + "," +
                        std::to_string(start + len) + ") out of range for " +
                        shape_str(s));
  std::size_t stride = 1;
  for (std::size_t i = 1; i < s.size(); ++i) stride *= s[i];

  Shape out_shape = s;
  out_shape[0] = len;
  std::vector<double> out(a.values().begin() + start * stride,
                          a.values().begin() + (start + len) * stride);

  NodePtr an = a.node();
  auto vjp = [an, start, stride](const std::vector<double>& g,
                                 BackwardPass& pass) {
    if (!an->requires_grad) return;
    double* ga = pass.adj(an);
    for (std::size_t i = 0; i < g.size(); ++i)
      ga[start * stride + i] += g[i];
  };
  return detail::make_result(std::move(out_shape), std::move(out), {&a},
                             std::move(vjp));
}

// ---------------------------------------------------------------------------
// Gradient check: max over coordinates of
// |analytic - central difference| / max(1, |analytic|).

inline double grad_check(const std::function<Tensor(const Tensor&)>& f,
                         const Tensor& x, double eps = 1e-6) {
  if (!(eps > 0.0 && eps <= 1e-2))
    throw Error("grad_check: eps must lie in (0, 1e-2]");

  Tensor probe = Tensor::from(x.shape(), x.values(), true);
  {
    Tape tape;
    Tensor y = f(probe);
    if (y.numel() != 1) throw NotScalar("grad_check: f must be scalar-valued");
    tape.backward(y);
  }
  const std::vector<double> analytic = probe.grad();

  std::vector<double> vals = x.values();
  double worst = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double keep = vals[i];
    vals[i] = keep + eps;
    const double fp = f(Tensor::from(x.shape(), vals)).value();
    vals[i] = keep - eps;
    const double fm = f(Tensor::from(x.shape(), vals)).value();
    vals[i] = keep;
    const double fd = (fp - fm) / (2.0 * eps);
    const double err =
        std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace eyear
