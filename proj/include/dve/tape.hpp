#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dve/errors.hpp"
#include "dve/sparse.hpp"
#include "dve/tensor.hpp"

namespace dve {

struct NodeId {
  std::int32_t v = -1;
  bool valid() const { return v >= 0; }
  bool operator==(const NodeId&) const = default;
};

// Reverse-mode tape over dense tensors. Operations record their inputs at
// call time; backward() walks the nodes in reverse creation order, which is
// a topological order by construction. Gradients only flow into nodes that
// (transitively) depend on a trainable leaf, so constant leaves cost nothing.
//
// Every forward result is checked for finiteness; a failure raises
// NumericError naming the operation that produced it.
class Tape {
 public:
  NodeId leaf(Tensor value, bool trainable = false) {
    Node n;
    n.op = Op::leaf;
    n.value = std::move(value);
    n.trainable = trainable;
    n.needs_grad = trainable;
    return push(std::move(n));
  }

  NodeId matmul(NodeId a, NodeId b) {
    Node n = binary(Op::matmul, a, b);
    n.value = dve::matmul(value(a), value(b));
    return push(std::move(n));
  }

  // s is borrowed and must outlive the tape. Its transpose is cached for the
  // backward pass.
  NodeId spmm_const(const SparseMatrix* s, NodeId a) {
    Node n = unary(Op::spmm_const, a);
    n.sparse = s;
    if (n.needs_grad) n.sparse_t = s->transposed();
    n.value = spmm(*s, value(a));
    return push(std::move(n));
  }

  NodeId add(NodeId a, NodeId b) {
    Node n = binary(Op::add, a, b);
    n.value = dve::add(value(a), value(b));
    return push(std::move(n));
  }

  NodeId sub(NodeId a, NodeId b) {
    Node n = binary(Op::sub, a, b);
    n.value = dve::sub(value(a), value(b));
    return push(std::move(n));
  }

  NodeId scalar_mul(NodeId a, double c) {
    Node n = unary(Op::scalar_mul, a);
    n.scalar = c;
    n.value = scale(value(a), c);
    return push(std::move(n));
  }

  NodeId ew_mul(NodeId a, NodeId b) {
    Node n = binary(Op::ew_mul, a, b);
    n.value = hadamard(value(a), value(b));
    return push(std::move(n));
  }

  NodeId exp(NodeId a) {
    Node n = unary(Op::exp, a);
    n.value = map(value(a), [](double x) { return std::exp(x); });
    return push(std::move(n));
  }

  NodeId relu(NodeId a) {
    Node n = unary(Op::relu, a);
    n.value = map(value(a), [](double x) { return x > 0.0 ? x : 0.0; });
    return push(std::move(n));
  }

  NodeId sigmoid(NodeId a) {
    Node n = unary(Op::sigmoid, a);
    n.value = map(value(a), [](double x) { return sigmoid_stable(x); });
    return push(std::move(n));
  }

  // ln sigma(x), computed without overflow on large |x|.
  NodeId log_sigmoid(NodeId a) {
    Node n = unary(Op::log_sigmoid, a);
    n.value = map(value(a), [](double x) {
      return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
    });
    return push(std::move(n));
  }

  NodeId clamp(NodeId a, double lo, double hi) {
    require(lo <= hi, "clamp: lo > hi");
    Node n = unary(Op::clamp, a);
    n.lo = lo;
    n.hi = hi;
    n.value = map(value(a), [lo, hi](double x) { return std::min(std::max(x, lo), hi); });
    return push(std::move(n));
  }

  NodeId square(NodeId a) {
    Node n = unary(Op::square, a);
    n.value = map(value(a), [](double x) { return x * x; });
    return push(std::move(n));
  }

  // Selects rows of a; duplicate indices are fine (their gradients add).
  NodeId row_gather(NodeId a, std::vector<std::int64_t> rows) {
    Node n = unary(Op::row_gather, a);
    const Tensor& src = value(a);
    Tensor out(static_cast<std::int64_t>(rows.size()), src.cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      require(rows[r] >= 0 && rows[r] < src.rows, "row_gather: index out of range");
      for (std::int64_t j = 0; j < src.cols; ++j) out(r, j) = src(rows[r], j);
    }
    n.rows = std::move(rows);
    n.value = std::move(out);
    return push(std::move(n));
  }

  NodeId concat_cols(NodeId a, NodeId b) {
    Node n = binary(Op::concat_cols, a, b);
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    require(x.rows == y.rows, "concat_cols: row counts differ");
    Tensor out(x.rows, x.cols + y.cols);
    for (std::int64_t i = 0; i < x.rows; ++i) {
      for (std::int64_t j = 0; j < x.cols; ++j) out(i, j) = x(i, j);
      for (std::int64_t j = 0; j < y.cols; ++j) out(i, x.cols + j) = y(i, j);
    }
    n.value = std::move(out);
    return push(std::move(n));
  }

  NodeId sum(NodeId a) {
    Node n = unary(Op::sum, a);
    double acc = 0.0;
    for (double v : value(a).data) acc += v;
    n.value = Tensor(1, 1);
    n.value(0, 0) = acc;
    return push(std::move(n));
  }

  NodeId mean(NodeId a) {
    require(value(a).size() > 0, "mean: empty tensor");
    Node n = unary(Op::mean, a);
    double acc = 0.0;
    for (double v : value(a).data) acc += v;
    n.value = Tensor(1, 1);
    n.value(0, 0) = acc / static_cast<double>(value(a).size());
    return push(std::move(n));
  }

  const Tensor& value(NodeId id) const { return at(id).value; }

  // Valid after backward(); zero tensor for nodes outside the gradient flow.
  const Tensor& grad(NodeId id) const {
    const Node& n = at(id);
    if (n.grad.size() == 0) {
      static const Tensor empty;
      if (n.value.size() == 0) return empty;
      zero_grad_scratch_ = Tensor(n.value.rows, n.value.cols);
      return zero_grad_scratch_;
    }
    return n.grad;
  }

  bool needs_grad(NodeId id) const { return at(id).needs_grad; }

  std::vector<NodeId> trainable_leaves() const {
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].trainable) out.push_back({static_cast<std::int32_t>(i)});
    }
    return out;
  }

  // Accumulates d(loss)/d(node) for every node reachable from a trainable
  // leaf. loss must be 1 x 1.
  void backward(NodeId loss) {
    Node& top = at(loss);
    require(top.value.rows == 1 && top.value.cols == 1, "backward: loss must be 1 x 1");
    for (Node& n : nodes_) n.grad = Tensor();
    if (!top.needs_grad) return;
    top.grad = Tensor(1, 1, 1.0);
    for (std::int64_t i = loss.v; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.grad.size() == 0 || n.op == Op::leaf) continue;
      spread(n);
    }
  }

 private:
  enum class Op {
    leaf, matmul, spmm_const, add, sub, scalar_mul, ew_mul, exp, relu,
    sigmoid, log_sigmoid, clamp, square, row_gather, concat_cols, sum, mean
  };

  static const char* op_name(Op op) {
    switch (op) {
      case Op::leaf: return "leaf";
      case Op::matmul: return "matmul";
      case Op::spmm_const: return "spmm_const";
      case Op::add: return "add";
      case Op::sub: return "sub";
      case Op::scalar_mul: return "scalar_mul";
      case Op::ew_mul: return "ew_mul";
      case Op::exp: return "exp";
      case Op::relu: return "relu";
      case Op::sigmoid: return "sigmoid";
      case Op::log_sigmoid: return "log_sigmoid";
      case Op::clamp: return "clamp";
      case Op::square: return "square";
      case Op::row_gather: return "row_gather";
      case Op::concat_cols: return "concat_cols";
      case Op::sum: return "sum";
      case Op::mean: return "mean";
    }
    return "?";
  }

  struct Node {
    Op op = Op::leaf;
    Tensor value;
    Tensor grad;
    std::int32_t a = -1;
    std::int32_t b = -1;
    double scalar = 0.0;
    double lo = 0.0, hi = 0.0;
    std::vector<std::int64_t> rows;
    const SparseMatrix* sparse = nullptr;
    SparseMatrix sparse_t;
    bool trainable = false;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  mutable Tensor zero_grad_scratch_;

  Node& at(NodeId id) { return nodes_[check_id(id)]; }
  const Node& at(NodeId id) const { return nodes_[check_id(id)]; }

  std::size_t check_id(NodeId id) const {
    require(id.v >= 0 && id.v < static_cast<std::int32_t>(nodes_.size()),
            "tape: bad node id");
    return static_cast<std::size_t>(id.v);
  }

  Node unary(Op op, NodeId a) {
    Node n;
    n.op = op;
    n.a = static_cast<std::int32_t>(check_id(a));
    n.needs_grad = at(a).needs_grad;
    return n;
  }

  Node binary(Op op, NodeId a, NodeId b) {
    Node n;
    n.op = op;
    n.a = static_cast<std::int32_t>(check_id(a));
    n.b = static_cast<std::int32_t>(check_id(b));
    n.needs_grad = at(a).needs_grad || at(b).needs_grad;
    return n;
  }

  NodeId push(Node n) {
    if (!n.value.all_finite()) {
      throw NumericError(std::string("non-finite values produced by ") + op_name(n.op));
    }
    nodes_.push_back(std::move(n));
    return {static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  static double sigmoid_stable(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  }

  template <class F>
  static Tensor map(const Tensor& t, F&& f) {
    Tensor out(t.rows, t.cols);
    for (std::int64_t i = 0; i < t.size(); ++i) out.data[i] = f(t.data[i]);
    return out;
  }

  void accumulate(std::int32_t idx, const Tensor& delta) {
    if (idx < 0) return;
    Node& n = nodes_[idx];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = delta;
    } else {
      require(n.grad.same_shape(delta), "backward: gradient shape mismatch");
      for (std::int64_t i = 0; i < delta.size(); ++i) n.grad.data[i] += delta.data[i];
    }
  }

  void spread(Node& n) {
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::matmul:
        accumulate(n.a, matmul_nt(g, nodes_[n.b].value));
        accumulate(n.b, matmul_tn(nodes_[n.a].value, g));
        break;
      case Op::spmm_const:
        accumulate(n.a, spmm(n.sparse_t, g));
        break;
      case Op::add:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::sub:
        accumulate(n.a, g);
        accumulate(n.b, scale(g, -1.0));
        break;
      case Op::scalar_mul:
        accumulate(n.a, scale(g, n.scalar));
        break;
      case Op::ew_mul:
        accumulate(n.a, hadamard(g, nodes_[n.b].value));
        accumulate(n.b, hadamard(g, nodes_[n.a].value));
        break;
      case Op::exp:
        accumulate(n.a, hadamard(g, n.value));
        break;
      case Op::relu: {
        Tensor d = g;
        const Tensor& x = nodes_[n.a].value;
        for (std::int64_t i = 0; i < d.size(); ++i) {
          if (x.data[i] <= 0.0) d.data[i] = 0.0;
        }
        accumulate(n.a, d);
        break;
      }
      case Op::sigmoid: {
        Tensor d = g;
        for (std::int64_t i = 0; i < d.size(); ++i) {
          const double s = n.value.data[i];
          d.data[i] *= s * (1.0 - s);
        }
        accumulate(n.a, d);
        break;
      }
      case Op::log_sigmoid: {
        Tensor d = g;
        const Tensor& x = nodes_[n.a].value;
        for (std::int64_t i = 0; i < d.size(); ++i) {
          d.data[i] *= sigmoid_stable(-x.data[i]);
        }
        accumulate(n.a, d);
        break;
      }
      case Op::clamp: {
        Tensor d = g;
        const Tensor& x = nodes_[n.a].value;
        for (std::int64_t i = 0; i < d.size(); ++i) {
          if (x.data[i] < n.lo || x.data[i] > n.hi) d.data[i] = 0.0;
        }
        accumulate(n.a, d);
        break;
      }
      case Op::square: {
        Tensor d = g;
        const Tensor& x = nodes_[n.a].value;
        for (std::int64_t i = 0; i < d.size(); ++i) d.data[i] *= 2.0 * x.data[i];
        accumulate(n.a, d);
        break;
      }
      case Op::row_gather: {
        const Tensor& src = nodes_[n.a].value;
        Tensor d(src.rows, src.cols);
        for (std::size_t r = 0; r < n.rows.size(); ++r) {
          for (std::int64_t j = 0; j < src.cols; ++j) {
            d(n.rows[r], j) += g(static_cast<std::int64_t>(r), j);
          }
        }
        accumulate(n.a, d);
        break;
      }
      case Op::concat_cols: {
        const Tensor& x = nodes_[n.a].value;
        const Tensor& y = nodes_[n.b].value;
        if (nodes_[n.a].needs_grad) {
          Tensor dx(x.rows, x.cols);
          for (std::int64_t i = 0; i < x.rows; ++i) {
            for (std::int64_t j = 0; j < x.cols; ++j) dx(i, j) = g(i, j);
          }
          accumulate(n.a, dx);
        }
        if (nodes_[n.b].needs_grad) {
          Tensor dy(y.rows, y.cols);
          for (std::int64_t i = 0; i < y.rows; ++i) {
            for (std::int64_t j = 0; j < y.cols; ++j) dy(i, j) = g(i, x.cols + j);
          }
          accumulate(n.b, dy);
        }
        break;
      }
      case Op::sum: {
        const Tensor& x = nodes_[n.a].value;
        accumulate(n.a, Tensor(x.rows, x.cols, g(0, 0)));
        break;
      }
      case Op::mean: {
        const Tensor& x = nodes_[n.a].value;
        accumulate(n.a, Tensor(x.rows, x.cols, g(0, 0) / static_cast<double>(x.size())));
        break;
      }
      case Op::leaf:
        break;
    }
  }
};

}  // namespace dve
