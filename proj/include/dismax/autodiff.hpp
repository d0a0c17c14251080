#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dismax/tensor.hpp"

namespace dismax {

struct Var {
  std::uint32_t id = 0xffffffffu;
  bool valid() const { return id != 0xffffffffu; }
};

// Reverse-mode tape over tensors. Nodes are appended in forward order, so the
// record is topologically sorted by construction; backward() sweeps it once
// in reverse. A tape is single-owner: build the graph, call backward, read
// gradients, discard.
//
// The primitive set is closed: matmul, add (plus row/column broadcasts),
// sub, mul, scalar ops, relu, abs, log, clamp_min, l2_normalize,
// pairwise Euclidean distance, stable softmax and reductions. Everything
// else is composed from these.
class Tape {
 public:
  Var input(Tensor value, bool trainable = false);
  Var constant(Tensor value) { return input(std::move(value), false); }

  Var matmul(Var a, Var b);      // (m×k)·(k×n) -> (m×n)
  Var add(Var a, Var b);         // same shape
  Var add_rowvec(Var m, Var v);  // (B×n) + (n), broadcast over rows
  Var add_colvec(Var m, Var v);  // (B×n) + (B), broadcast over columns
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double c);
  Var neg(Var a) { return scale(a, -1.0); }
  Var mul_scalar(Var a, Var s);  // s rank-0, broadcast multiply
  Var relu(Var a);
  Var abs(Var a);
  Var log(Var a);
  // out = max(a, lo); increments *clamp_count per clamped entry when given.
  Var clamp_min(Var a, double lo, std::uint64_t* clamp_count = nullptr);
  Var l2_normalize_rows(Var a);         // rank-1 or (B×d) row-wise
  Var pairwise_distance(Var f, Var p);  // (B×d),(N×d) -> (B×N)
  Var softmax_rows(Var z, double scale);
  Var sum(Var a);       // -> rank-0
  Var mean(Var a);      // -> rank-0
  Var max(Var a);       // -> rank-0, gradient to the first argmax
  Var row_sum(Var a);   // (B×n) -> (B)
  Var row_mean(Var a);  // (B×n) -> (B)
  Var pick_per_row(Var m, std::vector<std::size_t> cols);  // (B×n) -> (B)
  Var reshape(Var a, std::vector<std::size_t> shape);

  void backward(Var loss);  // loss must hold a single element

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;  // valid after backward()
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    std::function<void(Tape&, std::uint32_t)> back;  // null for leaves
  };

  Var push(Tensor value, bool needs_grad,
           std::function<void(Tape&, std::uint32_t)> back);
  Node& at(Var v);
  const Node& at(Var v) const;

  std::vector<Node> nodes_;
  bool ran_backward_ = false;
};

}  // namespace dismax
