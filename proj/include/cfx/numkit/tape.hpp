#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "cfx/numkit/params.hpp"
#include "cfx/numkit/tensor.hpp"

namespace cfx::nk {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double item() const { return value().item(); }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the node list
// is already a topological order and backward() walks it once in reverse.
// A tape is built for one forward/backward pass and then discarded.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Binds a parameter; backward() accumulates into param.grad.
  Var param(Parameter& p);
  // Read-only parameter use (no gradient even when recording).
  Var frozen(const Parameter& p);

  void backward(const Var& loss);

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t node_count() const { return nodes_.size(); }

  const Tensor& value(int id) const { return nodes_[id].value; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  // Gradient buffer of a node, zero-allocated on first access.
  Tensor& grad(int id);
  const std::vector<int>& inputs(int id) const { return nodes_[id].inputs; }

  Var push(Tensor value, std::vector<int> inputs, BackwardFn fn);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<int> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  bool grad_enabled_;
};

// Operators. Every tensor on the tape is treated as a matrix; a "row" is 1 x n.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
// a[m,n] + b[1,n] broadcast over rows.
Var add_row(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// a[m,n] * b[m,1] broadcast over columns.
Var mul_col(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);

Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);

Var softmax_rows(Var a);
Var log_softmax_rows(Var a);

Var sum(Var a);
Var mean(Var a);
// Sum over columns: [m,n] -> [m,1].
Var sum_cols(Var a);
// Column-wise max over all rows: [m,n] -> [1,n].
Var max_rows(Var a);
// Column-wise max per segment: rows with segment[i] == s reduce into row s.
// Every segment must be non-empty.
Var segment_max(Var a, std::span<const int> segment, std::size_t segments);

Var gather_rows(Var a, std::span<const int> index);
Var scatter_add_rows(Var a, std::span<const int> index, std::size_t rows);
// Picks a[i, cols[i]] for each row i -> [m,1].
Var pick(Var a, std::span<const int> cols);
Var concat_cols(Var a, Var b);
Var concat_rows(Var a, Var b);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
// Repeats a [1,n] row m times.
Var repeat_rows(Var a, std::size_t m);

Var clip(Var a, double lo, double hi);
Var minimum(Var a, Var b);

}  // namespace cfx::nk
