#include "cfx/numkit/tape.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace cfx::nk {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

MapC view(const Tensor& t) {
  return MapC(t.data().data(), static_cast<Eigen::Index>(t.rows()),
              static_cast<Eigen::Index>(t.cols()));
}

Map view(Tensor& t) {
  return Map(t.data().data(), static_cast<Eigen::Index>(t.rows()),
             static_cast<Eigen::Index>(t.cols()));
}

Tensor like(const Tensor& t, double fill = 0.0) {
  return Tensor::matrix(t.rows(), t.cols(), fill);
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_str({a.rows(), a.cols()}) +
                   " vs " + shape_str({b.rows(), b.cols()}));
}

void same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) mismatch(op, a, b);
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape || a.tape == nullptr) {
    throw std::invalid_argument("operands recorded on different tapes");
  }
  return *a.tape;
}

// Elementwise unary op whose derivative is expressed through input x and output y.
template <class F, class D>
Var unary(Var a, F f, D dfdx) {
  Tape& tape = *a.tape;
  const Tensor& x = a.value();
  Tensor y = like(x);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return tape.push(std::move(y), {a.id}, [dfdx](Tape& t, int self) {
    const int in = t.inputs(self)[0];
    if (!t.needs_grad(in)) return;
    const Tensor& x = t.value(in);
    const Tensor& y = t.value(self);
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(in);
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[i] * dfdx(x[i], y[i]);
  });
}

}  // namespace

const Tensor& Var::value() const { return tape->value(id); }

Tensor& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

Var Tape::push(Tensor value, std::vector<int> inputs, BackwardFn fn) {
  Node node;
  node.value = std::move(value);
  if (grad_enabled_) {
    node.needs_grad = std::any_of(inputs.begin(), inputs.end(),
                                  [this](int i) { return nodes_[i].needs_grad; });
    if (node.needs_grad) node.backward = std::move(fn);
  }
  node.inputs = std::move(inputs);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor value) {
  if (value.rank() != 2) value = Tensor({value.rows(), value.cols()}, value.vec());
  return push(std::move(value), {}, nullptr);
}

Var Tape::param(Parameter& p) {
  Node node;
  node.value = p.value;
  node.param = &p;
  node.needs_grad = grad_enabled_;
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::frozen(const Parameter& p) { return push(p.value, {}, nullptr); }

void Tape::backward(const Var& loss) {
  if (loss.tape != this) throw std::invalid_argument("backward: loss is not on this tape");
  if (value(loss.id).size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + value(loss.id).shape_str());
  }
  if (!grad_enabled_) throw std::logic_error("backward on a tape without gradient recording");
  grad(loss.id)[0] += 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.size() != n.value.size()) continue;
    if (n.param) {
      Tensor& dst = n.param->grad;
      if (dst.size() != n.grad.size()) dst = Tensor(n.value.shape(), 0.0);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad[i];
    } else if (n.backward) {
      n.backward(*this, id);
    }
  }
}

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  if (x.cols() != w.rows()) mismatch("matmul", x, w);
  Tensor y = Tensor::matrix(x.rows(), w.cols());
  view(y).noalias() = view(x) * view(w);
  return tape.push(std::move(y), {a.id, b.id}, [](Tape& t, int self) {
    const int ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) view(t.grad(ia)).noalias() += view(g) * view(t.value(ib)).transpose();
    if (t.needs_grad(ib)) view(t.grad(ib)).noalias() += view(t.value(ia)).transpose() * view(g);
  });
}

Var add(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  same_shape("add", a.value(), b.value());
  Tensor y = a.value();
  const Tensor& v = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += v[i];
  return tape.push(std::move(y), {a.id, b.id}, [](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    for (int in : t.inputs(self)) {
      if (!t.needs_grad(in)) continue;
      Tensor& gi = t.grad(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

Var add_row(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& r = b.value();
  if (r.rows() != 1 || r.cols() != x.cols()) mismatch("add_row", x, r);
  Tensor y = x;
  const std::size_t n = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] += r[j];
  return tape.push(std::move(y), {a.id, b.id}, [](Tape& t, int self) {
    const int ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad(ib);
      const std::size_t n = g.cols();
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    }
  });
}

Var sub(Var a, Var b) { return add(a, neg(b)); }

Var mul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  same_shape("mul", a.value(), b.value());
  Tensor y = a.value();
  const Tensor& v = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= v[i];
  return tape.push(std::move(y), {a.id, b.id}, [](Tape& t, int self) {
    const int ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad(ia);
      const Tensor& vb = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad(ib);
      const Tensor& va = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

Var mul_col(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& c = b.value();
  if (c.cols() != 1 || c.rows() != x.rows()) mismatch("mul_col", x, c);
  Tensor y = x;
  const std::size_t n = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] *= c[i];
  return tape.push(std::move(y), {a.id, b.id}, [](Tape& t, int self) {
    const int ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    const Tensor& g = t.grad(self);
    const std::size_t n = g.cols();
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad(ia);
      const Tensor& c = t.value(ib);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] * c[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& gc = t.grad(ib);
      const Tensor& x = t.value(ia);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < n; ++j) gc[i] += g[i * n + j] * x[i * n + j];
    }
  });
}

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(a,
               [](double x) {
                 return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                 : std::exp(x) / (1.0 + std::exp(x));
               },
               [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var softmax_rows(Var a) {
  Tape& tape = *a.tape;
  const Tensor& x = a.value();
  Tensor y = like(x);
  const std::size_t n = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, x[i * n + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (y[i * n + j] = std::exp(x[i * n + j] - mx));
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] /= z;
  }
  return tape.push(std::move(y), {a.id}, [](Tape& t, int self) {
    const int in = t.inputs(self)[0];
    if (!t.needs_grad(in)) return;
    const Tensor& y = t.value(self);
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(in);
    const std::size_t n = y.cols();
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
    }
  });
}

Var log_softmax_rows(Var a) {
  Tape& tape = *a.tape;
  const Tensor& x = a.value();
  Tensor y = like(x);
  const std::size_t n = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, x[i * n + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(x[i * n + j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = x[i * n + j] - lse;
  }
  return tape.push(std::move(y), {a.id}, [](Tape& t, int self) {
    const int in = t.inputs(self)[0];
    if (!t.needs_grad(in)) return;
    const Tensor& y = t.value(self);
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(in);
    const std::size_t n = y.cols();
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < n; ++j) gs += g[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        gx[i * n + j] += g[i * n + j] - std::exp(y[i * n + j]) * gs;
    }
  });
}

Var sum(Var a) {
  Tape& tape = *a.tape;
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return tape.push(Tensor::scalar(s), {a.id}, [](Tape& t, int self) {
    const int in = t.inputs(self)[0];
    if (!t.needs_grad(in)) return;
    const double g = t.grad(self)[0];
    for (double& v : t.grad(in).vec()) v += g;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var sum_cols(Var a) {
  Tape& tape = *a.tape;
  const Tensor& x = a.value();
  Tensor y = Tensor::matrix(x.rows(), 1);
  const std::size_t n = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < n; ++j) y[i] += x[i * n + j];
  return tape.push(std::move(y), {a.id}, [](Tape& t, int self) {
    const int in = t.inputs(self)[0];
    if (!t.needs_grad(in)) return;
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(in);
    const std::size_t n = gx.cols();
    for (std::size_t i = 0; i < gx.rows(); ++i)
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[i];
  });
}

Var segment_max(Var a, std::span<const int> segment, std::size_t segments) {
  Tape& tape = *a.tape;
  const Tensor& x = a.value();
  if (segment.size() != x.rows()) {
    throw ShapeError("segment_max: " + std::to_string(segment.size()) +
                     " segment ids for " + std::to_string(x.rows()) + " rows");
  }
  const std::size_t n = x.cols();
  Tensor y = Tensor::matrix(segments, n, -std::numeric_limits<double>::infinity());
  // argmax row per output cell; first maximal row wins
  auto arg = std::make_shared<std::vector<int>>(segments * n, -1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const std::size_t s = static_cast<std::size_t>(segment[i]);
    if (s >= segments) throw ShapeError("segment_max: segment id out of range");
    for (std::size_t j = 0; j < n; ++j) {
      if (x[i * n + j] > y[s * n + j]) {
        y[s * n + j] = x[i * n + j];
        (*arg)[s * n + j] = static_cast<int>(i);
      }
    }
  }
  for (int r : *arg) {
    if (r < 0) throw ShapeError("segment_max: empty segment");
  }
  return tape.push(std::move(y), {a.id}, [arg](Tape& t, int self) {
    const int in = t.inputs(self)[0];
    if (!t.needs_grad(in)) return;
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(in);
    const std::size_t n = g.cols();
    for (std::size_t k = 0; k < g.size(); ++k) {
      gx[static_cast<std::size_t>((*arg)[k]) * n + k % n] += g[k];
    }
  });
}

Var max_rows(Var a) {
  std::vector<int> seg(a.rows(), 0);
  return segment_max(a, seg, 1);
}

Var gather_rows(Var a, std::span<const int> index) {
  Tape& tape = *a.tape;
  const Tensor& x = a.value();
  const std::size_t n = x.cols();
  Tensor y = Tensor::matrix(index.size(), n);
  for (std::size_t i = 0; i < index.size(); ++i) {
    const std::size_t r = static_cast<std::size_t>(index[i]);
    if (r >= x.rows()) throw ShapeError("gather_rows: index out of range");
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(r * n), n,
                y.data().begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  auto idx = std::make_shared<std::vector<int>>(index.begin(), index.end());
  return tape.push(std::move(y), {a.id}, [idx](Tape& t, int self) {
    const int in = t.inputs(self)[0];
    if (!t.needs_grad(in)) return;
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(in);
    const std::size_t n = g.cols();
    for (std::size_t i = 0; i < idx->size(); ++i) {
      const std::size_t r = static_cast<std::size_t>((*idx)[i]);
      for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += g[i * n + j];
    }
  });
}

Var scatter_add_rows(Var a, std::span<const int> index, std::size_t rows) {
  Tape& tape = *a.tape;
  const Tensor& x = a.value();
  if (index.size() != x.rows()) throw ShapeError("scatter_add_rows: index length mismatch");
  const std::size_t n = x.cols();
  Tensor y = Tensor::matrix(rows, n);
  for (std::size_t i = 0; i < index.size(); ++i) {
    const std::size_t r = static_cast<std::size_t>(index[i]);
    if (r >= rows) throw ShapeError("scatter_add_rows: index out of range");
    for (std::size_t j = 0; j < n; ++j) y[r * n + j] += x[i * n + j];
  }
  auto idx = std::make_shared<std::vector<int>>(index.begin(), index.end());
  return tape.push(std::move(y), {a.id}, [idx](Tape& t, int self) {
    const int in = t.inputs(self)[0];
    if (!t.needs_grad(in)) return;
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(in);
    const std::size_t n = g.cols();
    for (std::size_t i = 0; i < idx->size(); ++i) {
      const std::size_t r = static_cast<std::size_t>((*idx)[i]);
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[r * n + j];
    }
  });
}

Var pick(Var a, std::span<const int> cols) {
  Tape& tape = *a.tape;
  const Tensor& x = a.value();
  if (cols.size() != x.rows()) throw ShapeError("pick: one column index per row required");
  const std::size_t n = x.cols();
  Tensor y = Tensor::matrix(x.rows(), 1);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (static_cast<std::size_t>(cols[i]) >= n) throw ShapeError("pick: column out of range");
    y[i] = x[i * n + static_cast<std::size_t>(cols[i])];
  }
  auto idx = std::make_shared<std::vector<int>>(cols.begin(), cols.end());
  return tape.push(std::move(y), {a.id}, [idx](Tape& t, int self) {
    const int in = t.inputs(self)[0];
    if (!t.needs_grad(in)) return;
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(in);
    const std::size_t n = gx.cols();
    for (std::size_t i = 0; i < idx->size(); ++i)
      gx[i * n + static_cast<std::size_t>((*idx)[i])] += g[i];
  });
}

Var concat_cols(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  if (x.rows() != w.rows()) mismatch("concat_cols", x, w);
  const std::size_t na = x.cols(), nb = w.cols(), n = na + nb;
  Tensor y = Tensor::matrix(x.rows(), n);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < na; ++j) y[i * n + j] = x[i * na + j];
    for (std::size_t j = 0; j < nb; ++j) y[i * n + na + j] = w[i * nb + j];
  }
  return tape.push(std::move(y), {a.id, b.id}, [na, nb](Tape& t, int self) {
    const int ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    const Tensor& g = t.grad(self);
    const std::size_t n = na + nb;
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < na; ++j) ga[i * na + j] += g[i * n + j];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < nb; ++j) gb[i * nb + j] += g[i * n + na + j];
    }
  });
}

Var concat_rows(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  if (x.cols() != w.cols()) mismatch("concat_rows", x, w);
  std::vector<double> data(x.vec());
  data.insert(data.end(), w.vec().begin(), w.vec().end());
  const std::size_t split = x.size();
  Tensor y({x.rows() + w.rows(), x.cols()}, std::move(data));
  return tape.push(std::move(y), {a.id, b.id}, [split](Tape& t, int self) {
    const int ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < split; ++i) ga[i] += g[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t i = split; i < g.size(); ++i) gb[i - split] += g[i];
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  Tape& tape = *a.tape;
  const Tensor& x = a.value();
  if (begin > end || end > x.rows()) throw ShapeError("slice_rows: range out of bounds");
  const std::size_t n = x.cols();
  std::vector<double> data(x.vec().begin() + static_cast<std::ptrdiff_t>(begin * n),
                           x.vec().begin() + static_cast<std::ptrdiff_t>(end * n));
  Tensor y({end - begin, n}, std::move(data));
  const std::size_t offset = begin * n;
  return tape.push(std::move(y), {a.id}, [offset](Tape& t, int self) {
    const int in = t.inputs(self)[0];
    if (!t.needs_grad(in)) return;
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(in);
    for (std::size_t i = 0; i < g.size(); ++i) gx[offset + i] += g[i];
  });
}

Var repeat_rows(Var a, std::size_t m) {
  std::vector<int> idx(m, 0);
  if (a.rows() != 1) throw ShapeError("repeat_rows: expects a single row, got " + a.value().shape_str());
  return gather_rows(a, idx);
}

Var clip(Var a, double lo, double hi) {
  return unary(a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

Var minimum(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  same_shape("minimum", a.value(), b.value());
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  Tensor y = like(x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::min(x[i], w[i]);
  return tape.push(std::move(y), {a.id, b.id}, [](Tape& t, int self) {
    const int ia = t.inputs(self)[0], ib = t.inputs(self)[1];
    const Tensor& x = t.value(ia);
    const Tensor& w = t.value(ib);
    const Tensor& g = t.grad(self);
    // ties route the gradient to the first operand
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (x[i] <= w[i]) ga[i] += g[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (x[i] > w[i]) gb[i] += g[i];
    }
  });
}

}  // namespace cfx::nk
