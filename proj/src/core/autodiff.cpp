#include "emopred/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "emopred/error.hpp"

namespace emopred {
namespace {

constexpr double kProbFloor = 1e-12;

void require(bool ok, const std::string& what) {
  if (!ok) throw_invalid(what);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw_invalid(std::string(op) + ": shape mismatch " +
                  shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  const Tensor& x = a.value();
  Tensor y = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(y), {ia}, [ia, deriv](Tape& t, const Tensor& g) {
        Tensor* ga = t.grad_target(ia);
        if (!ga) return;
        const Tensor& x = t.value(ia);
        for (std::size_t i = 0; i < g.size(); ++i) {
          (*ga)[i] += g[i] * deriv(x[i]);
        }
      });
}

}  // namespace

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back({std::move(value), {}, {}, nullptr, false});
  return {this, nodes_.size() - 1};
}

Var Tape::input(Tensor value) {
  nodes_.push_back({std::move(value), {}, {}, nullptr, true});
  return {this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
  if (const auto it = param_nodes_.find(&p); it != param_nodes_.end()) {
    return {this, it->second};
  }
  nodes_.push_back({p.value, {}, {}, &p, true});
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, const std::vector<std::size_t>& parents,
                 BackwardFn backward) {
  bool needs = false;
  for (auto p : parents) needs = needs || nodes_.at(p).needs_grad;
  Node node{std::move(value), {}, {}, nullptr, needs};
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Tensor* Tape::grad_target(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return nullptr;
  if (!has_grad(n)) n.grad = Tensor::zeros_like(n.value);
  return &n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (!has_grad(n)) return Tensor::zeros_like(n.value);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.value().size() != 1) {
    throw_invalid("backward: loss must be a scalar, got shape " +
                  shape_string(loss.shape()));
  }
  const std::size_t root = loss.id();
  if (!nodes_[root].needs_grad) return;
  for (auto& n : nodes_) n.grad = Tensor();
  nodes_[root].grad = Tensor(nodes_[root].value.shape(), 1.0);
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !has_grad(n)) continue;
    // Callbacks only write to parent nodes, which precede this one, so the
    // reference to this node's gradient stays valid.
    if (n.backward) n.backward(*this, n.grad);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

// --- forward ops ---------------------------------------------------------

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(B.rank() == 2, "matmul: right operand must be a matrix");
  require(A.rank() >= 1 && A.cols() == B.rows(),
          "matmul: shape mismatch " + shape_string(A.shape()) + " x " +
              shape_string(B.shape()));
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor C = A.rank() == 1 ? Tensor({n}) : Tensor({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      for (std::size_t j = 0; j < n; ++j) C[i * n + j] += av * B[p * n + j];
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(C), {ia, ib},
                         [ia, ib, m, k, n](Tape& t, const Tensor& g) {
    const Tensor& A = t.value(ia);
    const Tensor& B = t.value(ib);
    if (Tensor* ga = t.grad_target(ia)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * B[p * n + j];
          (*ga)[i * k + p] += s;
        }
    }
    if (Tensor* gb = t.grad_target(ib)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A[i * k + p];
          for (std::size_t j = 0; j < n; ++j) (*gb)[p * n + j] += av * g[i * n + j];
        }
    }
  });
}

Var linear(Var x, Var weight, Var bias) {
  const Tensor& X = x.value();
  const Tensor& W = weight.value();
  const Tensor& b = bias.value();
  require(W.rank() == 2, "linear: weight must be a matrix");
  const std::size_t rows = X.rows(), in = X.cols(), out = W.rows();
  require(X.rank() >= 1 && W.cols() == in,
          "linear: input " + shape_string(X.shape()) + " vs weight " +
              shape_string(W.shape()));
  require(b.size() == out, "linear: bias size mismatch");
  Tensor Y = X.rank() == 1 ? Tensor({out}) : Tensor({rows, out});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += X[r * in + i] * W[o * in + i];
      Y[r * out + o] = acc + b[o];
    }
  }
  const std::size_t ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape().record(std::move(Y), {ix, iw, ib},
                         [ix, iw, ib, rows, in, out](Tape& t, const Tensor& g) {
    const Tensor& X = t.value(ix);
    const Tensor& W = t.value(iw);
    if (Tensor* gx = t.grad_target(ix)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < out; ++o) {
          const double gv = g[r * out + o];
          if (gv == 0.0) continue;
          for (std::size_t i = 0; i < in; ++i) (*gx)[r * in + i] += gv * W[o * in + i];
        }
    }
    if (Tensor* gw = t.grad_target(iw)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < out; ++o) {
          const double gv = g[r * out + o];
          if (gv == 0.0) continue;
          for (std::size_t i = 0; i < in; ++i) (*gw)[o * in + i] += gv * X[r * in + i];
        }
    }
    if (Tensor* gb = t.grad_target(ib)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < out; ++o) (*gb)[o] += g[r * out + o];
    }
  });
}

Var add(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const bool same = A.shape() == B.shape();
  const bool broadcast = !same && A.rank() == 2 && B.rows() == 1 &&
                         B.cols() == A.cols() && B.rank() >= 1;
  require(same || broadcast, "add: shape mismatch " + shape_string(A.shape()) +
                                 " vs " + shape_string(B.shape()));
  Tensor C = A;
  const std::size_t cols = A.cols();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] += same ? B[i] : B[i % cols];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(C), {ia, ib},
                         [ia, ib, same, cols](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_target(ia)) *ga += g;
    if (Tensor* gb = t.grad_target(ib)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[same ? i : i % cols] += g[i];
    }
  });
}

Var mul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_same_shape(A, B, "mul");
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= B[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(C), {ia, ib}, [ia, ib](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_target(ia)) {
      const Tensor& B = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * B[i];
    }
    if (Tensor* gb = t.grad_target(ib)) {
      const Tensor& A = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * A[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor C = a.value();
  C *= s;
  const std::size_t ia = a.id();
  return a.tape().record(std::move(C), {ia}, [ia, s](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_target(ia)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * s;
    }
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  require(!parts.empty(), "concat: no inputs");
  const Tensor& first = parts[0].value();
  const std::size_t rank = first.rank();
  require(rank == 1 || rank == 2, "concat: inputs must be vectors or matrices");
  require(axis < rank, "concat: axis out of range");
  std::vector<std::size_t> ids;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    require(v.rank() == rank, "concat: rank mismatch");
    if (rank == 2) {
      require(axis == 0 ? v.cols() == first.cols() : v.rows() == first.rows(),
              "concat: shape mismatch " + shape_string(v.shape()) + " vs " +
                  shape_string(first.shape()));
    }
    total += rank == 1 ? v.size() : v.shape()[axis];
    ids.push_back(p.id());
  }
  Tape& tape = parts[0].tape();
  if (rank == 1 || axis == 0) {
    Tensor out = rank == 1 ? Tensor({total}) : Tensor({total, first.cols()});
    std::size_t off = 0;
    for (const auto& p : parts) {
      const Tensor& v = p.value();
      std::copy(v.data().begin(), v.data().end(), out.data().begin() + off);
      off += v.size();
    }
    return tape.record(std::move(out), ids, [ids](Tape& t, const Tensor& g) {
      std::size_t off = 0;
      for (auto id : ids) {
        const std::size_t n = t.value(id).size();
        if (Tensor* gp = t.grad_target(id)) {
          for (std::size_t i = 0; i < n; ++i) (*gp)[i] += g[off + i];
        }
        off += n;
      }
    });
  }
  const std::size_t rows = first.rows();
  Tensor out({rows, total});
  std::size_t col = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) out.at(r, col + c) = v.at(r, c);
    col += v.cols();
  }
  return tape.record(std::move(out), ids, [ids, rows, total](Tape& t, const Tensor& g) {
    std::size_t col = 0;
    for (auto id : ids) {
      const std::size_t w = t.value(id).cols();
      if (Tensor* gp = t.grad_target(id)) {
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < w; ++c) (*gp)[r * w + c] += g[r * total + col + c];
      }
      col += w;
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& A = a.value();
  require(A.rank() >= 1 && begin < end && end <= A.cols(),
          "slice_cols: invalid range");
  const std::size_t rows = A.rows(), cols = A.cols(), w = end - begin;
  Tensor out = A.rank() == 1 ? Tensor({w}) : Tensor({rows, w});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < w; ++c) out[r * w + c] = A[r * cols + begin + c];
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {ia},
                         [ia, rows, cols, begin, w](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_target(ia)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < w; ++c) (*ga)[r * cols + begin + c] += g[r * w + c];
    }
  });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double x) {
                 const double y = std::tanh(x);
                 return 1.0 - y * y;
               });
}

Var sigmoid(Var a) {
  return unary(a, stable_sigmoid, [](double x) {
    const double y = stable_sigmoid(x);
    return y * (1.0 - y);
  });
}

Var log(Var a) {
  for (double v : a.value().data()) require(v > 0.0, "log: non-positive input");
  return unary(a, [](double x) { return std::log(x); },
               [](double x) { return 1.0 / x; });
}

namespace {

// Softmax over the groups of a (rows x cols) layout: along axis 1 each row is
// a group, along axis 0 each column is.
Var softmax_impl(Var a, std::size_t axis, const Tensor* mask) {
  const Tensor& X = a.value();
  require(X.rank() >= 1, "softmax: scalar input");
  require(axis < X.rank(), "softmax: axis out of range");
  // Rank-1 tensors are a single row; axis 0 then means "along the row".
  const bool along_rows = X.rank() == 1 || axis == 1;
  const std::size_t rows = X.rows(), cols = X.cols();
  const std::size_t groups = along_rows ? rows : cols;
  const std::size_t len = along_rows ? cols : rows;
  require(len > 0, "softmax: empty axis");
  if (mask) require(mask->size() == X.size(), "masked_softmax: mask shape mismatch");
  const auto index = [&](std::size_t grp, std::size_t k) {
    return along_rows ? grp * cols + k : k * cols + grp;
  };
  Tensor Y = Tensor::zeros_like(X);
  for (std::size_t grp = 0; grp < groups; ++grp) {
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t i = index(grp, k);
      if (mask && (*mask)[i] == 0.0) continue;
      mx = std::max(mx, X[i]);
      any = true;
    }
    require(any, "softmax: all positions masked");
    double z = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t i = index(grp, k);
      if (mask && (*mask)[i] == 0.0) continue;
      Y[i] = std::exp(X[i] - mx);
      z += Y[i];
    }
    for (std::size_t k = 0; k < len; ++k) Y[index(grp, k)] /= z;
  }
  const std::size_t ia = a.id();
  const std::size_t self = a.tape().size();
  return a.tape().record(std::move(Y), {ia},
                         [ia, self, groups, len, along_rows, cols](Tape& t, const Tensor& g) {
    Tensor* ga = t.grad_target(ia);
    if (!ga) return;
    const Tensor& Y = t.value(self);
    for (std::size_t grp = 0; grp < groups; ++grp) {
      double dot = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t i = along_rows ? grp * cols + k : k * cols + grp;
        dot += g[i] * Y[i];
      }
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t i = along_rows ? grp * cols + k : k * cols + grp;
        (*ga)[i] += Y[i] * (g[i] - dot);
      }
    }
  });
}

}  // namespace

Var softmax(Var a, std::size_t axis) { return softmax_impl(a, axis, nullptr); }

Var masked_softmax(Var a, const Tensor& mask) {
  require(a.value().rank() == 2, "masked_softmax: expects a matrix");
  return softmax_impl(a, 1, &mask);
}

Var mean(Var a, std::size_t axis) {
  const Tensor& X = a.value();
  require(X.rank() >= 1 && axis < X.rank(), "mean: axis out of range");
  const std::size_t rows = X.rows(), cols = X.cols();
  Tensor out;
  if (X.rank() == 1) {
    require(cols > 0, "mean: empty axis");
    double s = 0.0;
    for (double v : X.data()) s += v;
    out = Tensor::scalar(s / static_cast<double>(cols));
  } else if (axis == 0) {
    require(rows > 0, "mean: empty axis");
    out = Tensor({cols});
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) out[c] += X.at(r, c);
    out *= 1.0 / static_cast<double>(rows);
  } else {
    require(cols > 0, "mean: empty axis");
    out = Tensor({rows});
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += X.at(r, c);
      out[r] = s / static_cast<double>(cols);
    }
  }
  const std::size_t ia = a.id();
  const bool vec = X.rank() == 1;
  return a.tape().record(std::move(out), {ia},
                         [ia, rows, cols, axis, vec](Tape& t, const Tensor& g) {
    Tensor* ga = t.grad_target(ia);
    if (!ga) return;
    if (vec) {
      for (std::size_t c = 0; c < cols; ++c) (*ga)[c] += g[0] / static_cast<double>(cols);
      return;
    }
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        (*ga)[r * cols + c] += axis == 0 ? g[c] / static_cast<double>(rows)
                                         : g[r] / static_cast<double>(cols);
      }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  return a.tape().record(Tensor::scalar(s), {ia}, [ia](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_target(ia)) {
      for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += g[0];
    }
  });
}

Var embedding_lookup(Var table, std::span<const std::size_t> indices) {
  const Tensor& E = table.value();
  require(E.rank() == 2, "embedding_lookup: table must be a matrix");
  const std::size_t dim = E.cols();
  Tensor out({indices.size(), dim});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    require(indices[r] < E.rows(), "embedding_lookup: index " +
                                       std::to_string(indices[r]) +
                                       " out of range");
    const auto src = E.row(indices[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  const std::size_t it = table.id();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return table.tape().record(std::move(out), {it},
                             [it, idx = std::move(idx), dim](Tape& t, const Tensor& g) {
    if (Tensor* gt = t.grad_target(it)) {
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < dim; ++c) (*gt)[idx[r] * dim + c] += g[r * dim + c];
    }
  });
}

Var where_rows(const std::vector<std::uint8_t>& take_a, Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_same_shape(A, B, "where_rows");
  require(take_a.size() == A.rows(), "where_rows: mask length mismatch");
  const std::size_t cols = A.cols();
  Tensor out = B;
  for (std::size_t r = 0; r < take_a.size(); ++r) {
    if (take_a[r]) std::copy(A.row(r).begin(), A.row(r).end(), out.row(r).begin());
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {ia, ib},
                         [ia, ib, take_a, cols](Tape& t, const Tensor& g) {
    Tensor* ga = t.grad_target(ia);
    Tensor* gb = t.grad_target(ib);
    for (std::size_t r = 0; r < take_a.size(); ++r) {
      Tensor* dst = take_a[r] ? ga : gb;
      if (!dst) continue;
      for (std::size_t c = 0; c < cols; ++c) (*dst)[r * cols + c] += g[r * cols + c];
    }
  });
}

Var masked_mean_steps(const std::vector<Var>& steps, const Tensor& mask) {
  require(!steps.empty(), "masked_mean_steps: no steps");
  const std::size_t T = steps.size();
  const Tensor& first = steps[0].value();
  const std::size_t B = first.rows(), D = first.cols();
  require(mask.rows() == B && mask.cols() == T,
          "masked_mean_steps: mask must be (batch x steps)");
  std::vector<std::size_t> ids;
  for (const auto& s : steps) {
    require(s.value().shape() == first.shape(), "masked_mean_steps: step shape mismatch");
    ids.push_back(s.id());
  }
  std::vector<double> counts(B, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) counts[b] += mask.at(b, t) != 0.0 ? 1.0 : 0.0;
    require(counts[b] > 0.0, "masked_mean_steps: all positions masked");
  }
  Tensor out = Tensor::zeros_like(first);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      if (mask.at(b, t) == 0.0) continue;
      const auto src = steps[t].value().row(b);
      for (std::size_t d = 0; d < D; ++d) out[b * D + d] += src[d];
    }
    for (std::size_t d = 0; d < D; ++d) out[b * D + d] /= counts[b];
  }
  return steps[0].tape().record(std::move(out), ids,
                                [ids, mask, counts, B, D](Tape& t, const Tensor& g) {
    for (std::size_t s = 0; s < ids.size(); ++s) {
      Tensor* gs = t.grad_target(ids[s]);
      if (!gs) continue;
      for (std::size_t b = 0; b < B; ++b) {
        if (mask.at(b, s) == 0.0) continue;
        for (std::size_t d = 0; d < D; ++d) (*gs)[b * D + d] += g[b * D + d] / counts[b];
      }
    }
  });
}

Var weighted_sum_steps(Var weights, const std::vector<Var>& steps) {
  require(!steps.empty(), "weighted_sum_steps: no steps");
  const Tensor& W = weights.value();
  const std::size_t T = steps.size();
  const Tensor& first = steps[0].value();
  const std::size_t B = first.rows(), D = first.cols();
  require(W.rank() == 2 && W.rows() == B && W.cols() == T,
          "weighted_sum_steps: weights must be (batch x steps)");
  std::vector<std::size_t> ids;
  for (const auto& s : steps) {
    require(s.value().shape() == first.shape(), "weighted_sum_steps: step shape mismatch");
    ids.push_back(s.id());
  }
  Tensor out = Tensor::zeros_like(first);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      const double w = W.at(b, t);
      if (w == 0.0) continue;
      const auto src = steps[t].value().row(b);
      for (std::size_t d = 0; d < D; ++d) out[b * D + d] += w * src[d];
    }
  }
  const std::size_t iw = weights.id();
  return weights.tape().record(std::move(out), [&] {
    std::vector<std::size_t> all = ids;
    all.push_back(iw);
    return all;
  }(), [ids, iw, B, D, T](Tape& t, const Tensor& g) {
    const Tensor& W = t.value(iw);
    if (Tensor* gw = t.grad_target(iw)) {
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t s = 0; s < T; ++s) {
          const auto h = t.value(ids[s]).row(b);
          double dot = 0.0;
          for (std::size_t d = 0; d < D; ++d) dot += g[b * D + d] * h[d];
          (*gw)[b * T + s] += dot;
        }
    }
    for (std::size_t s = 0; s < T; ++s) {
      Tensor* gs = t.grad_target(ids[s]);
      if (!gs) continue;
      for (std::size_t b = 0; b < B; ++b) {
        const double w = W.at(b, s);
        if (w == 0.0) continue;
        for (std::size_t d = 0; d < D; ++d) (*gs)[b * D + d] += w * g[b * D + d];
      }
    }
  });
}

Var weighted_cross_entropy(Var probs, std::span<const std::size_t> labels,
                           std::span<const double> class_weights) {
  const Tensor& P = probs.value();
  const std::size_t B = P.rows(), K = P.cols();
  require(labels.size() == B, "weighted_cross_entropy: label count mismatch");
  require(class_weights.size() == K, "weighted_cross_entropy: weight count mismatch");
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    require(labels[b] < K, "weighted_cross_entropy: label out of range");
    const double p = std::max(P[b * K + labels[b]], kProbFloor);
    loss += class_weights[labels[b]] * -std::log(p);
  }
  loss /= static_cast<double>(B);
  const std::size_t ip = probs.id();
  std::vector<std::size_t> y(labels.begin(), labels.end());
  std::vector<double> w(class_weights.begin(), class_weights.end());
  return probs.tape().record(Tensor::scalar(loss), {ip},
                             [ip, y = std::move(y), w = std::move(w), B, K](Tape& t, const Tensor& g) {
    Tensor* gp = t.grad_target(ip);
    if (!gp) return;
    const Tensor& P = t.value(ip);
    for (std::size_t b = 0; b < B; ++b) {
      const double p = P[b * K + y[b]];
      if (p <= kProbFloor) continue;
      (*gp)[b * K + y[b]] += g[0] * -w[y[b]] / (static_cast<double>(B) * p);
    }
  });
}

// --- regularizers ---------------------------------------------------------

Var gaussian_noise(Var x, double sigma, Mode mode, Rng& rng) {
  if (!(sigma >= 0.0)) throw_invalid("gaussian_noise: sigma must be >= 0");
  if (mode == Mode::kEval || sigma == 0.0) return x;
  std::normal_distribution<double> noise(0.0, sigma);
  Tensor out = x.value();
  for (double& v : out.data()) v += noise(rng);
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {ix}, [ix](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_target(ix)) *gx += g;
  });
}

Var dropout(Var x, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw_invalid("dropout: p must be in [0, 1)");
  if (mode == Mode::kEval || p == 0.0) return x;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor mask = Tensor::zeros_like(x.value());
  for (double& m : mask.data()) m = u(rng) < p ? 0.0 : keep_scale;
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {ix},
                         [ix, mask = std::move(mask)](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_target(ix)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * mask[i];
    }
  });
}

// --- gradient checking ---------------------------------------------------

double relative_error(double analytic, double numeric) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult finite_difference_check(const std::function<Var(Tape&)>& loss,
                                        std::span<Parameter* const> params,
                                        double h) {
  if (!(h > 0.0)) throw_invalid("finite_difference_check: h must be > 0");
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  const auto evaluate = [&]() {
    Tape tape;
    return loss(tape).value().item();
  };
  GradCheckResult result;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double up = evaluate();
      p->value[i] = saved - h;
      const double down = evaluate();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(p->grad[i], numeric);
      ++result.checked;
      if (result.checked == 1 || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = p->name;
        result.worst_index = i;
        result.analytic = p->grad[i];
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace emopred
