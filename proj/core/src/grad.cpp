#include "cpsfuse/grad.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "cpsfuse/error.hpp"

namespace cpsfuse::grad {

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d, bool rg)
    : shape(std::move(s)), data(std::move(d)), requires_grad(rg) {
  std::size_t n = 1;
  for (auto x : shape) n *= x;
  if (n != data.size()) {
    throw Error(fmt::format("tensor shape {} holds {} values, got {}", shape_string(), n,
                            data.size()));
  }
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return Tensor({rows, cols}, std::vector<double>(rows * cols, 0.0), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

Tensor Tensor::uniform(std::size_t rows, std::size_t cols, double bound, Rng& rng,
                       bool requires_grad) {
  Tensor t = zeros(rows, cols, requires_grad);
  for (auto& x : t.data) x = rng.uniform(-bound, bound);
  return t;
}

std::size_t Tensor::rows() const {
  if (shape.size() > 2) throw Error(fmt::format("rank {} tensor used as a matrix", shape.size()));
  return shape.size() == 2 ? shape[0] : 1;
}

std::size_t Tensor::cols() const {
  if (shape.size() > 2) throw Error(fmt::format("rank {} tensor used as a matrix", shape.size()));
  if (shape.empty()) return 1;
  return shape.back();
}

std::string Tensor::shape_string() const { return fmt::format("({})", fmt::join(shape, ",")); }

void Tensor::zero_grad() { grad.assign(data.size(), 0.0); }

enum class Op {
  Leaf,
  MatMul,
  Add,
  Mul,
  Scale,
  Tanh,
  Sigmoid,
  Concat,
  Softmax,
  SliceRows,
  SliceCols,
  Transpose,
  Sum,
  CrossEntropy
};

struct Graph::Node {
  Op op = Op::Leaf;
  Tensor owned;
  const Tensor* external = nullptr;
  std::vector<double>* sink = nullptr;
  std::vector<std::size_t> parents;
  bool needs_grad = false;
  int axis = 0;
  std::size_t begin = 0;
  double factor = 1.0;
  std::vector<std::size_t> labels;
  std::vector<double> saved;  // op-specific (cross-entropy softmax)

  const Tensor& value() const { return external ? *external : owned; }
};

const Tensor& Var::value() const { return graph->value(*this); }

Graph::Graph() = default;
Graph::~Graph() = default;

namespace {

std::string shp(const Tensor& t) { return fmt::format("({},{})", t.rows(), t.cols()); }

void check_finite(const Tensor& t, const char* op) {
  for (double x : t.data) {
    if (!std::isfinite(x)) throw Error(fmt::format("non-finite value produced by {}", op));
  }
}

Tensor mat(std::size_t r, std::size_t c) { return Tensor::zeros(r, c); }

}  // namespace

Var Graph::push(std::unique_ptr<Node> node) {
  if (consumed_) throw Error("graph already consumed by backward()");
  for (auto p : node->parents) node->needs_grad = node->needs_grad || nodes_[p]->needs_grad;
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

const Graph::Node& Graph::node(Var v) const {
  if (v.graph != this || v.id >= nodes_.size()) throw Error("variable belongs to another graph");
  return *nodes_[v.id];
}

const Tensor& Graph::value(Var v) const { return node(v).value(); }

Var Graph::param(Tensor& t) {
  if (!t.requires_grad) return input(t);
  return param(t, t.grad);
}

Var Graph::param(const Tensor& t, std::vector<double>& sink) {
  check_finite(t, "parameter");
  (void)t.rows();
  if (sink.empty()) sink.assign(t.size(), 0.0);
  if (sink.size() != t.size()) throw Error("gradient sink size does not match parameter");
  auto n = std::make_unique<Node>();
  n->external = &t;
  n->sink = &sink;
  n->needs_grad = true;
  return push(std::move(n));
}

Var Graph::input(const Tensor& t) {
  check_finite(t, "input");
  (void)t.rows();
  auto n = std::make_unique<Node>();
  n->external = &t;
  return push(std::move(n));
}

Var Graph::constant(Tensor t) {
  check_finite(t, "constant");
  (void)t.rows();
  auto n = std::make_unique<Node>();
  n->owned = std::move(t);
  return push(std::move(n));
}

Var Graph::matmul(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  if (A.cols() != B.rows()) {
    throw Error(fmt::format("matmul shape mismatch: {} x {}", shp(A), shp(B)));
  }
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  auto node = std::make_unique<Node>();
  node->op = Op::MatMul;
  node->owned = mat(m, n);
  auto& C = node->owned.data;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double a_ip = A.data[i * k + p];
      if (a_ip == 0.0) continue;
      const double* brow = &B.data[p * n];
      double* crow = &C[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += a_ip * brow[j];
    }
  }
  check_finite(node->owned, "matmul");
  node->parents = {a.id, b.id};
  return push(std::move(node));
}

namespace {

bool broadcastable(const Tensor& a, const Tensor& b) {
  return (a.rows() == b.rows() && a.cols() == b.cols()) || (b.rows() == 1 && a.cols() == b.cols());
}

}  // namespace

Var Graph::add(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  if (!broadcastable(A, B)) throw Error(fmt::format("add shape mismatch: {} + {}", shp(A), shp(B)));
  auto node = std::make_unique<Node>();
  node->op = Op::Add;
  node->owned = mat(A.rows(), A.cols());
  const std::size_t n = A.cols(), brows = B.rows();
  for (std::size_t i = 0; i < A.size(); ++i) {
    node->owned.data[i] = A.data[i] + B.data[brows == 1 ? i % n : i];
  }
  check_finite(node->owned, "add");
  node->parents = {a.id, b.id};
  return push(std::move(node));
}

Var Graph::mul(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  if (!broadcastable(A, B)) throw Error(fmt::format("mul shape mismatch: {} * {}", shp(A), shp(B)));
  auto node = std::make_unique<Node>();
  node->op = Op::Mul;
  node->owned = mat(A.rows(), A.cols());
  const std::size_t n = A.cols(), brows = B.rows();
  for (std::size_t i = 0; i < A.size(); ++i) {
    node->owned.data[i] = A.data[i] * B.data[brows == 1 ? i % n : i];
  }
  check_finite(node->owned, "mul");
  node->parents = {a.id, b.id};
  return push(std::move(node));
}

Var Graph::scale(Var a, double s) {
  const auto& A = value(a);
  auto node = std::make_unique<Node>();
  node->op = Op::Scale;
  node->owned = mat(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.size(); ++i) node->owned.data[i] = s * A.data[i];
  check_finite(node->owned, "scale");
  node->factor = s;
  node->parents = {a.id};
  return push(std::move(node));
}

Var Graph::tanh(Var a) {
  const auto& A = value(a);
  auto node = std::make_unique<Node>();
  node->op = Op::Tanh;
  node->owned = mat(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.size(); ++i) node->owned.data[i] = std::tanh(A.data[i]);
  node->parents = {a.id};
  return push(std::move(node));
}

Var Graph::sigmoid(Var a) {
  const auto& A = value(a);
  auto node = std::make_unique<Node>();
  node->op = Op::Sigmoid;
  node->owned = mat(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double x = A.data[i];
    node->owned.data[i] = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  node->parents = {a.id};
  return push(std::move(node));
}

Var Graph::concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw Error("concat of zero tensors");
  if (axis != 0 && axis != 1) throw Error(fmt::format("concat axis {} not supported", axis));
  const auto& first = value(parts[0]);
  std::size_t rows = 0, cols = 0;
  for (auto p : parts) {
    const auto& t = value(p);
    if (axis == 0) {
      if (t.cols() != first.cols()) {
        throw Error(fmt::format("concat shape mismatch on axis 0: {} vs {}", shp(first), shp(t)));
      }
      rows += t.rows();
    } else {
      if (t.rows() != first.rows()) {
        throw Error(fmt::format("concat shape mismatch on axis 1: {} vs {}", shp(first), shp(t)));
      }
      cols += t.cols();
    }
  }
  if (axis == 0) cols = first.cols();
  else rows = first.rows();
  auto node = std::make_unique<Node>();
  node->op = Op::Concat;
  node->axis = axis;
  node->owned = mat(rows, cols);
  std::size_t offset = 0;
  for (auto p : parts) {
    const auto& t = value(p);
    for (std::size_t r = 0; r < t.rows(); ++r) {
      for (std::size_t c = 0; c < t.cols(); ++c) {
        if (axis == 0) node->owned.at(offset + r, c) = t.at(r, c);
        else node->owned.at(r, offset + c) = t.at(r, c);
      }
    }
    offset += axis == 0 ? t.rows() : t.cols();
    node->parents.push_back(p.id);
  }
  return push(std::move(node));
}

Var Graph::softmax(Var a, int axis) {
  if (axis != 0 && axis != 1) throw Error(fmt::format("softmax axis {} not supported", axis));
  const auto& A = value(a);
  auto node = std::make_unique<Node>();
  node->op = Op::Softmax;
  node->axis = axis;
  node->owned = mat(A.rows(), A.cols());
  auto& Y = node->owned;
  const std::size_t outer = axis == 1 ? A.rows() : A.cols();
  const std::size_t inner = axis == 1 ? A.cols() : A.rows();
  for (std::size_t o = 0; o < outer; ++o) {
    auto idx = [&](std::size_t i) { return axis == 1 ? o * A.cols() + i : i * A.cols() + o; };
    double mx = -INFINITY;
    for (std::size_t i = 0; i < inner; ++i) mx = std::max(mx, A.data[idx(i)]);
    double s = 0.0;
    for (std::size_t i = 0; i < inner; ++i) {
      Y.data[idx(i)] = std::exp(A.data[idx(i)] - mx);
      s += Y.data[idx(i)];
    }
    for (std::size_t i = 0; i < inner; ++i) Y.data[idx(i)] /= s;
  }
  node->parents = {a.id};
  return push(std::move(node));
}

Var Graph::slice_rows(Var a, std::size_t begin, std::size_t end) {
  const auto& A = value(a);
  if (begin >= end || end > A.rows()) {
    throw Error(fmt::format("row slice [{}, {}) out of range for {}", begin, end, shp(A)));
  }
  auto node = std::make_unique<Node>();
  node->op = Op::SliceRows;
  node->begin = begin;
  node->owned = Tensor::matrix(end - begin, A.cols(),
                               std::vector<double>(A.data.begin() + static_cast<std::ptrdiff_t>(begin * A.cols()),
                                                   A.data.begin() + static_cast<std::ptrdiff_t>(end * A.cols())));
  node->parents = {a.id};
  return push(std::move(node));
}

Var Graph::slice_cols(Var a, std::size_t begin, std::size_t end) {
  const auto& A = value(a);
  if (begin >= end || end > A.cols()) {
    throw Error(fmt::format("column slice [{}, {}) out of range for {}", begin, end, shp(A)));
  }
  auto node = std::make_unique<Node>();
  node->op = Op::SliceCols;
  node->begin = begin;
  node->owned = mat(A.rows(), end - begin);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t c = begin; c < end; ++c) node->owned.at(r, c - begin) = A.at(r, c);
  }
  node->parents = {a.id};
  return push(std::move(node));
}

Var Graph::transpose(Var a) {
  const auto& A = value(a);
  auto node = std::make_unique<Node>();
  node->op = Op::Transpose;
  node->owned = mat(A.cols(), A.rows());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t c = 0; c < A.cols(); ++c) node->owned.at(c, r) = A.at(r, c);
  }
  node->parents = {a.id};
  return push(std::move(node));
}

Var Graph::sum(Var a) {
  const auto& A = value(a);
  auto node = std::make_unique<Node>();
  node->op = Op::Sum;
  node->owned = Tensor::matrix(1, 1, {std::accumulate(A.data.begin(), A.data.end(), 0.0)});
  check_finite(node->owned, "sum");
  node->parents = {a.id};
  return push(std::move(node));
}

Var Graph::cross_entropy(Var logits, const std::vector<std::size_t>& labels) {
  const auto& Z = value(logits);
  const std::size_t b = Z.rows(), k = Z.cols();
  if (labels.size() != b) {
    throw Error(fmt::format("cross_entropy: {} labels for {} rows", labels.size(), b));
  }
  if (b == 0) throw Error("cross_entropy on an empty batch");
  auto node = std::make_unique<Node>();
  node->op = Op::CrossEntropy;
  node->saved.resize(b * k);
  double loss = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    if (labels[r] >= k) {
      throw Error(fmt::format("cross_entropy: label {} out of range [0, {})", labels[r], k));
    }
    double mx = -INFINITY;
    for (std::size_t c = 0; c < k; ++c) mx = std::max(mx, Z.at(r, c));
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += std::exp(Z.at(r, c) - mx);
    const double lse = mx + std::log(s);
    loss += lse - Z.at(r, labels[r]);
    for (std::size_t c = 0; c < k; ++c) node->saved[r * k + c] = std::exp(Z.at(r, c) - lse);
  }
  node->owned = Tensor::matrix(1, 1, {loss / static_cast<double>(b)});
  check_finite(node->owned, "cross_entropy");
  node->labels = labels;
  node->parents = {logits.id};
  return push(std::move(node));
}

void Graph::backward(Var loss) {
  if (consumed_) throw Error("graph already consumed by backward()");
  const auto& L = value(loss);
  if (L.size() != 1) throw Error(fmt::format("backward needs a scalar loss, got {}", shp(L)));
  consumed_ = true;

  std::vector<std::vector<double>> g(nodes_.size());
  auto grad_of = [&](std::size_t id) -> std::vector<double>& {
    if (g[id].empty()) g[id].assign(nodes_[id]->value().size(), 0.0);
    return g[id];
  };
  grad_of(loss.id)[0] = 1.0;

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& n = *nodes_[id];
    if (!n.needs_grad || g[id].empty()) continue;
    const auto& dy = g[id];
    for (double x : dy) {
      if (!std::isfinite(x)) throw Error("non-finite gradient during backward");
    }
    const Tensor& Y = n.value();
    auto want = [&](std::size_t k) { return nodes_[n.parents[k]]->needs_grad; };
    auto& P = nodes_;
    switch (n.op) {
      case Op::Leaf:
        if (n.sink) {
          for (std::size_t i = 0; i < dy.size(); ++i) (*n.sink)[i] += dy[i];
        }
        break;
      case Op::MatMul: {
        const auto& A = P[n.parents[0]]->value();
        const auto& B = P[n.parents[1]]->value();
        const std::size_t m = A.rows(), k = A.cols(), c = B.cols();
        if (want(0)) {
          auto& dA = grad_of(n.parents[0]);
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              double s = 0.0;
              for (std::size_t j = 0; j < c; ++j) s += dy[i * c + j] * B.data[p * c + j];
              dA[i * k + p] += s;
            }
          }
        }
        if (want(1)) {
          auto& dB = grad_of(n.parents[1]);
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const double a = A.data[i * k + p];
              if (a == 0.0) continue;
              for (std::size_t j = 0; j < c; ++j) dB[p * c + j] += a * dy[i * c + j];
            }
          }
        }
        break;
      }
      case Op::Add:
      case Op::Mul: {
        const auto& A = P[n.parents[0]]->value();
        const auto& B = P[n.parents[1]]->value();
        const std::size_t cols = A.cols();
        const bool bc = B.rows() == 1 && A.rows() != 1;
        const bool is_mul = n.op == Op::Mul;
        if (want(0)) {
          auto& dA = grad_of(n.parents[0]);
          for (std::size_t i = 0; i < dy.size(); ++i) {
            dA[i] += is_mul ? dy[i] * B.data[bc ? i % cols : i] : dy[i];
          }
        }
        if (want(1)) {
          auto& dB = grad_of(n.parents[1]);
          for (std::size_t i = 0; i < dy.size(); ++i) {
            dB[bc ? i % cols : i] += is_mul ? dy[i] * A.data[i] : dy[i];
          }
        }
        break;
      }
      case Op::Scale: {
        auto& dA = grad_of(n.parents[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) dA[i] += n.factor * dy[i];
        break;
      }
      case Op::Tanh: {
        auto& dA = grad_of(n.parents[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) dA[i] += dy[i] * (1.0 - Y.data[i] * Y.data[i]);
        break;
      }
      case Op::Sigmoid: {
        auto& dA = grad_of(n.parents[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) dA[i] += dy[i] * Y.data[i] * (1.0 - Y.data[i]);
        break;
      }
      case Op::Concat: {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < n.parents.size(); ++k) {
          const auto& part = P[n.parents[k]]->value();
          if (want(k)) {
            auto& dp = grad_of(n.parents[k]);
            for (std::size_t r = 0; r < part.rows(); ++r) {
              for (std::size_t c = 0; c < part.cols(); ++c) {
                const std::size_t src = n.axis == 0 ? (offset + r) * Y.cols() + c
                                                    : r * Y.cols() + offset + c;
                dp[r * part.cols() + c] += dy[src];
              }
            }
          }
          offset += n.axis == 0 ? part.rows() : part.cols();
        }
        break;
      }
      case Op::Softmax: {
        auto& dA = grad_of(n.parents[0]);
        const std::size_t outer = n.axis == 1 ? Y.rows() : Y.cols();
        const std::size_t inner = n.axis == 1 ? Y.cols() : Y.rows();
        for (std::size_t o = 0; o < outer; ++o) {
          auto idx = [&](std::size_t i) { return n.axis == 1 ? o * Y.cols() + i : i * Y.cols() + o; };
          double dot = 0.0;
          for (std::size_t i = 0; i < inner; ++i) dot += dy[idx(i)] * Y.data[idx(i)];
          for (std::size_t i = 0; i < inner; ++i) dA[idx(i)] += Y.data[idx(i)] * (dy[idx(i)] - dot);
        }
        break;
      }
      case Op::SliceRows: {
        auto& dA = grad_of(n.parents[0]);
        const std::size_t off = n.begin * Y.cols();
        for (std::size_t i = 0; i < dy.size(); ++i) dA[off + i] += dy[i];
        break;
      }
      case Op::SliceCols: {
        auto& dA = grad_of(n.parents[0]);
        const std::size_t acols = P[n.parents[0]]->value().cols();
        for (std::size_t r = 0; r < Y.rows(); ++r) {
          for (std::size_t c = 0; c < Y.cols(); ++c) dA[r * acols + n.begin + c] += dy[r * Y.cols() + c];
        }
        break;
      }
      case Op::Transpose: {
        auto& dA = grad_of(n.parents[0]);
        for (std::size_t r = 0; r < Y.rows(); ++r) {
          for (std::size_t c = 0; c < Y.cols(); ++c) dA[c * Y.rows() + r] += dy[r * Y.cols() + c];
        }
        break;
      }
      case Op::Sum: {
        auto& dA = grad_of(n.parents[0]);
        for (auto& x : dA) x += dy[0];
        break;
      }
      case Op::CrossEntropy: {
        auto& dA = grad_of(n.parents[0]);
        const std::size_t b = n.labels.size();
        const std::size_t k = n.saved.size() / b;
        const double w = dy[0] / static_cast<double>(b);
        for (std::size_t r = 0; r < b; ++r) {
          for (std::size_t c = 0; c < k; ++c) {
            dA[r * k + c] += w * (n.saved[r * k + c] - (c == n.labels[r] ? 1.0 : 0.0));
          }
        }
        break;
      }
    }
  }
}

FiniteDiffReport finite_diff_check(const Objective& objective, const std::vector<Tensor*>& params,
                                   double h) {
  if (!(h > 0.0)) throw Error("finite-difference step must be positive");
  auto evaluate = [&]() {
    Graph g;
    const double v = g.value(objective(g)).data.at(0);
    if (!std::isfinite(v)) throw Error("objective returned a non-finite value");
    return v;
  };

  std::vector<bool> saved_flags;
  for (auto* p : params) {
    saved_flags.push_back(p->requires_grad);
    p->requires_grad = true;
    p->zero_grad();
  }
  {
    Graph g;
    Var loss = objective(g);
    if (!std::isfinite(g.value(loss).data.at(0))) {
      throw Error("objective returned a non-finite value");
    }
    g.backward(loss);
  }

  FiniteDiffReport report;
  for (auto* p : params) {
    report.analytic.push_back(p->grad);
    std::vector<double> numeric(p->size());
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double orig = p->data[i];
      p->data[i] = orig + h;
      const double up = evaluate();
      p->data[i] = orig - h;
      const double down = evaluate();
      p->data[i] = orig;
      numeric[i] = (up - down) / (2.0 * h);
      const double a = p->grad[i];
      const double denom = std::max({std::abs(a), std::abs(numeric[i]), 1e-8});
      report.max_relative_error = std::max(report.max_relative_error, std::abs(a - numeric[i]) / denom);
    }
    report.numeric.push_back(std::move(numeric));
  }
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->requires_grad = saved_flags[k];
  return report;
}

void adamw_step(AdamWState& state, const std::vector<Tensor*>& params) {
  if (state.m.empty()) {
    for (auto* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw Error("optimizer state does not match parameters");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto* p = params[k];
    if (p->grad.size() != p->size() || state.m[k].size() != p->size()) {
      throw Error(fmt::format("parameter {} gradient/state shape mismatch", k));
    }
    for (double g : p->grad) {
      if (!std::isfinite(g)) throw Error(fmt::format("non-finite gradient in parameter {}", k));
    }
  }
  const auto& c = state.config;
  ++state.t;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double mh = m[i] / bc1;
      const double vh = v[i] / bc2;
      const double theta = p.data[i];
      p.data[i] = theta - c.lr * mh / (std::sqrt(vh) + c.eps) - c.lr * c.weight_decay * theta;
    }
  }
}

}  // namespace cpsfuse::grad
