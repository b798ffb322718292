#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cpsfuse/rng.hpp"

namespace cpsfuse::grad {

/// Row-major real array. Graph ops work on rank <= 2; rank 1 is read as 1 x n.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty or same length as data

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  /// uniform(-bound, bound) entries.
  static Tensor uniform(std::size_t rows, std::size_t cols, double bound, Rng& rng,
                        bool requires_grad = true);

  std::size_t size() const { return data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  std::string shape_string() const;

  void zero_grad();
};

class Graph;

/// Handle to a node of a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Tape of operations for one forward pass. Single use: backward() may be
/// called once. Non-finite values raise Error at the op that produced them.
class Graph {
 public:
  Graph();
  ~Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf reading t in place. Gradients go to t.grad when t.requires_grad.
  Var param(Tensor& t);
  /// Leaf reading t in place with gradients summed into sink (resized to
  /// t.size() if empty). Lets several graphs share parameters.
  Var param(const Tensor& t, std::vector<double>& sink);
  Var constant(Tensor t);
  /// Leaf reading t in place; never receives gradients.
  Var input(const Tensor& t);

  Var matmul(Var a, Var b);
  /// b may equal a's shape or be a single row broadcast over a's rows.
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var concat(const std::vector<Var>& parts, int axis);
  /// axis 1 normalizes each row, axis 0 each column.
  Var softmax(Var a, int axis);
  Var slice_rows(Var a, std::size_t begin, std::size_t end);
  Var slice_cols(Var a, std::size_t begin, std::size_t end);
  Var transpose(Var a);
  Var sum(Var a);
  /// Mean over rows of -log softmax(logits)[label], log-sum-exp stabilized.
  Var cross_entropy(Var logits, const std::vector<std::size_t>& labels);

  const Tensor& value(Var v) const;
  /// Populates gradients of every parameter reachable from loss (1 x 1).
  void backward(Var loss);

 private:
  struct Node;
  Var push(std::unique_ptr<Node> node);
  const Node& node(Var v) const;

  std::vector<std::unique_ptr<Node>> nodes_;
  bool consumed_ = false;
};

struct FiniteDiffReport {
  double max_relative_error = 0.0;
  std::vector<std::vector<double>> analytic;
  std::vector<std::vector<double>> numeric;
};

using Objective = std::function<Var(Graph&)>;

/// Central differences over every coordinate of params against backward().
/// Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-8).
FiniteDiffReport finite_diff_check(const Objective& objective, const std::vector<Tensor*>& params,
                                   double h = 1e-5);

struct AdamWConfig {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct AdamWState {
  AdamWConfig config;
  std::uint64_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One decoupled-weight-decay Adam update from each param's grad. Throws
/// Error before touching anything if a gradient is non-finite.
void adamw_step(AdamWState& state, const std::vector<Tensor*>& params);

}  // namespace cpsfuse::grad
