#pragma once

// Reverse-mode automatic differentiation over dense double matrices.
//
// A Graph is built define-by-run: every op appends a node holding its value
// and a closure that propagates the node's gradient to its parents. Nodes are
// appended in evaluation order, so reverse index order is a valid
// topological order for the backward pass.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace latdyn::grad {

using Matrix = Eigen::MatrixXd;

// Trainable tensor that outlives individual graphs. Backward passes add into
// `grad`; the optimizer reads it and the caller clears it between steps.
struct Parameter {
  Matrix value;
  Matrix grad;

  Parameter() = default;
  explicit Parameter(Matrix v) : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Graph;

// Lightweight handle to a node of a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

class Graph {
 public:
  // Receives the graph and the id of the node whose gradient is complete.
  using Backprop = std::function<void(Graph&, std::size_t)>;

  Graph() { nodes_.reserve(1024); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  // Leaf bound to a persistent parameter; its gradient is added to p.grad.
  Var parameter(Parameter& p);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  Matrix& grad_ref(std::size_t id) { return nodes_[id].grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_[id].parents; }
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  // Appends an op result. The node requires a gradient iff any parent does.
  Var emit(Matrix value, std::vector<std::size_t> parents, Backprop backprop);

  // Populates gradients of `loss` (a 1x1 node) with respect to every node and
  // accumulates them into bound parameters. A graph supports one backward pass.
  void backward(Var loss);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::size_t> parents;
    Backprop backprop;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Forward ops. Shape mismatches throw ShapeError naming the op and shapes.
Var matmul(Var a, Var b);
// Same-shape addition, or a 1xN row broadcast over the rows of `a`.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
Var transpose(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count);
Var slice_rows(Var a, Eigen::Index begin, Eigen::Index count);
Var sum(Var a);
Var mean(Var a);
Var mse_loss(Var prediction, Var target);
// Elementwise 0.5 d^2 for |d| < 1, |d| - 0.5 otherwise; mean-reduced.
Var smooth_l1_loss(Var prediction, Var target);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

// Compares analytic gradients of the scalar built by `build` with central
// finite differences over every coordinate of `params`. Returns the maximum
// of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double grad_check(const std::function<Var(Graph&)>& build, std::span<Parameter* const> params,
                  double eps = 1e-5);

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config);

  void step();
  void zero_grad();
  std::size_t steps() const { return steps_; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig config_;
  std::vector<Matrix> first_moment_;
  std::vector<Matrix> second_moment_;
  std::size_t steps_ = 0;
};

}  // namespace latdyn::grad
