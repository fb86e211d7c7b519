#include "latdyn/gradcore.hpp"

#include "latdyn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace latdyn::grad {

namespace {

std::string shape_of(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_of(a) + " and " +
                   shape_of(b));
}

Graph& graph_of(Var a, Var b) {
  if (a.graph == nullptr || a.graph != b.graph) throw ContractError("operands belong to different graphs");
  return *a.graph;
}

void require_same_shape(const char* op, Var a, Var b) {
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  if (x.rows() != y.rows() || x.cols() != y.cols()) shape_error(op, x, y);
}

// Adds `delta` into the gradient of node `id` when it is tracked.
template <typename Expr>
void accumulate(Graph& g, std::size_t id, const Expr& delta) {
  if (g.needs_grad(id)) g.grad_ref(id) += delta;
}

}  // namespace

const Matrix& Var::value() const { return graph->value(id); }
const Matrix& Var::grad() const { return graph->grad(id); }

Var Graph::constant(Matrix value) {
  Node n;
  n.grad = Matrix::Zero(value.rows(), value.cols());
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::parameter(Parameter& p) {
  Node n;
  n.value = p.value;
  n.grad = Matrix::Zero(p.value.rows(), p.value.cols());
  n.param = &p;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::emit(Matrix value, std::vector<std::size_t> parents, Backprop backprop) {
  if (consumed_) throw ContractError("graph already consumed by backward");
  Node n;
  n.needs_grad = std::any_of(parents.begin(), parents.end(),
                             [this](std::size_t p) { return nodes_[p].needs_grad; });
  n.grad = Matrix::Zero(value.rows(), value.cols());
  n.value = std::move(value);
  n.parents = std::move(parents);
  if (n.needs_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw ContractError("backward: loss belongs to a different graph");
  if (consumed_) throw ContractError("backward: graph already consumed");
  const Matrix& lv = nodes_[loss.id].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ContractError("backward: loss must be scalar, got " + shape_of(lv));
  }
  consumed_ = true;
  nodes_[loss.id].grad(0, 0) = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad) continue;
    if (n.backprop) n.backprop(*this, i);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  if (a.cols() != b.rows()) shape_error("matmul", a.value(), b.value());
  Matrix out = a.value() * b.value();
  return g.emit(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Graph& g, std::size_t self) {
    const Matrix& up = g.grad(self);
    if (g.needs_grad(ia)) g.grad_ref(ia).noalias() += up * g.value(ib).transpose();
    if (g.needs_grad(ib)) g.grad_ref(ib).noalias() += g.value(ia).transpose() * up;
  });
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  if (x.rows() == y.rows() && x.cols() == y.cols()) {
    return g.emit(x + y, {a.id, b.id}, [ia = a.id, ib = b.id](Graph& g, std::size_t self) {
      accumulate(g, ia, g.grad(self));
      accumulate(g, ib, g.grad(self));
    });
  }
  if (y.rows() == 1 && y.cols() == x.cols()) {
    Matrix out = x.rowwise() + y.row(0);
    return g.emit(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Graph& g, std::size_t self) {
      accumulate(g, ia, g.grad(self));
      accumulate(g, ib, g.grad(self).colwise().sum());
    });
  }
  shape_error("add", x, y);
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("sub", a, b);
  return g.emit(a.value() - b.value(), {a.id, b.id},
                [ia = a.id, ib = b.id](Graph& g, std::size_t self) {
                  accumulate(g, ia, g.grad(self));
                  accumulate(g, ib, -g.grad(self));
                });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("mul", a, b);
  Matrix out = a.value().cwiseProduct(b.value());
  return g.emit(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Graph& g, std::size_t self) {
    const Matrix& up = g.grad(self);
    accumulate(g, ia, up.cwiseProduct(g.value(ib)));
    accumulate(g, ib, up.cwiseProduct(g.value(ia)));
  });
}

Var scale(Var a, double s) {
  return a.graph->emit(a.value() * s, {a.id}, [ia = a.id, s](Graph& g, std::size_t self) {
    accumulate(g, ia, g.grad(self) * s);
  });
}

Var add_scalar(Var a, double s) {
  Matrix out = a.value().array() + s;
  return a.graph->emit(std::move(out), {a.id}, [ia = a.id](Graph& g, std::size_t self) {
    accumulate(g, ia, g.grad(self));
  });
}

Var sigmoid(Var a) {
  Matrix out = (1.0 + (-a.value().array()).exp()).inverse().matrix();
  return a.graph->emit(std::move(out), {a.id}, [ia = a.id](Graph& g, std::size_t self) {
    const auto y = g.value(self).array();
    accumulate(g, ia, (g.grad(self).array() * y * (1.0 - y)).matrix());
  });
}

Var tanh(Var a) {
  Matrix out = a.value().array().tanh().matrix();
  return a.graph->emit(std::move(out), {a.id}, [ia = a.id](Graph& g, std::size_t self) {
    const auto y = g.value(self).array();
    accumulate(g, ia, (g.grad(self).array() * (1.0 - y * y)).matrix());
  });
}

Var exp(Var a) {
  Matrix out = a.value().array().exp().matrix();
  return a.graph->emit(std::move(out), {a.id}, [ia = a.id](Graph& g, std::size_t self) {
    accumulate(g, ia, g.grad(self).cwiseProduct(g.value(self)));
  });
}

Var transpose(Var a) {
  Matrix out = a.value().transpose();
  return a.graph->emit(std::move(out), {a.id}, [ia = a.id](Graph& g, std::size_t self) {
    accumulate(g, ia, g.grad(self).transpose());
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  Graph& g = *parts.front().graph;
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.graph != &g) throw ContractError("concat_cols: operands belong to different graphs");
    if (p.rows() != rows) shape_error("concat_cols", parts.front().value(), p.value());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> ids;
  ids.reserve(parts.size());
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
    ids.push_back(p.id);
  }
  return g.emit(std::move(out), ids, [](Graph& g, std::size_t self) {
    Eigen::Index at = 0;
    for (std::size_t pid : g.parents(self)) {
      const Eigen::Index c = g.value(pid).cols();
      accumulate(g, pid, g.grad(self).middleCols(at, c));
      at += c;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  Graph& g = *parts.front().graph;
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.graph != &g) throw ContractError("concat_rows: operands belong to different graphs");
    if (p.cols() != cols) shape_error("concat_rows", parts.front().value(), p.value());
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> ids;
  ids.reserve(parts.size());
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
    ids.push_back(p.id);
  }
  return g.emit(std::move(out), ids, [](Graph& g, std::size_t self) {
    Eigen::Index at = 0;
    for (std::size_t pid : g.parents(self)) {
      const Eigen::Index r = g.value(pid).rows();
      accumulate(g, pid, g.grad(self).middleRows(at, r));
      at += r;
    }
  });
}

Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > a.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " + shape_of(a.value()));
  }
  Matrix out = a.value().middleCols(begin, count);
  return a.graph->emit(std::move(out), {a.id}, [ia = a.id, begin, count](Graph& g, std::size_t self) {
    if (g.needs_grad(ia)) g.grad_ref(ia).middleCols(begin, count) += g.grad(self);
  });
}

Var slice_rows(Var a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > a.rows()) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " + shape_of(a.value()));
  }
  Matrix out = a.value().middleRows(begin, count);
  return a.graph->emit(std::move(out), {a.id}, [ia = a.id, begin, count](Graph& g, std::size_t self) {
    if (g.needs_grad(ia)) g.grad_ref(ia).middleRows(begin, count) += g.grad(self);
  });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.graph->emit(std::move(out), {a.id}, [ia = a.id](Graph& g, std::size_t self) {
    if (g.needs_grad(ia)) g.grad_ref(ia).array() += g.grad(self)(0, 0);
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean: empty operand");
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() / n;
  return a.graph->emit(std::move(out), {a.id}, [ia = a.id, n](Graph& g, std::size_t self) {
    if (g.needs_grad(ia)) g.grad_ref(ia).array() += g.grad(self)(0, 0) / n;
  });
}

Var mse_loss(Var prediction, Var target) {
  Graph& g = graph_of(prediction, target);
  require_same_shape("mse_loss", prediction, target);
  const double n = static_cast<double>(prediction.value().size());
  Matrix out(1, 1);
  out(0, 0) = (prediction.value() - target.value()).squaredNorm() / n;
  return g.emit(std::move(out), {prediction.id, target.id},
                [ip = prediction.id, it = target.id, n](Graph& g, std::size_t self) {
                  const Matrix d = (g.value(ip) - g.value(it)) * (2.0 * g.grad(self)(0, 0) / n);
                  accumulate(g, ip, d);
                  accumulate(g, it, -d);
                });
}

Var smooth_l1_loss(Var prediction, Var target) {
  Graph& g = graph_of(prediction, target);
  require_same_shape("smooth_l1_loss", prediction, target);
  const double n = static_cast<double>(prediction.value().size());
  const Eigen::ArrayXXd d = (prediction.value() - target.value()).array();
  const Eigen::ArrayXXd ad = d.abs();
  Matrix out(1, 1);
  out(0, 0) = (ad < 1.0).select(0.5 * d * d, ad - 0.5).sum() / n;
  return g.emit(std::move(out), {prediction.id, target.id},
                [ip = prediction.id, it = target.id, n](Graph& g, std::size_t self) {
                  const Eigen::ArrayXXd d = (g.value(ip) - g.value(it)).array();
                  const Eigen::ArrayXXd slope = d.max(-1.0).min(1.0);
                  const Matrix grad = (slope * (g.grad(self)(0, 0) / n)).matrix();
                  accumulate(g, ip, grad);
                  accumulate(g, it, -grad);
                });
}

double grad_check(const std::function<Var(Graph&)>& build, std::span<Parameter* const> params,
                  double eps) {
  for (Parameter* p : params) p->zero_grad();
  {
    Graph g;
    g.backward(build(g));
  }
  auto evaluate = [&build]() {
    Graph g;
    return build(g).scalar();
  };
  double worst = 0.0;
  for (Parameter* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + eps;
      const double up = evaluate();
      x = saved - eps;
      const double down = evaluate();
      x = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p->grad.data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (Parameter* p : params) p->grad *= factor;
  }
  return norm;
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (const Parameter* p : params_) {
    first_moment_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    second_moment_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(config_.beta1, t);
  const double correction2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    first_moment_[k] = config_.beta1 * first_moment_[k] + (1.0 - config_.beta1) * p.grad;
    second_moment_[k] = config_.beta2 * second_moment_[k] +
                        (1.0 - config_.beta2) * p.grad.cwiseProduct(p.grad);
    const auto m_hat = first_moment_[k].array() / correction1;
    const auto v_hat = second_moment_[k].array() / correction2;
    p.value.array() -= config_.learning_rate * m_hat / (v_hat.sqrt() + config_.epsilon);
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

}  // namespace latdyn::grad
