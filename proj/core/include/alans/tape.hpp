#pragma once

// Reverse-mode differentiation over dense matrices.
//
// Every operation appends a node holding its value and, when any operand
// needs a gradient, the rule that pushes the node's adjoint back to its
// operands. Nodes are appended in evaluation order, so one reverse sweep over
// the record visits them in reverse topological order.

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace alans::ad {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Id = int;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Id variable(Mat value);
  Id constant(Mat value);
  Id scalar_constant(double v) { return constant(Mat::Constant(1, 1, v)); }

  const Mat& value(Id id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  double scalar(Id id) const { return value(id)(0, 0); }
  bool requires_grad(Id id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  /// Adjoint after backward(); zero-sized when nothing reached the node.
  const Mat& grad(Id id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  std::size_t size() const { return nodes_.size(); }

  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id scale(Id a, double s);
  Id matmul(Id a, Id b);
  Id transpose(Id a);
  /// a + s I.
  Id add_identity(Id a, double s);
  /// sum_i w_i x_i with constant weights.
  Id linear_combination(std::span<const Id> xs, std::span<const double> w);
  Id sum(std::span<const Id> xs);
  /// K^{-1} B through column-pivoted QR; throws SolveFailure on a singular K.
  Id solve(Id K, Id B);
  /// ||a||_F^2 as a 1x1 node.
  Id frobenius_sq(Id a);
  Id kron(Id a, Id b);
  /// Column-major vectorization and its inverse.
  Id vec(Id a);
  Id unvec(Id a, Eigen::Index rows, Eigen::Index cols);
  /// Stacks 1x1 nodes into a column vector.
  Id concat(std::span<const Id> scalars);
  Id element(Id v, Eigen::Index i);
  Id softmax(Id v);
  Id log_softmax(Id v);
  Id log(Id a);
  /// Jensen-Shannon divergence in bits between a column vector p and a fixed q.
  Id jsd(Id p, const Vec& q);
  /// out_n = log sum_b exp(log_w_b + log_p_b[n]).
  Id log_mix(Id log_w, std::span<const Id> log_ps);

  /// Seeds d(root)/d(root) = 1 and sweeps the record once in reverse.
  void backward(Id root);

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    std::function<void(Tape&, const Mat&)> pullback;
  };

  Id push(Mat value, bool requires_grad, std::function<void(Tape&, const Mat&)> pullback);
  void accumulate(Id id, const Mat& g);
  template <typename Fn>
  Id unary_op(Id a, Mat value, Fn&& pullback);
  template <typename Fn>
  Id binary_op(Id a, Id b, Mat value, Fn&& pullback);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace alans::ad
