#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "prga/pooling.hpp"

namespace prga {

// -log softmax(logits)[label], max-shifted.
double cross_entropy(const Eigen::VectorXd& logits, std::size_t label);

namespace ad {

using Matrix = Eigen::MatrixXd;

struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
};

// Recorded tape for reverse-mode differentiation. Nodes are appended in
// evaluation order, so reverse creation order is a valid topological order.
// Only the operations below exist; this is not a general autodiff.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Var constant(Matrix value);
  Var leaf(Matrix value);

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  const Matrix& grad(Var v) const { return nodes_.at(v.id).grad; }
  bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Seeds d(loss)/d(loss) = 1 and runs every recorded backward step. Throws
  // GraphNotRecorded if loss is not a 1x1 node of this tape.
  void backward(Var loss);

  // Used by the operations.
  Var push(Matrix value, std::initializer_list<Var> inputs, Backward fn);
  const Matrix& upstream(std::size_t self) const { return nodes_[self].grad; }
  const Matrix& output(std::size_t self) const { return nodes_[self].value; }
  void accumulate(Var target, const Matrix& delta);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

Var matmul(Tape& t, Var a, Var b);
// a * b^T
Var matmul_bt(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);
// a * s(index), with s a column of scalars.
Var scale_by(Tape& t, Var a, Var s, Eigen::Index index);
Var hadamard(Tape& t, Var a, Var b);
Var sigmoid(Tape& t, Var a);
Var relu(Tape& t, Var a);
Var leaky_relu(Tape& t, Var a, double slope);
// GAT score: out(p,q) = z_p . attn[:d] + z_q . attn[d:], z is P x d, attn 2d x 1.
Var pair_scores(Tape& t, Var z, Var attn);
// Off-diagonal entries become -inf; only the diagonal carries gradient.
Var mask_offdiag(Tape& t, Var e);
// Row-wise softmax; -inf entries get probability 0.
Var row_softmax(Tape& t, Var e);
// 1 x d column statistic over the rows of f. Max/min route gradient to the
// first achieving row.
Var column_stat(Tape& t, Var f, Aggregator agg);
// Row vector divided by its norm.
Var l2_normalize_row(Tape& t, Var v);
// exp(-beta (1 - s)) elementwise.
Var exp_affinity(Tape& t, Var sim, double beta);
// Scalar loss for a 1 x N logit row.
Var cross_entropy(Tape& t, Var logits, std::size_t label);

}  // namespace ad
}  // namespace prga
