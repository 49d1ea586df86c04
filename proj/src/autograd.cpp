#include "prga/autograd.hpp"

#include <cmath>
#include <string>

#include "prga/embank.hpp"
#include "prga/error.hpp"

namespace prga {

double cross_entropy(const Eigen::VectorXd& logits, std::size_t label) {
  if (label >= static_cast<std::size_t>(logits.size())) {
    throw Error(ErrorKind::LabelOutOfRange, "label " + std::to_string(label) + " for " +
                                                std::to_string(logits.size()) + " logits");
  }
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  return lse - logits(static_cast<Eigen::Index>(label));
}

namespace ad {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kSpreadFloor = 1e-12;

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::DimMismatch, std::string(op) + " shape mismatch");
  }
}

}  // namespace

Var Tape::constant(Matrix value) { return push(std::move(value), {}, nullptr); }

Var Tape::leaf(Matrix value) {
  Node node;
  node.grad = Matrix::Zero(value.rows(), value.cols());
  node.value = std::move(value);
  node.needs_grad = true;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::push(Matrix value, std::initializer_list<Var> inputs, Backward fn) {
  Node node;
  for (const Var in : inputs) {
    if (in.id >= nodes_.size()) throw Error(ErrorKind::GraphNotRecorded, "input is not on this tape");
    node.needs_grad = node.needs_grad || nodes_[in.id].needs_grad;
  }
  if (node.needs_grad) {
    node.grad = Matrix::Zero(value.rows(), value.cols());
    node.backward = std::move(fn);
  }
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

void Tape::accumulate(Var target, const Matrix& delta) {
  Node& node = nodes_[target.id];
  if (node.needs_grad) node.grad += delta;
}

void Tape::backward(Var loss) {
  if (loss.id >= nodes_.size()) throw Error(ErrorKind::GraphNotRecorded, "loss is not on this tape");
  Node& root = nodes_[loss.id];
  if (root.value.size() != 1) throw Error(ErrorKind::GraphNotRecorded, "loss must be a scalar");
  if (!root.needs_grad) return;
  root.grad(0, 0) = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (nodes_[i].needs_grad && nodes_[i].backward) nodes_[i].backward(*this, i);
  }
}

Var matmul(Tape& t, Var a, Var b) {
  if (t.value(a).cols() != t.value(b).rows()) throw Error(ErrorKind::DimMismatch, "matmul inner dims");
  return t.push(t.value(a) * t.value(b), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.upstream(self);
    if (t.needs_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.needs_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var matmul_bt(Tape& t, Var a, Var b) {
  if (t.value(a).cols() != t.value(b).cols()) throw Error(ErrorKind::DimMismatch, "matmul_bt inner dims");
  return t.push(t.value(a) * t.value(b).transpose(), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.upstream(self);
    if (t.needs_grad(a)) t.accumulate(a, g * t.value(b));
    if (t.needs_grad(b)) t.accumulate(b, g.transpose() * t.value(a));
  });
}

Var add(Tape& t, Var a, Var b) {
  require_same_shape(t.value(a), t.value(b), "add");
  return t.push(t.value(a) + t.value(b), {a, b}, [a, b](Tape& t, std::size_t self) {
    t.accumulate(a, t.upstream(self));
    t.accumulate(b, t.upstream(self));
  });
}

Var scale(Tape& t, Var a, double s) {
  return t.push(s * t.value(a), {a},
                [a, s](Tape& t, std::size_t self) { t.accumulate(a, s * t.upstream(self)); });
}

Var scale_by(Tape& t, Var a, Var s, Eigen::Index index) {
  const double factor = t.value(s)(index, 0);
  return t.push(factor * t.value(a), {a, s}, [a, s, index](Tape& t, std::size_t self) {
    const Matrix& g = t.upstream(self);
    if (t.needs_grad(a)) t.accumulate(a, t.value(s)(index, 0) * g);
    if (t.needs_grad(s)) {
      Matrix delta = Matrix::Zero(t.value(s).rows(), t.value(s).cols());
      delta(index, 0) = g.cwiseProduct(t.value(a)).sum();
      t.accumulate(s, delta);
    }
  });
}

Var hadamard(Tape& t, Var a, Var b) {
  require_same_shape(t.value(a), t.value(b), "hadamard");
  return t.push(t.value(a).cwiseProduct(t.value(b)), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.upstream(self);
    if (t.needs_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
    if (t.needs_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
  });
}

Var sigmoid(Tape& t, Var a) {
  Matrix y = t.value(a).unaryExpr([](double x) { return logistic(x); });
  return t.push(std::move(y), {a}, [a](Tape& t, std::size_t self) {
    const Matrix& y = t.output(self);
    t.accumulate(a, t.upstream(self).cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

Var relu(Tape& t, Var a) {
  return t.push(t.value(a).cwiseMax(0.0), {a}, [a](Tape& t, std::size_t self) {
    const Matrix& x = t.value(a);
    t.accumulate(a, t.upstream(self).cwiseProduct(
                        x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; })));
  });
}

Var leaky_relu(Tape& t, Var a, double slope) {
  Matrix y = t.value(a).unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  return t.push(std::move(y), {a}, [a, slope](Tape& t, std::size_t self) {
    const Matrix& x = t.value(a);
    t.accumulate(a, t.upstream(self).cwiseProduct(
                        x.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; })));
  });
}

Var pair_scores(Tape& t, Var z, Var attn) {
  const Matrix& zv = t.value(z);
  const Eigen::Index d = zv.cols();
  if (t.value(attn).rows() != 2 * d || t.value(attn).cols() != 1) {
    throw Error(ErrorKind::DimMismatch, "attention vector must be 2d x 1");
  }
  const Eigen::VectorXd left = zv * t.value(attn).topRows(d);
  const Eigen::VectorXd right = zv * t.value(attn).bottomRows(d);
  Matrix e = left.replicate(1, zv.rows()) + right.transpose().replicate(zv.rows(), 1);
  return t.push(std::move(e), {z, attn}, [z, attn](Tape& t, std::size_t self) {
    const Matrix& g = t.upstream(self);
    const Matrix& zv = t.value(z);
    const Eigen::Index d = zv.cols();
    const Eigen::VectorXd row_sums = g.rowwise().sum();
    const Eigen::VectorXd col_sums = g.colwise().sum().transpose();
    if (t.needs_grad(z)) {
      const Matrix& av = t.value(attn);
      t.accumulate(z, row_sums * av.topRows(d).transpose() + col_sums * av.bottomRows(d).transpose());
    }
    if (t.needs_grad(attn)) {
      Matrix delta(2 * d, 1);
      delta.topRows(d) = zv.transpose() * row_sums;
      delta.bottomRows(d) = zv.transpose() * col_sums;
      t.accumulate(attn, delta);
    }
  });
}

Var mask_offdiag(Tape& t, Var e) {
  Matrix y = t.value(e);
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      if (i != j) y(i, j) = kNegInf;
    }
  }
  return t.push(std::move(y), {e}, [e](Tape& t, std::size_t self) {
    const Matrix& g = t.upstream(self);
    Matrix delta = Matrix::Zero(g.rows(), g.cols());
    delta.diagonal() = g.diagonal();
    t.accumulate(e, delta);
  });
}

Var row_softmax(Tape& t, Var e) {
  const Matrix& x = t.value(e);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double top = x.row(i).maxCoeff();
    if (top == kNegInf) throw Error(ErrorKind::AllMasked, "softmax row " + std::to_string(i));
    double total = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      y(i, j) = (x(i, j) == kNegInf) ? 0.0 : std::exp(x(i, j) - top);
      total += y(i, j);
    }
    y.row(i) /= total;
  }
  return t.push(std::move(y), {e}, [e](Tape& t, std::size_t self) {
    const Matrix& y = t.output(self);
    const Matrix& g = t.upstream(self);
    const Eigen::VectorXd inner = y.cwiseProduct(g).rowwise().sum();
    t.accumulate(e, y.cwiseProduct(g - inner.replicate(1, g.cols())));
  });
}

Var column_stat(Tape& t, Var f, Aggregator agg) {
  const Matrix& x = t.value(f);
  const Eigen::Index p = x.rows();
  if (p < 1) throw Error(ErrorKind::EmptyInput, "column statistic over zero rows");
  const double inv_p = 1.0 / static_cast<double>(p);
  switch (agg) {
    case Aggregator::Mean:
      return t.push(x.colwise().mean(), {f}, [f, inv_p](Tape& t, std::size_t self) {
        t.accumulate(f, (inv_p * t.upstream(self)).replicate(t.value(f).rows(), 1));
      });
    case Aggregator::Max:
    case Aggregator::Min: {
      const bool take_max = agg == Aggregator::Max;
      std::vector<Eigen::Index> winner(static_cast<std::size_t>(x.cols()), 0);
      Matrix y(1, x.cols());
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < p; ++i) {
          if (take_max ? x(i, j) > x(best, j) : x(i, j) < x(best, j)) best = i;
        }
        winner[static_cast<std::size_t>(j)] = best;
        y(0, j) = x(best, j);
      }
      return t.push(std::move(y), {f}, [f, winner](Tape& t, std::size_t self) {
        const Matrix& g = t.upstream(self);
        Matrix delta = Matrix::Zero(t.value(f).rows(), t.value(f).cols());
        for (Eigen::Index j = 0; j < g.cols(); ++j) delta(winner[static_cast<std::size_t>(j)], j) = g(0, j);
        t.accumulate(f, delta);
      });
    }
    case Aggregator::Std: {
      const Eigen::RowVectorXd mean = x.colwise().mean();
      const Matrix centered = x.rowwise() - mean;
      Matrix y = (centered.array().square().colwise().sum() * inv_p).sqrt().matrix();
      const Matrix sd = y;
      const Matrix scale = x.cwiseAbs().colwise().maxCoeff();
      return t.push(std::move(y), {f}, [f, centered, sd, scale, inv_p](Tape& t, std::size_t self) {
        const Matrix& g = t.upstream(self);
        Matrix delta = Matrix::Zero(centered.rows(), centered.cols());
        for (Eigen::Index j = 0; j < centered.cols(); ++j) {
          // A spread at rounding level means coincident rows (additive attention
          // produces those routinely); the quotient would be noise over noise,
          // so take the zero subgradient.
          if (sd(0, j) > kSpreadFloor * (1.0 + scale(0, j))) {
            delta.col(j) = centered.col(j) * (g(0, j) * inv_p / sd(0, j));
          }
        }
        t.accumulate(f, delta);
      });
    }
  }
  throw Error(ErrorKind::InvalidArgument, "unknown aggregator");
}

Var l2_normalize_row(Tape& t, Var v) {
  const Matrix& x = t.value(v);
  if (x.rows() != 1) throw Error(ErrorKind::DimMismatch, "l2_normalize_row expects a row vector");
  const double norm = x.norm();
  // NaN passes through so the training loop can report a non-finite loss
  if (norm <= kNormEpsilon) throw Error(ErrorKind::ZeroVector, "norm " + std::to_string(norm));
  return t.push(x / norm, {v}, [v, norm](Tape& t, std::size_t self) {
    const Matrix& y = t.output(self);
    const Matrix& g = t.upstream(self);
    t.accumulate(v, (g - y * y.cwiseProduct(g).sum()) / norm);
  });
}

Var exp_affinity(Tape& t, Var sim, double beta) {
  Matrix y = (-beta * (1.0 - t.value(sim).array())).exp().matrix();
  return t.push(std::move(y), {sim}, [sim, beta](Tape& t, std::size_t self) {
    t.accumulate(sim, beta * t.upstream(self).cwiseProduct(t.output(self)));
  });
}

Var cross_entropy(Tape& t, Var logits, std::size_t label) {
  const Matrix& z = t.value(logits);
  if (z.rows() != 1) throw Error(ErrorKind::DimMismatch, "cross_entropy expects a 1 x N row");
  const Eigen::VectorXd row = z.row(0).transpose();
  Matrix loss(1, 1);
  loss(0, 0) = prga::cross_entropy(row, label);
  return t.push(std::move(loss), {logits}, [logits, label](Tape& t, std::size_t self) {
    const Matrix& z = t.value(logits);
    const double top = z.maxCoeff();
    Matrix p = (z.array() - top).exp().matrix();
    p /= p.sum();
    p(0, static_cast<Eigen::Index>(label)) -= 1.0;
    t.accumulate(logits, t.upstream(self)(0, 0) * p);
  });
}

}  // namespace ad
}  // namespace prga
