#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace prga {

// Non-owning view of one learnable tensor plus its gradient buffer.
struct ParamTensor {
  std::string name;
  double* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::MatrixXd grad;
  bool unit_rows = false;  // rows re-normalized after every optimizer step

  Eigen::Map<Eigen::MatrixXd> value() { return {data, rows, cols}; }
  Eigen::Map<const Eigen::MatrixXd> value() const { return {data, rows, cols}; }
};

// The tensors that receive gradients. Shapes are fixed once added; the
// referenced storage must outlive the set.
class ParamSet {
 public:
  void add(std::string name, Eigen::MatrixXd& m, bool unit_rows = false);
  void add(std::string name, Eigen::VectorXd& v);

  std::size_t size() const { return tensors_.size(); }
  ParamTensor& operator[](std::size_t i) { return tensors_[i]; }
  const ParamTensor& operator[](std::size_t i) const { return tensors_[i]; }
  const ParamTensor* find(std::string_view name) const;

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  void zero_grad();
  std::size_t scalar_count() const;

 private:
  std::vector<ParamTensor> tensors_;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

// AdamW with decoupled weight decay and bias-corrected moments.
class AdamW {
 public:
  AdamW(const ParamSet& params, AdamWConfig config);

  // theta -= lr * wd * theta, then theta -= lr * m_hat / (sqrt(v_hat) + eps).
  // Tensors flagged unit_rows get every changed row re-normalized.
  void step(ParamSet& params, double lr);

  std::int64_t steps() const { return steps_; }
  const Eigen::MatrixXd& first_moment(std::size_t i) const { return m_[i]; }
  const Eigen::MatrixXd& second_moment(std::size_t i) const { return v_[i]; }

 private:
  AdamWConfig config_;
  std::int64_t steps_ = 0;
  std::vector<Eigen::MatrixXd> m_;
  std::vector<Eigen::MatrixXd> v_;
};

// Cosine annealing to zero: 0.5 * lr0 * (1 + cos(pi * t / t_max)).
double cosine_lr(double t, double lr0, double t_max);

}  // namespace prga
