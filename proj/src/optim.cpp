#include "prga/optim.hpp"

#include <cmath>
#include <numbers>

#include "prga/error.hpp"

namespace prga {

void ParamSet::add(std::string name, Eigen::MatrixXd& m, bool unit_rows) {
  ParamTensor t;
  t.name = std::move(name);
  t.data = m.data();
  t.rows = m.rows();
  t.cols = m.cols();
  t.grad = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  t.unit_rows = unit_rows;
  tensors_.push_back(std::move(t));
}

void ParamSet::add(std::string name, Eigen::VectorXd& v) {
  ParamTensor t;
  t.name = std::move(name);
  t.data = v.data();
  t.rows = v.size();
  t.cols = 1;
  t.grad = Eigen::MatrixXd::Zero(v.size(), 1);
  tensors_.push_back(std::move(t));
}

const ParamTensor* ParamSet::find(std::string_view name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void ParamSet::zero_grad() {
  for (auto& t : tensors_) t.grad.setZero();
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.rows * t.cols);
  return n;
}

AdamW::AdamW(const ParamSet& params, AdamWConfig config) : config_(config) {
  for (const auto& t : params) {
    m_.push_back(Eigen::MatrixXd::Zero(t.rows, t.cols));
    v_.push_back(Eigen::MatrixXd::Zero(t.rows, t.cols));
  }
}

void AdamW::step(ParamSet& params, double lr) {
  if (params.size() != m_.size()) throw Error(ErrorKind::DimMismatch, "optimizer built for another set");
  ++steps_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    ParamTensor& t = params[i];
    auto theta = t.value();
    const Eigen::MatrixXd before = t.unit_rows ? Eigen::MatrixXd(theta) : Eigen::MatrixXd();
    m_[i] = b1 * m_[i] + (1.0 - b1) * t.grad;
    v_[i] = b2 * v_[i] + (1.0 - b2) * t.grad.cwiseProduct(t.grad);
    theta -= (lr * config_.weight_decay) * theta;
    const Eigen::ArrayXXd m_hat = m_[i].array() / c1;
    const Eigen::ArrayXXd v_hat = v_[i].array() / c2;
    theta.array() -= lr * m_hat / (v_hat.sqrt() + config_.eps);
    if (t.unit_rows) {
      for (Eigen::Index r = 0; r < theta.rows(); ++r) {
        if (theta.row(r) == before.row(r)) continue;
        const double norm = theta.row(r).norm();
        if (norm > 0.0) theta.row(r) /= norm;
      }
    }
  }
}

double cosine_lr(double t, double lr0, double t_max) {
  constexpr double lr_min = 0.0;
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(std::numbers::pi * t / t_max));
}

}  // namespace prga
