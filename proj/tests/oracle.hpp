#pragma once

// Straight-line reference of the forward pipeline, written with plain loops
// and std:: math only. Shares no code with the library beyond the parameter
// structs, so agreement with it is meaningful.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "prga/model.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;
using Vec = std::vector<double>;

inline Mat to_mat(const Eigen::MatrixXd& m) {
  Mat out(static_cast<std::size_t>(m.rows()), Vec(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// z = W h for every patch row
inline Mat project(const Mat& h, const Mat& w) {
  Mat z(h.size(), Vec(w.size(), 0.0));
  for (std::size_t p = 0; p < h.size(); ++p)
    for (std::size_t o = 0; o < w.size(); ++o)
      for (std::size_t i = 0; i < h[p].size(); ++i) z[p][o] += w[o][i] * h[p][i];
  return z;
}

inline Mat layer_forward(const Mat& h, const prga::LayerParams& layer, prga::AttentionMode mode) {
  const Mat w = to_mat(layer.weight);
  const Mat z = project(h, w);
  const std::size_t P = h.size();
  const std::size_t d = w.size();
  Mat e(P, Vec(P, 0.0));
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t q = 0; q < P; ++q) {
      double a1 = 0.0;
      double a2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        a1 += layer.attn(static_cast<Eigen::Index>(k)) * z[p][k] +
              layer.attn(static_cast<Eigen::Index>(d + k)) * z[q][k];
        a2 += z[p][k] * z[q][k];
      }
      switch (mode) {
        case prga::AttentionMode::A1: e[p][q] = a1; break;
        case prga::AttentionMode::A2: e[p][q] = a2; break;
        case prga::AttentionMode::Combined: e[p][q] = a1 * sigmoid(a2); break;
        case prga::AttentionMode::SelfOnly:
          e[p][q] = p == q ? a1 * sigmoid(a2) : -std::numeric_limits<double>::infinity();
          break;
      }
    }
  }
  Mat out(P, Vec(d, 0.0));
  for (std::size_t p = 0; p < P; ++p) {
    // leaky relu, then softmax over q
    Vec s(P);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < P; ++q) {
      const double x = e[p][q];
      s[q] = x >= 0.0 ? x : layer.negative_slope * x;
      if (std::isfinite(s[q])) top = std::max(top, s[q]);
    }
    double total = 0.0;
    for (std::size_t q = 0; q < P; ++q) {
      s[q] = std::isfinite(s[q]) ? std::exp(s[q] - top) : 0.0;
      total += s[q];
    }
    for (std::size_t q = 0; q < P; ++q)
      for (std::size_t k = 0; k < d; ++k) out[p][k] += s[q] / total * z[q][k];
    if (layer.activation == prga::Activation::Relu)
      for (auto& x : out[p]) x = std::max(0.0, x);
  }
  return out;
}

inline Vec column_stat(prga::Aggregator agg, const Mat& f) {
  const std::size_t P = f.size();
  const std::size_t d = f[0].size();
  Vec out(d, 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    double sum = 0.0, hi = f[0][k], lo = f[0][k];
    for (std::size_t p = 0; p < P; ++p) {
      sum += f[p][k];
      hi = std::max(hi, f[p][k]);
      lo = std::min(lo, f[p][k]);
    }
    const double mean = sum / static_cast<double>(P);
    double var = 0.0;
    for (std::size_t p = 0; p < P; ++p) var += (f[p][k] - mean) * (f[p][k] - mean);
    switch (agg) {
      case prga::Aggregator::Mean: out[k] = mean; break;
      case prga::Aggregator::Max: out[k] = hi; break;
      case prga::Aggregator::Min: out[k] = lo; break;
      case prga::Aggregator::Std: out[k] = std::sqrt(var / static_cast<double>(P)); break;
    }
  }
  return out;
}

inline Vec unit(const Vec& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  Vec out(v);
  for (auto& x : out) x /= n;
  return out;
}

// Graph layers, pooling, normalization.
inline Vec refine(const prga::Model& model, const Eigen::MatrixXd& patches) {
  Mat h = to_mat(patches);
  for (const auto& layer : model.graph.layers) h = layer_forward(h, layer, model.mode);
  const auto& pool = model.pooling;
  Vec f(static_cast<std::size_t>(pool.out_dim()), 0.0);
  for (std::size_t m = 0; m < pool.aggregators.size(); ++m) {
    const Vec stat = column_stat(pool.aggregators[m], h);
    const Mat w = to_mat(pool.projections[m]);
    for (std::size_t o = 0; o < w.size(); ++o)
      for (std::size_t i = 0; i < stat.size(); ++i)
        f[o] += pool.gamma(static_cast<Eigen::Index>(m)) * w[o][i] * stat[i];
  }
  return unit(f);
}

// alpha * exp(-beta (1 - f.theta)) L + f W_c^T with a normalized query.
inline Vec fuse(const Vec& f, const Eigen::MatrixXd& keys, const prga::CacheModel& cache) {
  const std::size_t N = static_cast<std::size_t>(cache.class_count());
  Vec out(N, 0.0);
  for (Eigen::Index m = 0; m < keys.rows(); ++m) {
    double sim = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) sim += f[k] * keys(m, static_cast<Eigen::Index>(k));
    const double a = std::exp(-cache.beta * (1.0 - sim));
    for (std::size_t c = 0; c < N; ++c) out[c] += cache.alpha * a * cache.values(m, static_cast<Eigen::Index>(c));
  }
  for (std::size_t c = 0; c < N; ++c)
    for (std::size_t k = 0; k < f.size(); ++k)
      out[c] += f[k] * cache.classifier(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k));
  return out;
}

inline Vec train_logits(const prga::Model& model, const Eigen::MatrixXd& patches) {
  return fuse(refine(model, patches), model.cache.keys, model.cache);
}

inline Vec infer_logits(const prga::CacheModel& cache, const Eigen::VectorXd& global) {
  return fuse(unit(Vec(global.data(), global.data() + global.size())), cache.keys, cache);
}

inline double cross_entropy(const Vec& logits, std::size_t label) {
  double top = logits[0];
  for (double x : logits) top = std::max(top, x);
  double total = 0.0;
  for (double x : logits) total += std::exp(x - top);
  return std::log(total) + top - logits[label];
}

}  // namespace oracle
