#include "prga/graphattn.hpp"

#include <cmath>
#include <string>

#include "prga/error.hpp"

namespace prga {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double apply(Activation act, double x) { return act == Activation::Relu ? (x > 0.0 ? x : 0.0) : x; }

void check_layer(const Eigen::MatrixXd& h, const LayerParams& layer) {
  if (h.cols() != layer.in_dim()) {
    throw Error(ErrorKind::DimMismatch, "features have width " + std::to_string(h.cols()) +
                                            ", layer expects " + std::to_string(layer.in_dim()));
  }
  if (layer.attn.size() != 2 * layer.out_dim()) {
    throw Error(ErrorKind::DimMismatch, "attention vector must have 2 * d_out entries");
  }
}

}  // namespace

std::string_view to_string(AttentionMode mode) {
  switch (mode) {
    case AttentionMode::A1: return "a1";
    case AttentionMode::A2: return "a2";
    case AttentionMode::Combined: return "combined";
    case AttentionMode::SelfOnly: return "self";
  }
  return "?";
}

AttentionMode parse_attention_mode(std::string_view name) {
  if (name == "a1") return AttentionMode::A1;
  if (name == "a2") return AttentionMode::A2;
  if (name == "combined") return AttentionMode::Combined;
  if (name == "self") return AttentionMode::SelfOnly;
  throw Error(ErrorKind::InvalidArgument, "unknown attention mode '" + std::string(name) + "'");
}

std::string_view to_string(Activation act) { return act == Activation::Relu ? "relu" : "identity"; }

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::Relu;
  if (name == "identity") return Activation::Identity;
  throw Error(ErrorKind::InvalidArgument, "unknown activation '" + std::string(name) + "'");
}

void GraphParams::validate() const {
  if (layers.empty()) throw Error(ErrorKind::DimMismatch, "graph needs at least one layer");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.attn.size() != 2 * layer.out_dim()) {
      throw Error(ErrorKind::DimMismatch, "layer " + std::to_string(l) + " attention size");
    }
    if (l > 0 && layer.in_dim() != layers[l - 1].out_dim()) {
      throw Error(ErrorKind::DimMismatch, "layer " + std::to_string(l) + " does not chain");
    }
    if (!layer.weight.allFinite() || !layer.attn.allFinite() || !std::isfinite(layer.negative_slope)) {
      throw Error(ErrorKind::NonFiniteValue, "layer " + std::to_string(l) + " has non-finite entries");
    }
  }
}

GraphParams init_graph_params(const std::vector<Eigen::Index>& widths, SplitMix64& rng) {
  if (widths.size() < 2) throw Error(ErrorKind::InvalidArgument, "need at least one layer");
  GraphParams params;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const Eigen::Index din = widths[l];
    const Eigen::Index dout = widths[l + 1];
    LayerParams layer;
    layer.weight = Eigen::MatrixXd::Identity(dout, din);
    for (Eigen::Index i = 0; i < dout; ++i) {
      for (Eigen::Index j = 0; j < din; ++j) layer.weight(i, j) += 0.01 * rng.normal();
    }
    layer.attn.resize(2 * dout);
    const double scale = 1.0 / std::sqrt(static_cast<double>(2 * dout));
    for (Eigen::Index i = 0; i < layer.attn.size(); ++i) layer.attn(i) = scale * rng.normal();
    layer.activation = (l + 2 == widths.size()) ? Activation::Identity : Activation::Relu;
    params.layers.push_back(std::move(layer));
  }
  return params;
}

Eigen::MatrixXd edge_scores(const Eigen::MatrixXd& h, const LayerParams& layer, AttentionMode mode) {
  check_layer(h, layer);
  const Eigen::Index p = h.rows();
  const Eigen::Index dout = layer.out_dim();
  const Eigen::MatrixXd z = h * layer.weight.transpose();  // row p = W h_p
  const Eigen::VectorXd left = z * layer.attn.head(dout);
  const Eigen::VectorXd right = z * layer.attn.tail(dout);

  Eigen::MatrixXd e(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const double a1 = left(i) + right(j);
      const double a2 = z.row(i).dot(z.row(j));
      switch (mode) {
        case AttentionMode::A1: e(i, j) = a1; break;
        case AttentionMode::A2: e(i, j) = a2; break;
        case AttentionMode::Combined: e(i, j) = a1 * sigmoid(a2); break;
        case AttentionMode::SelfOnly: e(i, j) = (i == j) ? a1 * sigmoid(a2) : kMasked; break;
      }
    }
  }
  return e;
}

Eigen::MatrixXd attention_coeffs(const Eigen::MatrixXd& scores, double negative_slope) {
  const Eigen::Index p = scores.rows();
  Eigen::MatrixXd alpha(p, scores.cols());
  for (Eigen::Index i = 0; i < p; ++i) {
    double row_max = kMasked;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      const double s = scores(i, j);
      if (std::isnan(s) || s == std::numeric_limits<double>::infinity()) {
        throw Error(ErrorKind::NonFiniteValue, "edge score row " + std::to_string(i));
      }
      const double y = s > 0.0 ? s : negative_slope * s;
      alpha(i, j) = y;
      if (y > row_max) row_max = y;
    }
    if (row_max == kMasked) {
      throw Error(ErrorKind::AllMasked, "every edge of row " + std::to_string(i) + " is masked");
    }
    double total = 0.0;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      const double w = (alpha(i, j) == kMasked) ? 0.0 : std::exp(alpha(i, j) - row_max);
      alpha(i, j) = w;
      total += w;
    }
    alpha.row(i) /= total;
  }
  return alpha;
}

Eigen::MatrixXd message_pass(const Eigen::MatrixXd& h, const LayerParams& layer,
                             const Eigen::MatrixXd& alpha) {
  check_layer(h, layer);
  if (alpha.rows() != h.rows() || alpha.cols() != h.rows()) {
    throw Error(ErrorKind::DimMismatch, "attention matrix must be P x P");
  }
  Eigen::MatrixXd out = alpha * (h * layer.weight.transpose());
  if (layer.activation == Activation::Relu) out = out.cwiseMax(0.0);
  return out;
}

Eigen::MatrixXd gat_forward(const Eigen::MatrixXd& h0, const GraphParams& params, AttentionMode mode) {
  if (params.layers.empty()) throw Error(ErrorKind::DimMismatch, "graph needs at least one layer");
  Eigen::MatrixXd h = h0;
  for (const auto& layer : params.layers) {
    const Eigen::MatrixXd alpha = attention_coeffs(edge_scores(h, layer, mode), layer.negative_slope);
    h = message_pass(h, layer, alpha);
  }
  return h;
}

Eigen::MatrixXd gcn_normalize(std::size_t p) {
  const auto n = static_cast<Eigen::Index>(p);
  const Eigen::MatrixXd adjacency = Eigen::MatrixXd::Ones(n, n);
  const Eigen::VectorXd inv_sqrt_degree = adjacency.rowwise().sum().cwiseSqrt().cwiseInverse();
  return inv_sqrt_degree.asDiagonal() * adjacency * inv_sqrt_degree.asDiagonal();
}

Eigen::MatrixXd gcn_propagate(const Eigen::MatrixXd& h, const Eigen::MatrixXd& weight, Activation act) {
  if (h.cols() != weight.cols()) throw Error(ErrorKind::DimMismatch, "gcn weight width");
  Eigen::MatrixXd out = gcn_normalize(static_cast<std::size_t>(h.rows())) * h * weight.transpose();
  return out.unaryExpr([act](double x) { return apply(act, x); });
}

}  // namespace prga
