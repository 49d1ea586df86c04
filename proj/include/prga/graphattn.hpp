#pragma once

#include <cstddef>
#include <limits>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "prga/rng.hpp"

namespace prga {

enum class Activation { Relu, Identity };

// Edge-score variants. Combined is the gated product A1 * sigmoid(A2);
// SelfOnly removes every edge except the self-loop.
enum class AttentionMode { A1, A2, Combined, SelfOnly };

inline constexpr double kDefaultNegativeSlope = 0.2;
inline constexpr double kMasked = -std::numeric_limits<double>::infinity();

std::string_view to_string(AttentionMode mode);
AttentionMode parse_attention_mode(std::string_view name);
std::string_view to_string(Activation act);
Activation parse_activation(std::string_view name);

struct LayerParams {
  Eigen::MatrixXd weight;  // d_out x d_in
  Eigen::VectorXd attn;    // 2 * d_out: [left half | right half]
  double negative_slope = kDefaultNegativeSlope;
  Activation activation = Activation::Identity;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

struct GraphParams {
  std::vector<LayerParams> layers;

  Eigen::Index in_dim() const { return layers.front().in_dim(); }
  Eigen::Index out_dim() const { return layers.back().out_dim(); }

  // Dims chain, L >= 1, entries finite.
  void validate() const;
};

// Layer widths {d_0, d_1, ..., d_L}. Weights start near identity, attention
// vectors small Gaussian; hidden layers use ReLU and the last identity.
GraphParams init_graph_params(const std::vector<Eigen::Index>& widths, SplitMix64& rng);

// P x P scores. Row p holds the scores of patch p towards every q.
Eigen::MatrixXd edge_scores(const Eigen::MatrixXd& h, const LayerParams& layer, AttentionMode mode);

// Row-wise softmax of LeakyReLU(E); kMasked entries map to exactly 0.
Eigen::MatrixXd attention_coeffs(const Eigen::MatrixXd& scores, double negative_slope);

// out[p] = act(sum_q alpha[p][q] W h_q)
Eigen::MatrixXd message_pass(const Eigen::MatrixXd& h, const LayerParams& layer,
                             const Eigen::MatrixXd& alpha);

// Refined patch features after every layer.
Eigen::MatrixXd gat_forward(const Eigen::MatrixXd& h0, const GraphParams& params, AttentionMode mode);

// D^{-1/2} A D^{-1/2} for the all-ones adjacency on p nodes.
Eigen::MatrixXd gcn_normalize(std::size_t p);

// Fixed-adjacency baseline: act(A_hat H W^T).
Eigen::MatrixXd gcn_propagate(const Eigen::MatrixXd& h, const Eigen::MatrixXd& weight, Activation act);

}  // namespace prga
