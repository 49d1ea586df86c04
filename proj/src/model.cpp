#include "prga/model.hpp"

#include <string>

#include "prga/embank.hpp"
#include "prga/error.hpp"

namespace prga {

void Model::validate() const {
  graph.validate();
  pooling.validate();
  cache.validate();
  if (pooling.in_dim() != graph.out_dim()) {
    throw Error(ErrorKind::DimMismatch, "pooling input width differs from graph output width");
  }
  if (pooling.out_dim() != cache.dim()) {
    throw Error(ErrorKind::DimMismatch, "pooling output width differs from cache width");
  }
}

namespace {

template <typename Derived>
void round_dense(Eigen::PlainObjectBase<Derived>& m) {
  m = m.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

}  // namespace

void round_to_f32(Model& model) {
  for (auto& layer : model.graph.layers) {
    round_dense(layer.weight);
    round_dense(layer.attn);
    layer.negative_slope = static_cast<float>(layer.negative_slope);
  }
  round_dense(model.pooling.gamma);
  for (auto& w : model.pooling.projections) round_dense(w);
  round_dense(model.cache.keys);
  round_dense(model.cache.initial_keys);
  round_dense(model.cache.classifier);
  model.cache.alpha = static_cast<float>(model.cache.alpha);
  model.cache.beta = static_cast<float>(model.cache.beta);
}

ParamSet collect_params(Model& model) {
  ParamSet params;
  params.add("theta", model.cache.keys, /*unit_rows=*/true);
  for (std::size_t l = 0; l < model.graph.layers.size(); ++l) {
    auto& layer = model.graph.layers[l];
    params.add("graph." + std::to_string(l) + ".weight", layer.weight);
    params.add("graph." + std::to_string(l) + ".attn", layer.attn);
  }
  params.add("pool.gamma", model.pooling.gamma);
  for (std::size_t m = 0; m < model.pooling.projections.size(); ++m) {
    params.add("pool." + std::to_string(m) + ".proj", model.pooling.projections[m]);
  }
  return params;
}

Eigen::VectorXd refine_embedding(const Model& model, const Eigen::MatrixXd& patches) {
  const Eigen::MatrixXd refined = gat_forward(patches, model.graph, model.mode);
  return l2_normalize(multi_aggregate(refined, model.pooling));
}

double support_loss(const Model& model, const Eigen::MatrixXd& patches, std::uint32_t label) {
  return cross_entropy(train_logits(refine_embedding(model, patches), model.cache), label);
}

RecordedLoss record_support_loss(ad::Tape& tape, const Model& model, const Eigen::MatrixXd& patches,
                                 std::uint32_t label) {
  RecordedLoss rec;
  const ad::Var theta = tape.leaf(model.cache.keys);
  rec.leaves.push_back(theta);
  std::vector<ad::Var> weights;
  std::vector<ad::Var> attns;
  for (const auto& layer : model.graph.layers) {
    weights.push_back(tape.leaf(layer.weight));
    attns.push_back(tape.leaf(layer.attn));
    rec.leaves.push_back(weights.back());
    rec.leaves.push_back(attns.back());
  }
  const ad::Var gamma = tape.leaf(model.pooling.gamma);
  rec.leaves.push_back(gamma);
  std::vector<ad::Var> projections;
  for (const auto& w : model.pooling.projections) {
    projections.push_back(tape.leaf(w));
    rec.leaves.push_back(projections.back());
  }

  // Graph layers.
  ad::Var h = tape.constant(patches);
  for (std::size_t l = 0; l < model.graph.layers.size(); ++l) {
    const auto& layer = model.graph.layers[l];
    const ad::Var z = ad::matmul_bt(tape, h, weights[l]);
    ad::Var scores;
    switch (model.mode) {
      case AttentionMode::A1: scores = ad::pair_scores(tape, z, attns[l]); break;
      case AttentionMode::A2: scores = ad::matmul_bt(tape, z, z); break;
      case AttentionMode::Combined:
      case AttentionMode::SelfOnly:
        scores = ad::hadamard(tape, ad::pair_scores(tape, z, attns[l]),
                              ad::sigmoid(tape, ad::matmul_bt(tape, z, z)));
        break;
    }
    ad::Var activated = ad::leaky_relu(tape, scores, layer.negative_slope);
    if (model.mode == AttentionMode::SelfOnly) activated = ad::mask_offdiag(tape, activated);
    const ad::Var alpha = ad::row_softmax(tape, activated);
    h = ad::matmul(tape, alpha, z);
    if (layer.activation == Activation::Relu) h = ad::relu(tape, h);
  }

  // Multi-aggregation pooling.
  ad::Var pooled;
  for (std::size_t m = 0; m < model.pooling.aggregators.size(); ++m) {
    const ad::Var stat = ad::column_stat(tape, h, model.pooling.aggregators[m]);
    const ad::Var term = ad::scale_by(tape, ad::matmul_bt(tape, stat, projections[m]), gamma,
                                      static_cast<Eigen::Index>(m));
    pooled = (m == 0) ? term : ad::add(tape, pooled, term);
  }
  const ad::Var query = ad::l2_normalize_row(tape, pooled);

  // Cache and zero-shot streams.
  const ad::Var classifier = tape.constant(model.cache.classifier);
  ad::Var logits = ad::matmul_bt(tape, query, classifier);
  if (model.cache.alpha != 0.0) {
    const ad::Var values = tape.constant(model.cache.values);
    const ad::Var affinity =
        ad::exp_affinity(tape, ad::matmul_bt(tape, query, theta), model.cache.beta);
    const ad::Var cache_logits = ad::scale(tape, ad::matmul(tape, affinity, values), model.cache.alpha);
    logits = ad::add(tape, cache_logits, logits);
  }
  rec.loss = ad::cross_entropy(tape, logits, label);
  return rec;
}

void accumulate_gradients(const ad::Tape& tape, const RecordedLoss& recorded, ParamSet& params) {
  if (recorded.leaves.size() != params.size()) {
    throw Error(ErrorKind::DimMismatch, "recorded leaves do not match the parameter set");
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i].grad += tape.grad(recorded.leaves[i]);
}

}  // namespace prga
