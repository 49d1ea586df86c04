#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "prga/autograd.hpp"
#include "prga/cache.hpp"
#include "prga/graphattn.hpp"
#include "prga/optim.hpp"
#include "prga/pooling.hpp"

namespace prga {

// Everything a checkpoint holds.
struct Model {
  AttentionMode mode = AttentionMode::Combined;
  GraphParams graph;
  PoolingParams pooling;
  CacheModel cache;

  void validate() const;
};

// Rounds every stored real to the nearest f32, the checkpoint precision.
void round_to_f32(Model& model);

// Learnable tensors in a fixed order: theta, graph.<l>.weight,
// graph.<l>.attn, pool.gamma, pool.<m>.proj. W_c and the one-hot values are
// not included and never receive gradients.
ParamSet collect_params(Model& model);

// Graph -> pooling -> L2 normalize. Used on support images during training.
Eigen::VectorXd refine_embedding(const Model& model, const Eigen::MatrixXd& patches);

// Cross-entropy of the training logits for one support image, evaluated
// without the tape.
double support_loss(const Model& model, const Eigen::MatrixXd& patches, std::uint32_t label);

struct RecordedLoss {
  ad::Var loss;
  std::vector<ad::Var> leaves;  // same order as collect_params
};

// Records the training loss on the tape with every learnable tensor as a leaf.
RecordedLoss record_support_loss(ad::Tape& tape, const Model& model, const Eigen::MatrixXd& patches,
                                 std::uint32_t label);

// Adds the tape gradients of the recorded leaves into the parameter buffers.
void accumulate_gradients(const ad::Tape& tape, const RecordedLoss& recorded, ParamSet& params);

}  // namespace prga
