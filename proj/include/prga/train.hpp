#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "prga/embank.hpp"
#include "prga/graphattn.hpp"
#include "prga/model.hpp"
#include "prga/pooling.hpp"

namespace prga {

struct TrainConfig {
  double lr0 = 1e-3;
  int epochs = 100;
  double weight_decay = 1e-2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  int shots = 4;
  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;
  AttentionMode mode = AttentionMode::Combined;
  std::vector<Aggregator> aggregators = kDefaultAggregators;
  int layers = 1;
  int hidden = 0;  // graph width; 0 means the embedding width d

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;  // mean over the epoch's support items
  double lr = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
};

// Fresh model for a support bank: Theta_0 = normalized support globals,
// graph and pooling initialized from the config seed. Parameters start
// f32-representable, matching the checkpoint payload.
Model init_model(const EmbeddingBank& support, const ClassifierWeights& classifier,
                 const TrainConfig& config);

// Seeded SGD over the support items (one image per step), AdamW with a
// per-epoch cosine schedule. Final parameters are rounded to f32 so the
// returned model equals what a checkpoint reload yields.
TrainResult train(const EmbeddingBank& support, const ClassifierWeights& classifier,
                  const TrainConfig& config);

// Mean support_loss over every item of the bank.
double mean_support_loss(const Model& model, const EmbeddingBank& support);

// "epoch,loss,lr" with a header row.
std::string loss_csv(const std::vector<EpochLog>& log);

}  // namespace prga
