#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "prga/embank.hpp"
#include "prga/model.hpp"
#include "prga/train.hpp"

namespace prga {

// One seeded N-way K-shot split of a bank.
struct Episode {
  std::uint64_t seed = 0;
  std::uint32_t shots = 0;
  std::vector<std::vector<std::size_t>> support;  // per class, sorted item indices
  std::vector<std::size_t> query;                 // every other item, bank order

  std::size_t class_count() const { return support.size(); }
  // Support items class by class, the order the cache keys are built in.
  std::vector<std::size_t> support_items() const;
};

inline const std::vector<std::uint64_t> kProtocolSeeds = {0, 1, 2};

// Per class (in label order) a child stream of SplitMix64(seed) draws
// `shots` items uniformly without replacement. Needs > shots items per class.
Episode sample_episode(const EmbeddingBank& bank, std::uint32_t shots, std::uint64_t seed);

// Percent of positions where predictions match labels.
double accuracy(std::span<const std::size_t> predictions, std::span<const std::uint32_t> labels);

// Query accuracy using global embeddings only; the graph is not evaluated.
double evaluate_items(const Model& model, const EmbeddingBank& bank, std::span<const std::size_t> items,
                      KeySource source = KeySource::Refined);
double evaluate(const Model& model, const EmbeddingBank& bank, const Episode& episode,
                KeySource source = KeySource::Refined);

// Trains on the episode's support items and scores its queries.
double train_and_evaluate(const EmbeddingBank& bank, const ClassifierWeights& classifier,
                          const Episode& episode, const TrainConfig& config);

struct GridResult {
  std::vector<double> alphas;
  std::vector<double> betas;
  Eigen::MatrixXd accuracy;  // |alphas| x |betas|, percent
  std::size_t best_alpha = 0;
  std::size_t best_beta = 0;

  // "alpha,beta,accuracy", alpha-major.
  std::string csv() const;
};

// One training run per (alpha, beta) cell with config.seed; beta is used for
// both training and inference. Cells run in parallel.
GridResult grid_search(const EmbeddingBank& bank, const ClassifierWeights& classifier,
                       const Episode& episode, const TrainConfig& config,
                       const std::vector<double>& alphas, const std::vector<double>& betas);

struct AblationBank {
  std::string patches;  // label for the tiling, e.g. "26"
  const EmbeddingBank* bank = nullptr;
};

struct AblationRow {
  AttentionMode mode = AttentionMode::Combined;
  std::string patches;
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracy;  // per seed
  double mean = 0.0;
};

// For every bank and mode: per seed, sample the episode with that seed,
// train with that seed, evaluate. Rows follow bank order, then mode order.
std::vector<AblationRow> ablate(const std::vector<AblationBank>& banks, const ClassifierWeights& classifier,
                                const TrainConfig& config, const std::vector<AttentionMode>& modes,
                                const std::vector<std::uint64_t>& seeds = kProtocolSeeds);

// "variant,patches,seed,accuracy": one line per seed plus a "mean" line.
std::string ablation_csv(const std::vector<AblationRow>& rows);

inline const std::vector<AttentionMode> kAllModes = {AttentionMode::A1, AttentionMode::A2,
                                                     AttentionMode::Combined, AttentionMode::SelfOnly};

}  // namespace prga
