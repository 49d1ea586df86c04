#include "prga/episodes.hpp"

#include <algorithm>
#include <numeric>

#include "prga/error.hpp"
#include "prga/format.hpp"
#include "prga/kernels.hpp"
#include "prga/rng.hpp"

namespace prga {

std::vector<std::size_t> Episode::support_items() const {
  std::vector<std::size_t> items;
  for (const auto& cls : support) items.insert(items.end(), cls.begin(), cls.end());
  return items;
}

Episode sample_episode(const EmbeddingBank& bank, std::uint32_t shots, std::uint64_t seed) {
  if (shots < 1) throw Error(ErrorKind::InvalidArgument, "shots must be >= 1");
  std::vector<std::vector<std::size_t>> by_class(bank.class_count());
  for (std::size_t i = 0; i < bank.item_count(); ++i) by_class[bank.labels[i]].push_back(i);

  Episode ep;
  ep.seed = seed;
  ep.shots = shots;
  SplitMix64 root(seed);
  std::vector<bool> in_support(bank.item_count(), false);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& items = by_class[c];
    if (items.size() <= shots) {
      throw Error(ErrorKind::InsufficientItems, "class " + std::to_string(c) + " has " +
                                                    std::to_string(items.size()) + " items, needs > " +
                                                    std::to_string(shots));
    }
    SplitMix64 stream = root.split();
    // Partial Fisher-Yates: the first `shots` slots become the sample.
    for (std::size_t k = 0; k < shots; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(stream.below(items.size() - k));
      std::swap(items[k], items[j]);
    }
    std::vector<std::size_t> chosen(items.begin(), items.begin() + shots);
    std::sort(chosen.begin(), chosen.end());
    for (const auto i : chosen) in_support[i] = true;
    ep.support.push_back(std::move(chosen));
  }
  for (std::size_t i = 0; i < bank.item_count(); ++i) {
    if (!in_support[i]) ep.query.push_back(i);
  }
  return ep;
}

double accuracy(std::span<const std::size_t> predictions, std::span<const std::uint32_t> labels) {
  if (predictions.size() != labels.size()) throw Error(ErrorKind::DimMismatch, "one prediction per label");
  if (predictions.empty()) throw Error(ErrorKind::EmptyInput, "accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i] ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(labels.size());
}

double evaluate_items(const Model& model, const EmbeddingBank& bank, std::span<const std::size_t> items,
                      KeySource source) {
  if (bank.dim != model.cache.dim() || bank.class_count() != static_cast<std::size_t>(model.cache.class_count())) {
    throw Error(ErrorKind::DimMismatch, "checkpoint is N=" + std::to_string(model.cache.class_count()) +
                                            " d=" + std::to_string(model.cache.dim()) + ", bank is N=" +
                                            std::to_string(bank.class_count()) + " d=" +
                                            std::to_string(bank.dim));
  }
  Eigen::MatrixXd queries(static_cast<Eigen::Index>(items.size()), bank.dim);
  std::vector<std::uint32_t> labels;
  labels.reserve(items.size());
  for (std::size_t q = 0; q < items.size(); ++q) {
    queries.row(static_cast<Eigen::Index>(q)) = bank.global_vector(items[q]).transpose();
    labels.push_back(bank.labels[items[q]]);
  }
  const Eigen::MatrixXd logits = kernels::infer_batch_parallel(queries, model.cache, source);
  std::vector<std::size_t> predictions;
  predictions.reserve(items.size());
  for (Eigen::Index q = 0; q < logits.rows(); ++q) predictions.push_back(predict(logits.row(q).transpose()));
  return accuracy(predictions, labels);
}

double evaluate(const Model& model, const EmbeddingBank& bank, const Episode& episode, KeySource source) {
  return evaluate_items(model, bank, episode.query, source);
}

double train_and_evaluate(const EmbeddingBank& bank, const ClassifierWeights& classifier,
                          const Episode& episode, const TrainConfig& config) {
  const auto support_items = episode.support_items();
  const EmbeddingBank support = bank.subset(support_items);
  const TrainResult trained = train(support, classifier, config);
  return evaluate(trained.model, bank, episode);
}

std::string GridResult::csv() const {
  std::string out = "alpha,beta,accuracy\n";
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    for (std::size_t j = 0; j < betas.size(); ++j) {
      out += format_double(alphas[i]) + ',' + format_double(betas[j]) + ',' +
             format_double(accuracy(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) + '\n';
    }
  }
  return out;
}

GridResult grid_search(const EmbeddingBank& bank, const ClassifierWeights& classifier,
                       const Episode& episode, const TrainConfig& config,
                       const std::vector<double>& alphas, const std::vector<double>& betas) {
  if (alphas.empty() || betas.empty()) throw Error(ErrorKind::InvalidArgument, "grid axes must be non-empty");
  GridResult grid;
  grid.alphas = alphas;
  grid.betas = betas;
  grid.accuracy.resize(static_cast<Eigen::Index>(alphas.size()), static_cast<Eigen::Index>(betas.size()));
  const std::size_t cells = alphas.size() * betas.size();
  kernels::parallel_for(cells, [&](std::size_t cell) {
    const std::size_t i = cell / betas.size();
    const std::size_t j = cell % betas.size();
    TrainConfig cfg = config;
    cfg.alpha = alphas[i];
    cfg.beta = betas[j];
    grid.accuracy(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
        train_and_evaluate(bank, classifier, episode, cfg);
  });
  Eigen::Index bi = 0;
  Eigen::Index bj = 0;
  // First maximum in alpha-major order.
  for (Eigen::Index i = 0; i < grid.accuracy.rows(); ++i) {
    for (Eigen::Index j = 0; j < grid.accuracy.cols(); ++j) {
      if (grid.accuracy(i, j) > grid.accuracy(bi, bj)) {
        bi = i;
        bj = j;
      }
    }
  }
  grid.best_alpha = static_cast<std::size_t>(bi);
  grid.best_beta = static_cast<std::size_t>(bj);
  return grid;
}

std::vector<AblationRow> ablate(const std::vector<AblationBank>& banks, const ClassifierWeights& classifier,
                                const TrainConfig& config, const std::vector<AttentionMode>& modes,
                                const std::vector<std::uint64_t>& seeds) {
  if (banks.empty() || modes.empty() || seeds.empty()) {
    throw Error(ErrorKind::InvalidArgument, "ablation needs banks, modes, and seeds");
  }
  std::vector<AblationRow> rows;
  for (const auto& b : banks) {
    for (const auto mode : modes) {
      AblationRow row;
      row.mode = mode;
      row.patches = b.patches;
      row.seeds = seeds;
      row.accuracy.assign(seeds.size(), 0.0);
      rows.push_back(std::move(row));
    }
  }
  const std::size_t cells = rows.size() * seeds.size();
  kernels::parallel_for(cells, [&](std::size_t cell) {
    const std::size_t r = cell / seeds.size();
    const std::size_t s = cell % seeds.size();
    const EmbeddingBank& bank = *banks[r / modes.size()].bank;
    TrainConfig cfg = config;
    cfg.mode = rows[r].mode;
    cfg.seed = seeds[s];
    const Episode episode = sample_episode(bank, static_cast<std::uint32_t>(cfg.shots), seeds[s]);
    rows[r].accuracy[s] = train_and_evaluate(bank, classifier, episode, cfg);
  });
  for (auto& row : rows) {
    row.mean = std::accumulate(row.accuracy.begin(), row.accuracy.end(), 0.0) /
               static_cast<double>(row.accuracy.size());
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,patches,seed,accuracy\n";
  for (const auto& row : rows) {
    const std::string prefix = std::string(to_string(row.mode)) + ',' + row.patches + ',';
    for (std::size_t s = 0; s < row.seeds.size(); ++s) {
      out += prefix + std::to_string(row.seeds[s]) + ',' + format_double(row.accuracy[s]) + '\n';
    }
    out += prefix + "mean," + format_double(row.mean) + '\n';
  }
  return out;
}

}  // namespace prga
