#include "prga/train.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "prga/error.hpp"
#include "prga/format.hpp"
#include "prga/rng.hpp"

namespace prga {

void TrainConfig::validate() const {
  if (!(lr0 >= 0.0) || !std::isfinite(lr0)) throw Error(ErrorKind::InvalidArgument, "lr0 must be >= 0");
  if (epochs < 1) throw Error(ErrorKind::InvalidArgument, "epochs must be >= 1");
  if (!(alpha >= 0.0) || !(beta > 0.0)) throw Error(ErrorKind::InvalidArgument, "need alpha >= 0, beta > 0");
  if (aggregators.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one aggregator");
  if (layers < 1 || hidden < 0) throw Error(ErrorKind::InvalidArgument, "need layers >= 1, hidden >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "adam betas must lie in [0, 1)");
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"lr0", c.lr0},
                     {"epochs", c.epochs},
                     {"weight_decay", c.weight_decay},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_eps", c.adam_eps},
                     {"seed", c.seed},
                     {"shots", c.shots},
                     {"alpha", c.alpha},
                     {"beta", c.beta},
                     {"mode", std::string(to_string(c.mode))},
                     {"aggregators", join_aggregators(c.aggregators)},
                     {"layers", c.layers},
                     {"hidden", c.hidden}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("lr0", c.lr0);
  get("epochs", c.epochs);
  get("weight_decay", c.weight_decay);
  get("adam_beta1", c.adam_beta1);
  get("adam_beta2", c.adam_beta2);
  get("adam_eps", c.adam_eps);
  get("seed", c.seed);
  get("shots", c.shots);
  get("alpha", c.alpha);
  get("beta", c.beta);
  get("layers", c.layers);
  get("hidden", c.hidden);
  if (j.contains("mode")) c.mode = parse_attention_mode(j.at("mode").get<std::string>());
  if (j.contains("aggregators")) {
    const auto& a = j.at("aggregators");
    if (a.is_string()) {
      c.aggregators = parse_aggregators(a.get<std::string>());
    } else {
      c.aggregators.clear();
      for (const auto& name : a) c.aggregators.push_back(parse_aggregator(name.get<std::string>()));
    }
  }
}

Model init_model(const EmbeddingBank& support, const ClassifierWeights& classifier,
                 const TrainConfig& config) {
  config.validate();
  support.validate();
  classifier.validate();
  if (classifier.classes != support.class_count() || classifier.dim != support.dim) {
    throw Error(ErrorKind::DimMismatch, "classifier is " + std::to_string(classifier.classes) + "x" +
                                            std::to_string(classifier.dim) + ", bank has N=" +
                                            std::to_string(support.class_count()) +
                                            " d=" + std::to_string(support.dim));
  }
  const Eigen::Index d = support.dim;
  const Eigen::Index width = config.hidden > 0 ? config.hidden : d;

  SplitMix64 root(config.seed);
  SplitMix64 graph_rng = root.split();
  SplitMix64 pool_rng = root.split();

  std::vector<Eigen::Index> widths{d};
  for (int l = 0; l < config.layers; ++l) widths.push_back(width);

  Eigen::MatrixXd globals(static_cast<Eigen::Index>(support.item_count()), d);
  for (std::size_t i = 0; i < support.item_count(); ++i) {
    globals.row(static_cast<Eigen::Index>(i)) = support.global_vector(i).transpose();
  }

  Model model;
  model.mode = config.mode;
  model.graph = init_graph_params(widths, graph_rng);
  model.pooling = init_pooling_params(config.aggregators, width, d, pool_rng);
  model.cache = build_cache(globals, support.labels, static_cast<Eigen::Index>(support.class_count()),
                            classifier.matrix(), config.alpha, config.beta);
  round_to_f32(model);
  model.validate();
  return model;
}

TrainResult train(const EmbeddingBank& support, const ClassifierWeights& classifier,
                  const TrainConfig& config) {
  TrainResult result;
  result.model = init_model(support, classifier, config);
  Model& model = result.model;

  // Stream 0 and 1 were consumed by init_model; stream 2 drives the order.
  SplitMix64 root(config.seed);
  root.split();
  root.split();
  SplitMix64 order_rng = root.split();

  ParamSet params = collect_params(model);
  AdamW optimizer(params, AdamWConfig{config.adam_beta1, config.adam_beta2, config.adam_eps,
                                      config.weight_decay});

  std::vector<std::size_t> order(support.item_count());
  std::vector<Eigen::MatrixXd> patches;
  patches.reserve(support.item_count());
  for (std::size_t i = 0; i < support.item_count(); ++i) patches.push_back(support.patch_matrix(i));

  ad::Tape tape;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, config.lr0, config.epochs);
    std::iota(order.begin(), order.end(), std::size_t{0});
    order_rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (const std::size_t item : order) {
      tape.clear();
      params.zero_grad();
      const RecordedLoss rec = record_support_loss(tape, model, patches[item], support.labels[item]);
      const double loss = tape.value(rec.loss)(0, 0);
      if (!std::isfinite(loss)) {
        throw Error(ErrorKind::NonFiniteLoss, "epoch " + std::to_string(epoch) + " item " +
                                                  std::to_string(item));
      }
      tape.backward(rec.loss);
      accumulate_gradients(tape, rec, params);
      optimizer.step(params, lr);
      total += loss;
    }
    result.log.push_back({epoch, total / static_cast<double>(support.item_count()), lr});
  }

  round_to_f32(model);
  return result;
}

double mean_support_loss(const Model& model, const EmbeddingBank& support) {
  double total = 0.0;
  for (std::size_t i = 0; i < support.item_count(); ++i) {
    total += support_loss(model, support.patch_matrix(i), support.labels[i]);
  }
  return total / static_cast<double>(support.item_count());
}

std::string loss_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,loss,lr\n";
  for (const auto& row : log) {
    out += std::to_string(row.epoch) + ',' + format_double(row.loss) + ',' + format_double(row.lr) + '\n';
  }
  return out;
}

}  // namespace prga
