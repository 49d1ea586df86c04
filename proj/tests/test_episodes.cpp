#include <doctest.h>

#include <algorithm>
#include <set>

#include "fixtures.hpp"
#include "prga/episodes.hpp"
#include "prga/error.hpp"
#include "prga/synth.hpp"

using namespace prga;

namespace {

EmbeddingBank ten_per_class(std::uint64_t seed) {
  SplitMix64 rng(seed);
  EmbeddingBank b = fixtures::random_bank(rng, 30, 3, 4, 2);
  for (std::uint32_t i = 0; i < 30; ++i) b.labels[i] = i % 3;
  return b;
}

// planted task small enough for quick training runs
PlantedTask small_task() {
  PlantedTaskSpec spec;
  spec.per_class = 10;
  return make_planted_task(spec);
}

}  // namespace

TEST_CASE("episode support and query are disjoint and cover the bank") {
  const EmbeddingBank bank = ten_per_class(1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Episode ep = sample_episode(bank, 4, seed);
    REQUIRE(ep.class_count() == 3);
    std::set<std::size_t> seen;
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(ep.support[c].size() == 4);
      CHECK(std::is_sorted(ep.support[c].begin(), ep.support[c].end()));
      for (const auto i : ep.support[c]) {
        CHECK(bank.labels[i] == c);
        CHECK(seen.insert(i).second);
      }
    }
    for (const auto i : ep.query) CHECK(seen.insert(i).second);
    CHECK(seen.size() == bank.item_count());
    CHECK(std::is_sorted(ep.query.begin(), ep.query.end()));
  }
}

TEST_CASE("episodes are seeded") {
  const EmbeddingBank bank = ten_per_class(2);
  const Episode a = sample_episode(bank, 3, 5);
  const Episode b = sample_episode(bank, 3, 5);
  CHECK(a.support == b.support);
  CHECK(a.query == b.query);
  bool differs = false;
  for (std::uint64_t s = 0; s < 5; ++s) differs |= sample_episode(bank, 3, s).support != a.support;
  CHECK(differs);
}

TEST_CASE("all but one shot leaves one query per class") {
  const EmbeddingBank bank = ten_per_class(3);
  const Episode ep = sample_episode(bank, 9, 0);
  REQUIRE(ep.query.size() == 3);
  std::set<std::uint32_t> labels;
  for (const auto i : ep.query) labels.insert(bank.labels[i]);
  CHECK(labels.size() == 3);
}

TEST_CASE("too few items for the shot count") {
  const EmbeddingBank bank = ten_per_class(4);
  try {
    sample_episode(bank, 10, 0);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientItems);
  }
  CHECK_THROWS_AS(sample_episode(bank, 0, 0), Error);
}

TEST_CASE("accuracy") {
  const std::vector<std::size_t> always_zero(4, 0);
  const std::vector<std::uint32_t> labels = {0, 1, 0, 1};
  CHECK(accuracy(always_zero, labels) == 50.0);
  CHECK_THROWS_AS(accuracy(std::vector<std::size_t>{}, std::vector<std::uint32_t>{}), Error);
  CHECK_THROWS_AS(accuracy(always_zero, std::vector<std::uint32_t>{0}), Error);
}

TEST_CASE("identity keys with no zero-shot term retrieve every support item") {
  EmbeddingBank bank;
  bank.dim = 3;
  bank.patches_per_item = 1;
  bank.class_names = {"a", "b", "c"};
  bank.labels = {0, 1, 2};
  bank.globals = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  bank.patches = bank.globals;
  Model m;
  m.cache = build_cache(Eigen::MatrixXd::Identity(3, 3), bank.labels, 3, Eigen::MatrixXd::Zero(3, 3), 1.0, 1.0);
  const std::vector<std::size_t> all = {0, 1, 2};
  CHECK(evaluate_items(m, bank, all) == 100.0);
}

TEST_CASE("evaluation does not depend on query order") {
  const PlantedTask task = small_task();
  const Episode ep = sample_episode(task.bank, 4, 0);
  TrainConfig cfg;
  cfg.epochs = 3;
  const Model m = train(task.bank.subset(ep.support_items()), task.classifier, cfg).model;
  std::vector<std::size_t> reversed(ep.query.rbegin(), ep.query.rend());
  CHECK(evaluate_items(m, task.bank, reversed) == evaluate(m, task.bank, ep));
}

TEST_CASE("evaluation refuses a mismatched bank") {
  const PlantedTask task = small_task();
  const Episode ep = sample_episode(task.bank, 4, 0);
  TrainConfig cfg;
  cfg.epochs = 1;
  const Model m = train(task.bank.subset(ep.support_items()), task.classifier, cfg).model;
  SplitMix64 rng(5);
  const EmbeddingBank other = fixtures::random_bank(rng, 10, 2, 5, 8);
  CHECK_THROWS_AS(evaluate_items(m, other, std::vector<std::size_t>{0}), Error);
}

TEST_CASE("a 1x1 grid equals a single train and evaluate") {
  const PlantedTask task = small_task();
  const Episode ep = sample_episode(task.bank, 4, 1);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.alpha = 0.7;
  cfg.beta = 2.5;
  const GridResult g = grid_search(task.bank, task.classifier, ep, cfg, {0.7}, {2.5});
  CHECK(g.accuracy(0, 0) == train_and_evaluate(task.bank, task.classifier, ep, cfg));
}

TEST_CASE("grid: the alpha = 0 row is the zero-shot accuracy for every beta") {
  const PlantedTask task = small_task();
  const Episode ep = sample_episode(task.bank, 4, 2);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.lr0 = 0.01;
  const std::vector<double> alphas = {0.0, 1.0, 3.0};
  const std::vector<double> betas = {0.5, 1.0, 5.5};
  const GridResult g = grid_search(task.bank, task.classifier, ep, cfg, alphas, betas);
  REQUIRE(g.accuracy.rows() == 3);
  REQUIRE(g.accuracy.cols() == 3);
  for (Eigen::Index j = 1; j < 3; ++j) CHECK(std::abs(g.accuracy(0, j) - g.accuracy(0, 0)) <= 1e-9);
  CHECK(g.accuracy(g.best_alpha, g.best_beta) == g.accuracy.maxCoeff());

  const std::string csv = g.csv();
  CHECK(csv.rfind("alpha,beta,accuracy\n0,0.5,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
}

TEST_CASE("ablation rows: per-seed accuracy, exact means, deterministic") {
  const PlantedTask task = small_task();
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.lr0 = 0.01;
  const std::vector<AblationBank> banks = {{"8", &task.bank}};
  const auto rows = ablate(banks, task.classifier, cfg, kAllModes);
  REQUIRE(rows.size() == 4);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    CHECK(rows[r].mode == kAllModes[r]);
    CHECK(rows[r].patches == "8");
    REQUIRE(rows[r].accuracy.size() == 3);
    CHECK(rows[r].mean == (rows[r].accuracy[0] + rows[r].accuracy[1] + rows[r].accuracy[2]) / 3.0);
  }
  // row 0 is A1: the same run as a direct call
  TrainConfig a1 = cfg;
  a1.mode = AttentionMode::A1;
  a1.seed = 1;
  CHECK(rows[0].accuracy[1] == train_and_evaluate(task.bank, task.classifier, sample_episode(task.bank, 4, 1), a1));

  const auto again = ablate(banks, task.classifier, cfg, kAllModes);
  for (std::size_t r = 0; r < rows.size(); ++r) CHECK(again[r].accuracy == rows[r].accuracy);

  const std::string csv = ablation_csv(rows);
  CHECK(csv.rfind("variant,patches,seed,accuracy\na1,8,0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4 * 4);
  CHECK(csv.find("\na1,8,mean,") != std::string::npos);
}

TEST_CASE("ablation with nothing to do") {
  const PlantedTask task = small_task();
  CHECK_THROWS_AS(ablate({}, task.classifier, TrainConfig{}, kAllModes), Error);
}
