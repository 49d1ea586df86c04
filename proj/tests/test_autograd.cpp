#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "oracle.hpp"
#include "prga/autograd.hpp"
#include "prga/error.hpp"
#include "prga/gradcheck.hpp"
#include "prga/optim.hpp"
#include "prga/rng.hpp"

using namespace prga;

namespace {

Eigen::MatrixXd random_matrix(SplitMix64& rng, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

// Builds a scalar from one leaf; checks tape gradient against central
// differences of the same graph rebuilt on a fresh tape.
using Graph = std::function<ad::Var(ad::Tape&, ad::Var)>;

double tape_value(const Graph& g, const Eigen::MatrixXd& x) {
  ad::Tape t;
  return t.value(g(t, t.leaf(x)))(0, 0);
}

double max_rel_error(const Graph& g, const Eigen::MatrixXd& x) {
  ad::Tape t;
  const ad::Var leaf = t.leaf(x);
  t.backward(g(t, leaf));
  const Eigen::MatrixXd grad = t.grad(leaf);
  double worst = 0.0;
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      Eigen::MatrixXd up = x, down = x;
      up(i, j) += h;
      down(i, j) -= h;
      const double numeric = (tape_value(g, up) - tape_value(g, down)) / (2 * h);
      const double err = std::abs(numeric - grad(i, j));
      const double scale = std::max(std::abs(numeric), std::abs(grad(i, j)));
      if (err >= 1e-7) worst = std::max(worst, err / scale);
    }
  }
  return worst;
}

// Reduces a matrix node to a scalar with fixed random weights.
ad::Var weighted_sum(ad::Tape& t, ad::Var m, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const Eigen::Index rows = t.value(m).rows(), cols = t.value(m).cols();
  const ad::Var w = t.constant(random_matrix(rng, rows, cols));
  const ad::Var prod = ad::hadamard(t, m, w);
  const ad::Var ones_r = t.constant(Eigen::MatrixXd::Ones(1, rows));
  const ad::Var ones_c = t.constant(Eigen::MatrixXd::Ones(cols, 1));
  return ad::matmul(t, ad::matmul(t, ones_r, prod), ones_c);
}

}  // namespace

TEST_CASE("cross entropy values") {
  CHECK(cross_entropy(Eigen::Vector4d::Constant(0.3), 2) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  // log(1 + exp(-20)) = 2.0611536181902037e-9
  CHECK(cross_entropy(Eigen::Vector2d(10.0, -10.0), 0) == doctest::Approx(2.0611536181902037e-9).epsilon(1e-12));
  SplitMix64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd l = 3.0 * random_matrix(rng, 4, 1).col(0);
    const double c = rng.uniform(-50.0, 50.0);
    CHECK(std::abs(cross_entropy(l, 1) - cross_entropy((l.array() + c).matrix(), 1)) <= 1e-9);
  }
  CHECK_THROWS_AS(cross_entropy(Eigen::Vector2d(1.0, 2.0), 2), Error);
}

TEST_CASE("tape cross entropy matches the plain one") {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd l = random_matrix(rng, 1, 3);
    ad::Tape t;
    const ad::Var loss = ad::cross_entropy(t, t.leaf(l), 1);
    CHECK(t.value(loss)(0, 0) == doctest::Approx(cross_entropy(l.row(0).transpose(), 1)).epsilon(1e-14));
  }
}

TEST_CASE("linear layer + cross entropy gradient is (softmax - onehot) outer input") {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd x = random_matrix(rng, 1, 3);
    const Eigen::MatrixXd w = random_matrix(rng, 2, 3);
    const std::size_t label = trial % 2;
    ad::Tape t;
    const ad::Var wv = t.leaf(w);
    const ad::Var logits = ad::matmul_bt(t, t.constant(x), wv);
    t.backward(ad::cross_entropy(t, logits, label));

    const Eigen::VectorXd z = w * x.transpose();
    Eigen::VectorXd p = (z.array() - z.maxCoeff()).exp();
    p /= p.sum();
    p(static_cast<Eigen::Index>(label)) -= 1.0;
    const Eigen::MatrixXd expect = p * x;
    CHECK((t.grad(wv) - expect).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("unused leaf gets an exactly zero gradient") {
  ad::Tape t;
  const ad::Var used = t.leaf(Eigen::MatrixXd::Constant(1, 2, 0.5));
  const ad::Var unused = t.leaf(Eigen::MatrixXd::Constant(3, 3, 2.0));
  t.backward(ad::cross_entropy(t, used, 0));
  CHECK(t.grad(unused) == Eigen::MatrixXd::Zero(3, 3));
}

TEST_CASE("constants receive no gradient") {
  ad::Tape t;
  const ad::Var c = t.constant(Eigen::MatrixXd::Constant(1, 2, 0.5));
  const ad::Var w = t.leaf(Eigen::MatrixXd::Identity(2, 2));
  t.backward(ad::cross_entropy(t, ad::matmul(t, c, w), 0));
  CHECK_FALSE(t.needs_grad(c));
  CHECK(t.grad(c).isZero());
}

TEST_CASE("backward needs a scalar loss recorded on this tape") {
  ad::Tape t;
  const ad::Var m = t.leaf(Eigen::MatrixXd::Ones(2, 2));
  try {
    t.backward(m);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::GraphNotRecorded);
  }
  CHECK_THROWS_AS(t.backward(ad::Var{}), Error);
}

TEST_CASE("every tape operation agrees with central differences") {
  SplitMix64 rng(4);
  const Eigen::MatrixXd b = random_matrix(rng, 3, 4);
  const Eigen::MatrixXd attn = random_matrix(rng, 6, 1);
  std::vector<std::pair<std::string, Graph>> ops = {
      {"matmul", [&](ad::Tape& t, ad::Var x) { return weighted_sum(t, ad::matmul(t, x, t.constant(b)), 1); }},
      {"matmul_bt", [&](ad::Tape& t, ad::Var x) { return weighted_sum(t, ad::matmul_bt(t, x, x), 2); }},
      {"add", [&](ad::Tape& t, ad::Var x) { return weighted_sum(t, ad::add(t, x, ad::hadamard(t, x, x)), 3); }},
      {"scale", [&](ad::Tape& t, ad::Var x) { return weighted_sum(t, ad::scale(t, x, -1.7), 4); }},
      {"sigmoid", [&](ad::Tape& t, ad::Var x) { return weighted_sum(t, ad::sigmoid(t, x), 5); }},
      {"relu", [&](ad::Tape& t, ad::Var x) { return weighted_sum(t, ad::relu(t, x), 6); }},
      {"leaky_relu", [&](ad::Tape& t, ad::Var x) { return weighted_sum(t, ad::leaky_relu(t, x, 0.2), 7); }},
      {"pair_scores", [&](ad::Tape& t, ad::Var x) { return weighted_sum(t, ad::pair_scores(t, x, t.constant(attn)), 8); }},
      {"row_softmax", [&](ad::Tape& t, ad::Var x) { return weighted_sum(t, ad::row_softmax(t, x), 9); }},
      {"masked softmax", [&](ad::Tape& t, ad::Var x) {
         return weighted_sum(t, ad::row_softmax(t, ad::mask_offdiag(t, ad::matmul_bt(t, x, x))), 10);
       }},
      {"mean", [&](ad::Tape& t, ad::Var x) { return weighted_sum(t, ad::column_stat(t, x, Aggregator::Mean), 11); }},
      {"max", [&](ad::Tape& t, ad::Var x) { return weighted_sum(t, ad::column_stat(t, x, Aggregator::Max), 12); }},
      {"min", [&](ad::Tape& t, ad::Var x) { return weighted_sum(t, ad::column_stat(t, x, Aggregator::Min), 13); }},
      {"std", [&](ad::Tape& t, ad::Var x) { return weighted_sum(t, ad::column_stat(t, x, Aggregator::Std), 14); }},
      {"l2 row", [&](ad::Tape& t, ad::Var x) {
         return weighted_sum(t, ad::l2_normalize_row(t, ad::column_stat(t, x, Aggregator::Mean)), 15);
       }},
      {"exp affinity", [&](ad::Tape& t, ad::Var x) { return weighted_sum(t, ad::exp_affinity(t, x, 2.5), 16); }},
      {"scale_by", [&](ad::Tape& t, ad::Var x) {
         const ad::Var s = ad::matmul(t, x, t.constant(Eigen::MatrixXd::Ones(3, 1)));
         return weighted_sum(t, ad::scale_by(t, x, s, 1), 17);
       }},
      {"cross entropy", [&](ad::Tape& t, ad::Var x) {
         return ad::cross_entropy(t, ad::column_stat(t, x, Aggregator::Mean), 2);
       }},
  };
  for (const auto& [name, graph] : ops) {
    CAPTURE(name);
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::MatrixXd x = random_matrix(rng, 4, 3);
      CHECK(max_rel_error(graph, x) < 1e-4);
    }
  }
}

TEST_CASE("std over coincident rows has a zero gradient") {
  // rows equal up to rounding, as additive attention produces
  Eigen::MatrixXd x(3, 2);
  x << 0.1 + 0.2, -0.7, 0.3, -0.7, 0.30000000000000004, -0.7;
  ad::Tape t;
  const ad::Var leaf = t.leaf(x);
  const ad::Var sd = ad::column_stat(t, leaf, Aggregator::Std);
  t.backward(ad::cross_entropy(t, sd, 0));
  CHECK(t.value(sd).maxCoeff() < 1e-15);
  CHECK(t.grad(leaf).isZero());
}

TEST_CASE("max routes a tie to the first row") {
  ad::Tape t;
  Eigen::MatrixXd x(3, 1);
  x << 2.0, 2.0, 1.0;
  const ad::Var leaf = t.leaf(x);
  t.backward(ad::cross_entropy(t, ad::matmul_bt(t, ad::column_stat(t, leaf, Aggregator::Max),
                                                t.constant(Eigen::MatrixXd::Constant(2, 1, 1.0))), 0));
  CHECK(t.grad(leaf)(1, 0) == 0.0);
  CHECK(t.grad(leaf)(2, 0) == 0.0);
}

TEST_CASE("full pipeline, P=3 d=4 N=2 K=1") {
  SplitMix64 rng(5);
  for (const AttentionMode mode : {AttentionMode::A1, AttentionMode::A2, AttentionMode::Combined,
                                   AttentionMode::SelfOnly}) {
    GradcheckCase c;
    c.patches = random_matrix(rng, 3, 4);
    c.model.mode = mode;
    c.model.graph = init_graph_params({4, 4}, rng);
    c.model.graph.layers[0].attn = random_matrix(rng, 8, 1).col(0);
    c.model.pooling = init_pooling_params(kDefaultAggregators, 4, 4, rng);
    const std::vector<std::uint32_t> labels = {0, 1};
    c.model.cache = build_cache(random_matrix(rng, 2, 4), labels, 2, random_matrix(rng, 2, 4), 1.0, 2.0);
    c.label = 1;
    const GradcheckReport r = gradcheck(c);
    CAPTURE(to_string(mode));
    CAPTURE(r.worst);
    CAPTURE(r.max_abs_error);
    CHECK(r.passed());
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("training gradients skip W_c, one-hot values, and inputs") {
  SplitMix64 rng(6);
  GradcheckCase c = random_gradcheck_case(rng, AttentionMode::Combined, kDefaultAggregators);
  const CacheModel before = c.model.cache;
  const Eigen::MatrixXd patches = c.patches;
  ParamSet params = collect_params(c.model);
  for (const auto& t : params) {
    CHECK(t.data != c.model.cache.classifier.data());
    CHECK(t.data != c.model.cache.values.data());
    CHECK(t.data != c.model.cache.initial_keys.data());
  }
  AdamW opt(params, {});
  for (int step = 0; step < 3; ++step) {
    params.zero_grad();
    ad::Tape tape;
    const RecordedLoss rec = record_support_loss(tape, c.model, c.patches, c.label);
    tape.backward(rec.loss);
    accumulate_gradients(tape, rec, params);
    opt.step(params, 0.1);
  }
  CHECK(c.model.cache.keys != before.keys);
  CHECK(c.model.cache.classifier == before.classifier);
  CHECK(c.model.cache.values == before.values);
  CHECK(c.model.cache.initial_keys == before.initial_keys);
  CHECK(c.patches == patches);
}

TEST_CASE("AdamW: lr = 0 changes nothing bitwise") {
  SplitMix64 rng(7);
  Eigen::MatrixXd theta = random_matrix(rng, 3, 4).rowwise().normalized();
  Eigen::VectorXd gamma = random_matrix(rng, 3, 1).col(0);
  const Eigen::MatrixXd theta0 = theta;
  const Eigen::VectorXd gamma0 = gamma;
  ParamSet params;
  params.add("theta", theta, true);
  params.add("gamma", gamma);
  AdamW opt(params, {});
  for (int step = 0; step < 5; ++step) {
    for (auto& t : params) t.grad = random_matrix(rng, t.rows, t.cols);
    opt.step(params, 0.0);
  }
  CHECK(theta == theta0);
  CHECK(gamma == gamma0);
}

TEST_CASE("AdamW: first step moves by lr against the gradient sign") {
  for (const double g : {3.0, -0.02, 1e-3}) {
    Eigen::VectorXd x(1);
    x << 0.5;
    ParamSet params;
    params.add("x", x);
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    cfg.eps = 1e-12;
    AdamW opt(params, cfg);
    params[0].grad(0, 0) = g;
    opt.step(params, 1e-3);
    CHECK(x(0) - 0.5 == doctest::Approx(-1e-3 * (g > 0 ? 1.0 : -1.0)).epsilon(1e-6));
  }
}

TEST_CASE("AdamW: moments decay geometrically under zero gradients") {
  Eigen::VectorXd x(2);
  x << 1.0, -1.0;
  ParamSet params;
  params.add("x", x);
  AdamW opt(params, {});
  params[0].grad << 0.4, -2.0;
  opt.step(params, 1e-3);
  const Eigen::MatrixXd m1 = opt.first_moment(0);
  const Eigen::MatrixXd v1 = opt.second_moment(0);
  CHECK(m1(0, 0) == doctest::Approx(0.1 * 0.4).epsilon(1e-15));
  CHECK(v1(1, 0) == doctest::Approx(0.001 * 4.0).epsilon(1e-15));
  params.zero_grad();
  opt.step(params, 1e-3);
  opt.step(params, 1e-3);
  CHECK((opt.first_moment(0) - 0.81 * m1).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((opt.second_moment(0) - 0.999 * 0.999 * v1).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("AdamW: decoupled weight decay without gradient") {
  Eigen::VectorXd x(1);
  x << 2.0;
  ParamSet params;
  params.add("x", x);
  AdamWConfig cfg;
  cfg.weight_decay = 0.1;
  AdamW opt(params, cfg);
  params.zero_grad();
  opt.step(params, 0.5);
  CHECK(x(0) == doctest::Approx(2.0 * (1.0 - 0.05)).epsilon(1e-15));
}

TEST_CASE("AdamW: one small step lowers a convex quadratic") {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd a = random_matrix(rng, 4, 4);
    const Eigen::MatrixXd q = a * a.transpose() + Eigen::MatrixXd::Identity(4, 4);
    const Eigen::VectorXd target = random_matrix(rng, 4, 1).col(0);
    Eigen::VectorXd x = random_matrix(rng, 4, 1).col(0);
    auto f = [&](const Eigen::VectorXd& v) { return 0.5 * (v - target).dot(q * (v - target)); };
    const double before = f(x);
    ParamSet params;
    params.add("x", x);
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    AdamW opt(params, cfg);
    params[0].grad = q * (x - target);
    opt.step(params, 1e-3);
    CHECK(f(x) < before);
  }
}

TEST_CASE("AdamW keeps unit rows unit") {
  SplitMix64 rng(9);
  Eigen::MatrixXd theta = random_matrix(rng, 5, 3).rowwise().normalized();
  ParamSet params;
  params.add("theta", theta, true);
  AdamW opt(params, {});
  for (int step = 0; step < 10; ++step) {
    params[0].grad = random_matrix(rng, 5, 3);
    opt.step(params, 0.05);
    CHECK((theta.rowwise().norm().array() - 1.0).abs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("cosine schedule endpoints") {
  CHECK(cosine_lr(0, 1e-3, 100) == 1e-3);
  CHECK(cosine_lr(100, 1e-3, 100) == 0.0);
  CHECK(cosine_lr(50, 1e-3, 100) == doctest::Approx(5e-4).epsilon(1e-14));
  double prev = cosine_lr(0, 1.0, 37);
  for (int t = 1; t <= 37; ++t) {
    const double lr = cosine_lr(t, 1.0, 37);
    CHECK(lr <= prev);
    prev = lr;
  }
}
