#include "prga/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "prga/autograd.hpp"
#include "prga/embank.hpp"
#include "prga/episodes.hpp"

namespace prga {

namespace {

Eigen::MatrixXd gaussian(SplitMix64& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

int uniform_int(SplitMix64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

}  // namespace

GradcheckCase random_gradcheck_case(SplitMix64& rng, AttentionMode mode,
                                    const std::vector<Aggregator>& aggregators) {
  const int classes = uniform_int(rng, 2, 3);
  const int shots = uniform_int(rng, 1, 2);
  const Eigen::Index d = uniform_int(rng, 2, 4);
  const Eigen::Index p = uniform_int(rng, 2, 4);

  GradcheckCase c;
  c.patches = gaussian(rng, p, d, 1.0);
  c.label = static_cast<std::uint32_t>(rng.below(static_cast<std::uint64_t>(classes)));

  Model& m = c.model;
  m.mode = mode;
  m.graph = init_graph_params({d, d}, rng);
  for (auto& layer : m.graph.layers) {
    layer.weight += gaussian(rng, layer.weight.rows(), layer.weight.cols(), 0.3);
    layer.attn = gaussian(rng, layer.attn.size(), 1, 0.7).col(0);
  }
  m.pooling = init_pooling_params(aggregators, d, d, rng);
  for (auto& w : m.pooling.projections) w += gaussian(rng, d, d, 0.3);
  for (Eigen::Index i = 0; i < m.pooling.gamma.size(); ++i) m.pooling.gamma(i) = rng.uniform(0.3, 1.5);

  const Eigen::Index keys = static_cast<Eigen::Index>(classes) * shots;
  Eigen::MatrixXd support = gaussian(rng, keys, d, 1.0);
  std::vector<std::uint32_t> labels;
  for (int cls = 0; cls < classes; ++cls) {
    for (int k = 0; k < shots; ++k) labels.push_back(static_cast<std::uint32_t>(cls));
  }
  m.cache = build_cache(support, labels, classes, gaussian(rng, classes, d, 0.5), rng.uniform(0.5, 2.0),
                        rng.uniform(0.5, 3.0));
  return c;
}

GradcheckReport gradcheck(const GradcheckCase& instance, const GradcheckLimits& limits) {
  Model model = instance.model;
  ParamSet params = collect_params(model);

  ad::Tape tape;
  const RecordedLoss rec = record_support_loss(tape, model, instance.patches, instance.label);
  tape.backward(rec.loss);
  accumulate_gradients(tape, rec, params);

  GradcheckReport report;
  for (auto& t : params) {
    auto value = t.value();
    for (Eigen::Index i = 0; i < t.rows; ++i) {
      for (Eigen::Index j = 0; j < t.cols; ++j) {
        const double saved = value(i, j);
        value(i, j) = saved + limits.step;
        const double up = support_loss(model, instance.patches, instance.label);
        value(i, j) = saved - limits.step;
        const double down = support_loss(model, instance.patches, instance.label);
        value(i, j) = saved;

        const double numeric = (up - down) / (2.0 * limits.step);
        const double analytic = t.grad(i, j);
        const double abs_err = std::abs(numeric - analytic);
        const double scale = std::max(std::abs(numeric), std::abs(analytic));
        const double rel_err = scale > 0.0 ? abs_err / scale : 0.0;
        ++report.checked;
        report.max_abs_error = std::max(report.max_abs_error, abs_err);
        // entries whose gradient is itself near zero are judged by abs_tol alone
        if (scale >= limits.abs_tol && rel_err > report.max_rel_error) {
          report.max_rel_error = rel_err;
          report.worst = t.name + "[" + std::to_string(i) + "," + std::to_string(j) + "]";
        }
        if (abs_err >= limits.abs_tol && rel_err >= limits.rel_tol) ++report.failures;
      }
    }
  }
  return report;
}

std::vector<SuiteEntry> gradcheck_suite(std::uint64_t seed, const GradcheckLimits& limits) {
  const std::vector<Aggregator> all = {Aggregator::Mean, Aggregator::Max, Aggregator::Min, Aggregator::Std};
  std::vector<SuiteEntry> out;
  SplitMix64 root(seed);
  for (const AttentionMode mode : kAllModes) {
    for (unsigned mask = 1; mask < 16; ++mask) {
      std::vector<Aggregator> subset;
      for (unsigned b = 0; b < 4; ++b) {
        if (mask & (1u << b)) subset.push_back(all[b]);
      }
      SplitMix64 rng = root.split();
      const GradcheckCase instance = random_gradcheck_case(rng, mode, subset);
      out.push_back({mode, subset, gradcheck(instance, limits)});
    }
  }
  return out;
}

}  // namespace prga
