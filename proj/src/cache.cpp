#include "prga/cache.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "prga/embank.hpp"
#include "prga/error.hpp"

namespace prga {

namespace {

void check_unit(const Eigen::VectorXd& v) {
  const double norm = v.norm();
  if (!(std::abs(norm - 1.0) <= kUnitTolerance)) {
    throw Error(ErrorKind::NotNormalized, "query norm " + std::to_string(norm));
  }
}

Eigen::VectorXd fuse(const Eigen::VectorXd& query, const Eigen::MatrixXd& keys, const CacheModel& cache) {
  const Eigen::VectorXd zero_shot = cache.classifier * query;
  if (cache.alpha == 0.0) return zero_shot;
  const Eigen::VectorXd a = affinity(query, keys, cache.beta);
  return cache.alpha * (cache.values.transpose() * a) + zero_shot;
}

}  // namespace

void CacheModel::validate() const {
  const Eigen::Index m = keys.rows();
  const Eigen::Index d = keys.cols();
  if (initial_keys.rows() != m || initial_keys.cols() != d || values.rows() != m ||
      classifier.cols() != d || classifier.rows() != values.cols()) {
    throw Error(ErrorKind::DimMismatch, "cache matrices disagree on M, N, or d");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    int ones = 0;
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const double v = values(i, c);
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        ones = -1;
        break;
      }
    }
    if (ones != 1) throw Error(ErrorKind::BadFormat, "value row " + std::to_string(i) + " is not one-hot");
  }
  if (!(alpha >= 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw Error(ErrorKind::InvalidArgument, "need alpha >= 0 and beta > 0");
  }
  if (!keys.allFinite() || !initial_keys.allFinite() || !classifier.allFinite()) {
    throw Error(ErrorKind::NonFiniteValue, "cache has non-finite entries");
  }
}

CacheModel build_cache(const Eigen::MatrixXd& support_globals, std::span<const std::uint32_t> labels,
                       Eigen::Index class_count, const Eigen::MatrixXd& classifier, double alpha,
                       double beta) {
  const Eigen::Index m = support_globals.rows();
  if (static_cast<std::size_t>(m) != labels.size()) {
    throw Error(ErrorKind::DimMismatch, "one label per support item");
  }
  if (classifier.rows() != class_count || classifier.cols() != support_globals.cols()) {
    throw Error(ErrorKind::DimMismatch, "classifier must be N x d");
  }
  std::vector<int> per_class(static_cast<std::size_t>(class_count), 0);
  CacheModel cache;
  cache.keys.resize(m, support_globals.cols());
  cache.values = Eigen::MatrixXd::Zero(m, class_count);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto label = labels[static_cast<std::size_t>(i)];
    if (label >= class_count) {
      throw Error(ErrorKind::LabelOutOfRange, "support label " + std::to_string(label));
    }
    ++per_class[label];
    cache.keys.row(i) = l2_normalize(support_globals.row(i).transpose()).transpose();
    cache.values(i, label) = 1.0;
  }
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    if (per_class[c] == 0) {
      throw Error(ErrorKind::ClassCoverage, "class " + std::to_string(c) + " has no support item");
    }
  }
  cache.initial_keys = cache.keys;
  cache.classifier = classifier;
  cache.alpha = alpha;
  cache.beta = beta;
  cache.validate();
  return cache;
}

Eigen::VectorXd affinity(const Eigen::VectorXd& query, const Eigen::MatrixXd& keys, double beta) {
  if (query.size() != keys.cols()) throw Error(ErrorKind::DimMismatch, "query width vs key width");
  check_unit(query);
  const Eigen::VectorXd sim = keys * query;
  return (-beta * (1.0 - sim.array())).exp().matrix();
}

Eigen::VectorXd train_logits(const Eigen::VectorXd& refined, const CacheModel& cache) {
  if (refined.size() != cache.dim()) throw Error(ErrorKind::DimMismatch, "embedding width vs cache");
  check_unit(refined);
  return fuse(refined, cache.keys, cache);
}

Eigen::VectorXd infer_logits(const Eigen::VectorXd& test_global, const CacheModel& cache,
                             KeySource source) {
  if (test_global.size() != cache.dim()) throw Error(ErrorKind::DimMismatch, "embedding width vs cache");
  if (!test_global.allFinite()) throw Error(ErrorKind::NonFiniteValue, "test embedding");
  const Eigen::VectorXd query = l2_normalize(test_global);
  return fuse(query, source == KeySource::Refined ? cache.keys : cache.initial_keys, cache);
}

std::size_t predict(const Eigen::VectorXd& logits) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < logits.size(); ++i) {
    if (logits(i) > logits(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
  }
  return best;
}

}  // namespace prga
