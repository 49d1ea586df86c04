#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

namespace prga {

inline constexpr double kDefaultAlpha = 1.0;
inline constexpr double kDefaultBeta = 1.0;
inline constexpr double kUnitTolerance = 1e-6;

// Which keys infer_logits compares against.
enum class KeySource { Refined, Initial };

// Key-value cache. keys (Theta) are learnable and unit-norm per row;
// initial_keys keeps Theta_0 = normalized support globals.
struct CacheModel {
  Eigen::MatrixXd keys;          // M x d
  Eigen::MatrixXd initial_keys;  // M x d
  Eigen::MatrixXd values;        // M x N one-hot
  Eigen::MatrixXd classifier;    // N x d, frozen
  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;

  Eigen::Index key_count() const { return keys.rows(); }
  Eigen::Index class_count() const { return values.cols(); }
  Eigen::Index dim() const { return keys.cols(); }

  void validate() const;
};

// support_globals: M x d rows in bank order; labels in [0, class_count).
CacheModel build_cache(const Eigen::MatrixXd& support_globals, std::span<const std::uint32_t> labels,
                       Eigen::Index class_count, const Eigen::MatrixXd& classifier, double alpha,
                       double beta);

// A[m] = exp(-beta (1 - <query, keys_m>)); query must be unit-norm.
Eigen::VectorXd affinity(const Eigen::VectorXd& query, const Eigen::MatrixXd& keys, double beta);

// alpha * A L + f W_c^T for a refined, normalized embedding.
Eigen::VectorXd train_logits(const Eigen::VectorXd& refined, const CacheModel& cache);

// Normalizes f_test, then fuses cache and zero-shot logits. No graph involved.
Eigen::VectorXd infer_logits(const Eigen::VectorXd& test_global, const CacheModel& cache,
                             KeySource source = KeySource::Refined);

// Argmax, lowest index on ties.
std::size_t predict(const Eigen::VectorXd& logits);

}  // namespace prga
