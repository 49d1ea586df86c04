#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "prga/rng.hpp"

namespace prga {

enum class Aggregator { Mean, Max, Min, Std };

std::string_view to_string(Aggregator agg);
Aggregator parse_aggregator(std::string_view name);
// "mean,max,std"
std::vector<Aggregator> parse_aggregators(std::string_view list);
std::string join_aggregators(const std::vector<Aggregator>& aggs);

inline const std::vector<Aggregator> kDefaultAggregators = {Aggregator::Mean, Aggregator::Max,
                                                            Aggregator::Std};

struct PoolingParams {
  std::vector<Aggregator> aggregators;
  Eigen::VectorXd gamma;                     // one weight per aggregator
  std::vector<Eigen::MatrixXd> projections;  // one d_out x d_in matrix per aggregator

  Eigen::Index in_dim() const { return projections.front().cols(); }
  Eigen::Index out_dim() const { return projections.front().rows(); }

  void validate() const;
};

// gamma = 1/|aggs|, projections = I + small noise.
PoolingParams init_pooling_params(const std::vector<Aggregator>& aggs, Eigen::Index in_dim,
                                  Eigen::Index out_dim, SplitMix64& rng);

// Column statistic over the P rows of f. Std is the population std.
Eigen::VectorXd aggregate(Aggregator agg, const Eigen::MatrixXd& f);

// sum_m gamma_m * W_m * aggregate(m, f). Not normalized.
Eigen::VectorXd multi_aggregate(const Eigen::MatrixXd& f, const PoolingParams& params);

}  // namespace prga
