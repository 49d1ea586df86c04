#include "prga/pooling.hpp"

#include <cmath>

#include "prga/error.hpp"

namespace prga {

std::string_view to_string(Aggregator agg) {
  switch (agg) {
    case Aggregator::Mean: return "mean";
    case Aggregator::Max: return "max";
    case Aggregator::Min: return "min";
    case Aggregator::Std: return "std";
  }
  return "?";
}

Aggregator parse_aggregator(std::string_view name) {
  if (name == "mean") return Aggregator::Mean;
  if (name == "max") return Aggregator::Max;
  if (name == "min") return Aggregator::Min;
  if (name == "std") return Aggregator::Std;
  throw Error(ErrorKind::InvalidArgument, "unknown aggregator '" + std::string(name) + "'");
}

std::vector<Aggregator> parse_aggregators(std::string_view list) {
  std::vector<Aggregator> out;
  while (!list.empty()) {
    const auto comma = list.find(',');
    out.push_back(parse_aggregator(list.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    list.remove_prefix(comma + 1);
  }
  if (out.empty()) throw Error(ErrorKind::InvalidArgument, "empty aggregator list");
  return out;
}

std::string join_aggregators(const std::vector<Aggregator>& aggs) {
  std::string out;
  for (const auto agg : aggs) {
    if (!out.empty()) out += ',';
    out += to_string(agg);
  }
  return out;
}

void PoolingParams::validate() const {
  if (aggregators.empty()) throw Error(ErrorKind::DimMismatch, "pooling needs at least one aggregator");
  if (static_cast<std::size_t>(gamma.size()) != aggregators.size() ||
      projections.size() != aggregators.size()) {
    throw Error(ErrorKind::DimMismatch, "one gamma and one projection per aggregator");
  }
  for (const auto& w : projections) {
    if (w.rows() != out_dim() || w.cols() != in_dim()) {
      throw Error(ErrorKind::DimMismatch, "projections must share dims");
    }
    if (!w.allFinite()) throw Error(ErrorKind::NonFiniteValue, "projection has non-finite entries");
  }
  if (!gamma.allFinite()) throw Error(ErrorKind::NonFiniteValue, "gamma has non-finite entries");
}

PoolingParams init_pooling_params(const std::vector<Aggregator>& aggs, Eigen::Index in_dim,
                                  Eigen::Index out_dim, SplitMix64& rng) {
  if (aggs.empty()) throw Error(ErrorKind::InvalidArgument, "pooling needs at least one aggregator");
  PoolingParams params;
  params.aggregators = aggs;
  params.gamma = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(aggs.size()),
                                           1.0 / static_cast<double>(aggs.size()));
  for (std::size_t m = 0; m < aggs.size(); ++m) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Identity(out_dim, in_dim);
    for (Eigen::Index i = 0; i < out_dim; ++i) {
      for (Eigen::Index j = 0; j < in_dim; ++j) w(i, j) += 0.01 * rng.normal();
    }
    params.projections.push_back(std::move(w));
  }
  return params;
}

Eigen::VectorXd aggregate(Aggregator agg, const Eigen::MatrixXd& f) {
  if (f.rows() < 1) throw Error(ErrorKind::EmptyInput, "aggregate over zero patches");
  switch (agg) {
    case Aggregator::Mean: return f.colwise().mean().transpose();
    case Aggregator::Max: return f.colwise().maxCoeff().transpose();
    case Aggregator::Min: return f.colwise().minCoeff().transpose();
    case Aggregator::Std: {
      const Eigen::RowVectorXd mean = f.colwise().mean();
      const Eigen::MatrixXd centered = f.rowwise() - mean;
      return (centered.array().square().colwise().sum() / static_cast<double>(f.rows()))
          .sqrt()
          .transpose();
    }
  }
  return {};
}

Eigen::VectorXd multi_aggregate(const Eigen::MatrixXd& f, const PoolingParams& params) {
  params.validate();
  if (f.cols() != params.in_dim()) {
    throw Error(ErrorKind::DimMismatch, "features have width " + std::to_string(f.cols()) +
                                            ", pooling expects " + std::to_string(params.in_dim()));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(params.out_dim());
  for (std::size_t m = 0; m < params.aggregators.size(); ++m) {
    out += params.gamma(static_cast<Eigen::Index>(m)) *
           (params.projections[m] * aggregate(params.aggregators[m], f));
  }
  return out;
}

}  // namespace prga
