#include "prga/kernels.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>

#include <omp.h>

namespace prga::kernels {

int worker_count() {
  const int fallback = omp_get_max_threads();
  const char* env = std::getenv("PRGA_THREADS");
  if (env == nullptr || *env == '\0') return fallback;
  int n = 0;
  const auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), n);
  if (ec != std::errc() || n < 1) return fallback;
  return n;
}

Eigen::MatrixXd infer_batch_serial(const Eigen::MatrixXd& queries, const CacheModel& cache,
                                   KeySource source) {
  Eigen::MatrixXd out(queries.rows(), cache.class_count());
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    out.row(q) = infer_logits(queries.row(q).transpose(), cache, source).transpose();
  }
  return out;
}

Eigen::MatrixXd infer_batch_parallel(const Eigen::MatrixXd& queries, const CacheModel& cache,
                                     KeySource source) {
  Eigen::MatrixXd out(queries.rows(), cache.class_count());
  parallel_for(static_cast<std::size_t>(queries.rows()), [&](std::size_t q) {
    const auto row = static_cast<Eigen::Index>(q);
    out.row(row) = infer_logits(queries.row(row).transpose(), cache, source).transpose();
  });
  return out;
}

Eigen::MatrixXd refine_batch_serial(const Model& model, const std::vector<Eigen::MatrixXd>& patches) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(patches.size()), model.pooling.out_dim());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = refine_embedding(model, patches[i]).transpose();
  }
  return out;
}

Eigen::MatrixXd refine_batch_parallel(const Model& model, const std::vector<Eigen::MatrixXd>& patches) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(patches.size()), model.pooling.out_dim());
  parallel_for(patches.size(), [&](std::size_t i) {
    out.row(static_cast<Eigen::Index>(i)) = refine_embedding(model, patches[i]).transpose();
  });
  return out;
}

}  // namespace prga::kernels
