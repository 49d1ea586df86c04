#pragma once

#include <cstddef>
#include <exception>
#include <vector>

#include <Eigen/Dense>

#include "prga/cache.hpp"
#include "prga/model.hpp"

namespace prga::kernels {

// Worker cap: PRGA_THREADS when set to a positive integer, otherwise the
// OpenMP default.
int worker_count();

// Runs body(i) for i in [0, n) across workers. Each index owns its output
// slot, so results do not depend on scheduling. If any body throws, the
// exception of the lowest failing index is rethrown after the loop.
template <typename Body>
void parallel_for(std::size_t n, Body&& body);

// Batch inference: row q of the result holds infer_logits(queries.row(q)).
// The serial form is the reference the parallel form is tested against.
Eigen::MatrixXd infer_batch_serial(const Eigen::MatrixXd& queries, const CacheModel& cache,
                                   KeySource source = KeySource::Refined);
Eigen::MatrixXd infer_batch_parallel(const Eigen::MatrixXd& queries, const CacheModel& cache,
                                     KeySource source = KeySource::Refined);

// Graph-refined, normalized embeddings for many images, one row per image.
Eigen::MatrixXd refine_batch_serial(const Model& model, const std::vector<Eigen::MatrixXd>& patches);
Eigen::MatrixXd refine_batch_parallel(const Model& model, const std::vector<Eigen::MatrixXd>& patches);

// ---------------------------------------------------------------------------

template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_count())
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace prga::kernels
