#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "prga/model.hpp"
#include "prga/rng.hpp"

namespace prga {

// One small training instance: a model and a labelled support image.
struct GradcheckCase {
  Model model;
  Eigen::MatrixXd patches;
  std::uint32_t label = 0;
};

struct GradcheckLimits {
  double step = 1e-4;       // central-difference h
  double rel_tol = 1e-4;    // relative error bound
  double abs_tol = 1e-6;    // accepted absolute error near zero
};

struct GradcheckReport {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double max_rel_error = 0.0;  // over entries with |grad| >= abs_tol
  double max_abs_error = 0.0;
  std::string worst;           // "<param>[i,j]"

  bool passed() const { return failures == 0; }
};

// Random instance with P <= 4, d <= 4, N <= 3, one graph layer. Parameters
// are perturbed away from their identity-like initialization.
GradcheckCase random_gradcheck_case(SplitMix64& rng, AttentionMode mode,
                                    const std::vector<Aggregator>& aggregators);

// Tape gradients vs central differences of support_loss, entry by entry.
GradcheckReport gradcheck(const GradcheckCase& instance, const GradcheckLimits& limits = {});

// Every attention mode crossed with every non-empty aggregator subset
// (4 x 15 = 60 instances).
struct SuiteEntry {
  AttentionMode mode;
  std::vector<Aggregator> aggregators;
  GradcheckReport report;
};
std::vector<SuiteEntry> gradcheck_suite(std::uint64_t seed, const GradcheckLimits& limits = {});

}  // namespace prga
