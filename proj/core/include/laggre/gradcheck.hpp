#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "laggre/objective.hpp"

namespace laggre {

struct GradcheckOptions {
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  double h_loss = 1e-5;     // step for gradients with respect to v or z
  double h_encoder = 1e-4;  // step for encoder parameters
  double loss_threshold = 1e-4;
  double encoder_threshold = 1e-3;
};

struct GradcheckEntry {
  std::string name;
  FiniteDiffReport report;
  double threshold = 0.0;
  bool passed() const { return report.max_rel_error < threshold; }
};

/// Randomized finite-difference checks of la_grad_v, ir_grad_v, the
/// normalize chain, and the full encoder chain.
std::vector<GradcheckEntry> run_gradient_checks(const GradcheckOptions& options);

// Individual families, exposed for tests.
FiniteDiffReport check_la_gradient(std::size_t trials, std::uint64_t seed, double h);
FiniteDiffReport check_ir_gradient(std::size_t trials, std::uint64_t seed, double h);
FiniteDiffReport check_normalize_chain(std::size_t trials, std::uint64_t seed, double h);
FiniteDiffReport check_encoder_chain(std::size_t trials, std::uint64_t seed, double h);

}  // namespace laggre
