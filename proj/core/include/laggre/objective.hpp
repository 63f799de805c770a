#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "laggre/embedding.hpp"
#include "laggre/memory_bank.hpp"
#include "laggre/neighbors.hpp"

namespace laggre {

using GradientVector = std::vector<double>;

/// Loss in nats. For the aggregation loss, value = log_background - log_overlap
/// where both are log-sum-exp of v.row/tau over B and C∩B respectively.
struct LossValue {
  double value = 0.0;
  double log_background = 0.0;
  double log_overlap = 0.0;
};

struct LossAndGradient {
  LossValue loss;
  GradientVector grad;  // with respect to v, bank rows held constant
};

// Local aggregation loss -log(P(C∩B|v) / P(B|v)). The softmax normalizer over
// the whole bank cancels, so only rows in B are read.
LossValue la_loss(std::span<const double> v, const NeighborSets& sets, const MemoryBank& bank, Temperature tau);
LossValue la_loss(const Embedding& v, const NeighborSets& sets, const MemoryBank& bank, Temperature tau);

GradientVector la_grad_v(std::span<const double> v, const NeighborSets& sets, const MemoryBank& bank,
                         Temperature tau);
GradientVector la_grad_v(const Embedding& v, const NeighborSets& sets, const MemoryBank& bank, Temperature tau);

/// Loss and gradient in one pass, given v's similarity row against the bank.
LossAndGradient la_loss_and_grad(std::span<const double> similarities, const NeighborSets& sets,
                                 const MemoryBank& bank, Temperature tau);

// Instance recognition (warm start): -log P(i|v) with the exact normalizer.
LossValue ir_loss(std::size_t i, std::span<const double> v, const MemoryBank& bank, Temperature tau);
LossValue ir_loss(std::size_t i, const Embedding& v, const MemoryBank& bank, Temperature tau);
GradientVector ir_grad_v(std::size_t i, std::span<const double> v, const MemoryBank& bank, Temperature tau);
GradientVector ir_grad_v(std::size_t i, const Embedding& v, const MemoryBank& bank, Temperature tau);
LossAndGradient ir_loss_and_grad(std::size_t i, std::span<const double> similarities, const MemoryBank& bank,
                                 Temperature tau);

/// Back-propagates a gradient at v = z/||z|| to the raw vector z:
/// (g - (g.v) v) / ||z||.
GradientVector chain_through_normalize(std::span<const double> g, std::span<const double> z);

// ---- finite-difference verification ----------------------------------------

struct GradProblem {
  std::function<double(std::span<const double>)> loss;
  std::function<GradientVector(std::span<const double>)> grad;
  std::vector<double> point;
  /// Optional: returns false when a +/-h probe of coordinate c straddles a
  /// non-differentiable point; such coordinates are skipped and counted.
  std::function<bool(std::span<const double>, std::size_t, double)> smooth_at;
};

struct FiniteDiffReport {
  std::size_t trials = 0;
  std::size_t coordinates = 0;
  std::size_t skipped = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

/// Scale below which gradient entries count as absolute rather than relative.
inline constexpr double kRelErrorFloor = 1e-6;

/// Central differences per coordinate. The relative error of coordinate c is
/// |analytic_c - numeric_c| / max(|analytic|_inf, |numeric|_inf, kRelErrorFloor).
FiniteDiffReport finite_diff_check(const std::function<GradProblem(std::size_t trial)>& make_problem,
                                   std::size_t trials, double h = 1e-5);

}  // namespace laggre
