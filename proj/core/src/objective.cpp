#include "laggre/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "laggre/error.hpp"
#include "laggre/probability.hpp"

namespace laggre {

namespace {

void check_query(std::span<const double> v, const MemoryBank& bank) {
  if (v.size() != bank.dim())
    throw DimensionMismatch("query has dimension " + std::to_string(v.size()) + ", bank has " +
                            std::to_string(bank.dim()));
}

IndexSet overlap_of(const NeighborSets& sets, std::size_t n) {
  sets.background.check_bound(n);
  sets.close.check_bound(n);
  auto overlap = set_intersection(sets.close, sets.background);
  if (overlap.empty()) throw EmptyIntersection("close and background neighbor sets do not intersect");
  return overlap;
}

// Accumulates scale * sum_{j in set} softmax_j(set) * row_j into grad.
void add_weighted_rows(std::span<const double> sims, const IndexSet& set, double log_norm, double inv_tau,
                       double scale, const MemoryBank& bank, GradientVector& grad) {
  const std::size_t d = bank.dim();
  for (auto j : set) {
    const double w = std::exp(sims[j] * inv_tau - log_norm) * scale;
    const auto row = bank.row(j);
    for (std::size_t c = 0; c < d; ++c) grad[c] += w * static_cast<double>(row[c]);
  }
}

// Similarities restricted to the rows we need; other entries are left at 0.
std::vector<double> sparse_similarities(std::span<const double> v, const IndexSet& rows, const MemoryBank& bank) {
  std::vector<double> sims(bank.size(), 0.0);
  for (auto j : rows) sims[j] = dot(bank.row(j), v);
  return sims;
}

}  // namespace

LossAndGradient la_loss_and_grad(std::span<const double> sims, const NeighborSets& sets, const MemoryBank& bank,
                                 Temperature tau) {
  if (sims.size() != bank.size()) throw DimensionMismatch("similarity row length differs from bank size");
  const auto overlap = overlap_of(sets, bank.size());
  const double t = tau.value();
  LossAndGradient out;
  out.loss.log_background = log_sum_exp(sims, sets.background, t);
  out.loss.log_overlap = log_sum_exp(sims, overlap, t);
  out.loss.value = std::max(0.0, out.loss.log_background - out.loss.log_overlap);
  out.grad.assign(bank.dim(), 0.0);
  if (overlap.size() == sets.background.size()) return out;  // ratio is identically one
  const double inv_tau = 1.0 / t;
  add_weighted_rows(sims, sets.background, out.loss.log_background, inv_tau, inv_tau, bank, out.grad);
  add_weighted_rows(sims, overlap, out.loss.log_overlap, inv_tau, -inv_tau, bank, out.grad);
  return out;
}

LossValue la_loss(std::span<const double> v, const NeighborSets& sets, const MemoryBank& bank, Temperature tau) {
  check_query(v, bank);
  sets.background.check_bound(bank.size());
  const auto sims = sparse_similarities(v, sets.background, bank);
  const auto overlap = overlap_of(sets, bank.size());
  LossValue out;
  out.log_background = log_sum_exp(sims, sets.background, tau.value());
  out.log_overlap = log_sum_exp(sims, overlap, tau.value());
  out.value = std::max(0.0, out.log_background - out.log_overlap);
  if (overlap.size() == sets.background.size()) out.value = 0.0;
  return out;
}

LossValue la_loss(const Embedding& v, const NeighborSets& sets, const MemoryBank& bank, Temperature tau) {
  return la_loss(v.values(), sets, bank, tau);
}

GradientVector la_grad_v(std::span<const double> v, const NeighborSets& sets, const MemoryBank& bank,
                         Temperature tau) {
  check_query(v, bank);
  sets.background.check_bound(bank.size());
  const auto sims = sparse_similarities(v, sets.background, bank);
  return la_loss_and_grad(sims, sets, bank, tau).grad;
}

GradientVector la_grad_v(const Embedding& v, const NeighborSets& sets, const MemoryBank& bank, Temperature tau) {
  return la_grad_v(v.values(), sets, bank, tau);
}

LossAndGradient ir_loss_and_grad(std::size_t i, std::span<const double> sims, const MemoryBank& bank,
                                 Temperature tau) {
  if (i >= bank.size()) throw IndexOutOfRange("sample index outside the bank");
  if (sims.size() != bank.size()) throw DimensionMismatch("similarity row length differs from bank size");
  const double t = tau.value();
  const double inv_tau = 1.0 / t;
  const double log_norm = log_sum_exp(sims, t);
  LossAndGradient out;
  out.loss.log_background = log_norm;
  out.loss.log_overlap = sims[i] * inv_tau;
  out.loss.value = std::max(0.0, log_norm - sims[i] * inv_tau);
  out.grad.assign(bank.dim(), 0.0);
  const std::size_t d = bank.dim();
  for (std::size_t j = 0; j < bank.size(); ++j) {
    const double p = std::exp(sims[j] * inv_tau - log_norm);
    const auto row = bank.row(j);
    for (std::size_t c = 0; c < d; ++c) out.grad[c] += p * static_cast<double>(row[c]);
  }
  const auto self = bank.row(i);
  for (std::size_t c = 0; c < d; ++c) out.grad[c] = (out.grad[c] - static_cast<double>(self[c])) * inv_tau;
  return out;
}

LossValue ir_loss(std::size_t i, std::span<const double> v, const MemoryBank& bank, Temperature tau) {
  check_query(v, bank);
  if (i >= bank.size()) throw IndexOutOfRange("sample index outside the bank");
  std::vector<double> sims(bank.size());
  similarity_row(v, bank, sims);
  const double t = tau.value();
  LossValue out;
  out.log_background = log_sum_exp(sims, t);
  out.log_overlap = sims[i] / t;
  out.value = std::max(0.0, out.log_background - out.log_overlap);
  return out;
}

LossValue ir_loss(std::size_t i, const Embedding& v, const MemoryBank& bank, Temperature tau) {
  return ir_loss(i, v.values(), bank, tau);
}

GradientVector ir_grad_v(std::size_t i, std::span<const double> v, const MemoryBank& bank, Temperature tau) {
  check_query(v, bank);
  std::vector<double> sims(bank.size());
  similarity_row(v, bank, sims);
  return ir_loss_and_grad(i, sims, bank, tau).grad;
}

GradientVector ir_grad_v(std::size_t i, const Embedding& v, const MemoryBank& bank, Temperature tau) {
  return ir_grad_v(i, v.values(), bank, tau);
}

GradientVector chain_through_normalize(std::span<const double> g, std::span<const double> z) {
  if (g.size() != z.size()) throw DimensionMismatch("gradient and raw vector differ in dimension");
  const double norm = l2_norm(z);
  if (norm < 1e-12) throw ZeroNorm("cannot back-propagate through a zero-norm vector");
  double radial = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) radial += g[c] * z[c] / norm;
  GradientVector out(z.size());
  for (std::size_t c = 0; c < z.size(); ++c) out[c] = (g[c] - radial * z[c] / norm) / norm;
  return out;
}

FiniteDiffReport finite_diff_check(const std::function<GradProblem(std::size_t)>& make_problem,
                                   std::size_t trials, double h) {
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");
  FiniteDiffReport report;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    auto problem = make_problem(trial);
    const std::size_t n = problem.point.size();
    const auto analytic = problem.grad(problem.point);
    if (analytic.size() != n) throw DimensionMismatch("gradient length differs from the point dimension");

    std::vector<double> numeric(n, 0.0);
    std::vector<char> usable(n, 1);
    std::vector<double> probe = problem.point;
    for (std::size_t c = 0; c < n; ++c) {
      if (problem.smooth_at && !problem.smooth_at(problem.point, c, h)) {
        usable[c] = 0;
        ++report.skipped;
        continue;
      }
      const double x = probe[c];
      probe[c] = x + h;
      const double up = problem.loss(probe);
      probe[c] = x - h;
      const double down = problem.loss(probe);
      probe[c] = x;
      numeric[c] = (up - down) / (2.0 * h);
    }

    double scale = kRelErrorFloor;
    for (std::size_t c = 0; c < n; ++c)
      if (usable[c]) scale = std::max({scale, std::abs(analytic[c]), std::abs(numeric[c])});
    for (std::size_t c = 0; c < n; ++c) {
      if (!usable[c]) continue;
      const double err = std::abs(analytic[c] - numeric[c]);
      report.max_abs_error = std::max(report.max_abs_error, err);
      report.max_rel_error = std::max(report.max_rel_error, err / scale);
      ++report.coordinates;
    }
    ++report.trials;
  }
  return report;
}

}  // namespace laggre
