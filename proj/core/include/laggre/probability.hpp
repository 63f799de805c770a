#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "laggre/embedding.hpp"
#include "laggre/memory_bank.hpp"

namespace laggre {

/// Rows of the bank visited per pass of the similarity kernel.
inline constexpr std::size_t kSimilarityBlockRows = 64;

/// Entry j is the dot product of bank row j with v.
std::vector<double> similarity_row(const Embedding& v, const MemoryBank& bank);
void similarity_row(std::span<const double> v, const MemoryBank& bank, std::span<double> out);

/// log(sum_j exp(x_j / tau)) over the selected entries, stabilized by max-subtraction.
/// Returns -infinity for an empty selection.
double log_sum_exp(std::span<const double> sims, const IndexSet& selection, double tau);
double log_sum_exp(std::span<const double> sims, double tau);

/// Non-parametric softmax probability that v is recognized as bank row i.
double instance_prob(std::size_t i, const Embedding& v, const MemoryBank& bank, Temperature tau);

/// Probabilities for every bank row; sums to one.
std::vector<double> instance_probs(const Embedding& v, const MemoryBank& bank, Temperature tau);

/// Probability mass of the rows in `set`.
double set_prob(const IndexSet& set, const Embedding& v, const MemoryBank& bank, Temperature tau);

}  // namespace laggre
