#pragma once

#include <span>
#include <vector>

#include "graphata/autodiff.hpp"

namespace graphata {

// Euclidean projection onto the probability simplex:
//   sort descending, η = max{j : z_(j) > (Σ_{i≤j} z_(i) − 1)/j},
//   τ = (Σ_{i≤η} z_(i) − 1)/η, output [z − τ]_+.
// Throws NumericError on non-finite input, UsageError on empty input.
std::vector<double> sparsemax(std::span<const double> z);
void sparsemax_into(std::span<const double> z, std::span<double> out);

// Jacobian-vector product at a point with output p: with S = {i : p_i > 0},
// returns s ⊙ (u − mean_{j∈S} u_j).
std::vector<double> sparsemax_jacobian_vp(std::span<const double> z, std::span<const double> upstream);

// Number of strictly positive entries.
std::size_t support_size(std::span<const double> p);

// Row-wise sparsemax as a taped op.
Var row_sparsemax(Var x);

}  // namespace graphata
