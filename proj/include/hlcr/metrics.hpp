#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hlcr {

double mean_squared_error(std::span<const double> y, std::span<const double> y_hat);

/// table[a][b] = #{n : truth[n] == a and pred[n] == b}. Labels are 0-based.
std::vector<std::vector<std::int64_t>> contingency_table(std::span<const int> truth,
                                                         std::span<const int> pred);

/// Minimum-cost assignment on a square cost matrix (Hungarian algorithm).
/// Returns assignment[row] = column.
std::vector<int> hungarian_min_cost(const std::vector<std::vector<double>>& cost);

/// Fraction of items labeled correctly under the best one-to-one relabeling
/// of predicted clusters onto true clusters.
double best_permutation_accuracy(std::span<const int> truth, std::span<const int> pred);

double adjusted_rand_index(std::span<const int> truth, std::span<const int> pred);

}  // namespace hlcr
