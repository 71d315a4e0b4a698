#include "hlcr/metrics.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace hlcr {

double mean_squared_error(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) throw std::invalid_argument("mean_squared_error: size mismatch");
  if (y.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (std::size_t n = 0; n < y.size(); ++n) s += (y[n] - y_hat[n]) * (y[n] - y_hat[n]);
  return s / static_cast<double>(y.size());
}

std::vector<std::vector<std::int64_t>> contingency_table(std::span<const int> truth,
                                                         std::span<const int> pred) {
  if (truth.size() != pred.size()) throw std::invalid_argument("contingency_table: size mismatch");
  int rows = 0;
  int cols = 0;
  for (std::size_t n = 0; n < truth.size(); ++n) {
    if (truth[n] < 0 || pred[n] < 0) throw std::invalid_argument("contingency_table: negative label");
    rows = std::max(rows, truth[n] + 1);
    cols = std::max(cols, pred[n] + 1);
  }
  std::vector<std::vector<std::int64_t>> table(rows, std::vector<std::int64_t>(cols, 0));
  for (std::size_t n = 0; n < truth.size(); ++n) ++table[truth[n]][pred[n]];
  return table;
}

std::vector<int> hungarian_min_cost(const std::vector<std::vector<double>>& cost) {
  // Potentials formulation, 1-based internally.
  const int n = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) assignment[p[j] - 1] = j - 1;
  return assignment;
}

double best_permutation_accuracy(std::span<const int> truth, std::span<const int> pred) {
  if (truth.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto table = contingency_table(truth, pred);
  const std::size_t n = std::max(table.size(), table.empty() ? 0 : table[0].size());
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < table.size(); ++a)
    for (std::size_t b = 0; b < table[a].size(); ++b) cost[a][b] = -static_cast<double>(table[a][b]);
  const auto assign = hungarian_min_cost(cost);
  std::int64_t hits = 0;
  for (std::size_t a = 0; a < table.size(); ++a) {
    const auto b = static_cast<std::size_t>(assign[a]);
    if (b < table[a].size()) hits += table[a][b];
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double adjusted_rand_index(std::span<const int> truth, std::span<const int> pred) {
  const auto table = contingency_table(truth, pred);
  auto comb2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double sum_cells = 0.0;
  std::vector<double> rows(table.size(), 0.0);
  std::vector<double> cols(table.empty() ? 0 : table[0].size(), 0.0);
  for (std::size_t a = 0; a < table.size(); ++a) {
    for (std::size_t b = 0; b < table[a].size(); ++b) {
      const auto v = static_cast<double>(table[a][b]);
      sum_cells += comb2(v);
      rows[a] += v;
      cols[b] += v;
    }
  }
  double sum_rows = 0.0, sum_cols = 0.0;
  for (double r : rows) sum_rows += comb2(r);
  for (double c : cols) sum_cols += comb2(c);
  const double total = comb2(static_cast<double>(truth.size()));
  if (total == 0.0) return 1.0;
  const double expected = sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;  // both partitions trivial
  return (sum_cells - expected) / (max_index - expected);
}

}  // namespace hlcr
