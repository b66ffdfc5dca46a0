// Byzantine-robust aggregation rules: Krum, Multi-Krum, coordinate-wise
// Trimmed Mean and coordinate-wise Median.
#pragma once

#include <algorithm>
#include <vector>

#include "foltr/core.hpp"

namespace foltr {

struct KrumScores {
  Vec score;                                   // s(i) per update
  std::vector<std::vector<int>> neighbors;     // the n-m-2 nearest per update
};

/// Distance scores: s(i) is the sum of Euclidean distances from update i to
/// its n-m-2 nearest other updates.
inline KrumScores krum_scores(const std::vector<Vec>& updates, int m) {
  const int n = static_cast<int>(updates.size());
  if (n < m + 3) throw ConfigError("krum: requires n >= m + 3");
  const int keep = n - m - 2;

  std::vector<Vec> dist(n, Vec(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) dist[i][j] = dist[j][i] = l2_distance(updates[i], updates[j]);

  KrumScores result;
  result.score.resize(n);
  result.neighbors.resize(n);
  for (int i = 0; i < n; ++i) {
    std::vector<int> order;
    order.reserve(n - 1);
    for (int j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (dist[i][a] != dist[i][b]) return dist[i][a] < dist[i][b];
      return a < b;
    });
    order.resize(keep);
    double s = 0.0;
    for (int j : order) s += dist[i][j];
    result.score[i] = s;
    result.neighbors[i] = std::move(order);
  }
  return result;
}

inline int krum_select(const std::vector<Vec>& updates, int m) {
  const KrumScores scores = krum_scores(updates, m);
  int best = 0;
  for (int i = 1; i < static_cast<int>(updates.size()); ++i)
    if (scores.score[i] < scores.score[best]) best = i;  // ties keep the lowest index
  return best;
}

/// Krum selects a member of the input set, never a synthesized vector.
inline Vec krum(const std::vector<Vec>& updates, int m) {
  return updates[krum_select(updates, m)];
}

/// Unweighted mean of the keep_count lowest-scoring updates.
inline Vec multi_krum(const std::vector<Vec>& updates, int m, int keep_count) {
  const int n = static_cast<int>(updates.size());
  if (keep_count < 1 || keep_count > n) throw ConfigError("multi_krum: keep_count out of range");
  const KrumScores scores = krum_scores(updates, m);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores.score[a] != scores.score[b]) return scores.score[a] < scores.score[b];
    return a < b;
  });

  const std::size_t dim = updates[0].size();
  Vec out(dim, 0.0);
  Vec terms(keep_count);
  for (std::size_t c = 0; c < dim; ++c) {
    for (int i = 0; i < keep_count; ++i) terms[i] = updates[order[i]][c];
    out[c] = pairwise_sum(terms) / static_cast<double>(keep_count);
  }
  return out;
}

/// Per coordinate, drop the beta largest and beta smallest values and average
/// the remaining n - 2*beta.
inline Vec trimmed_mean(const std::vector<Vec>& updates, int beta) {
  const int n = static_cast<int>(updates.size());
  if (n == 0) throw ConfigError("trimmed_mean: empty update set");
  if (beta < 0 || n - 2 * beta < 1) throw ConfigError("trimmed_mean: beta too large");
  const std::size_t dim = updates[0].size();
  for (const auto& u : updates) check_same_size(u, updates[0], "trimmed_mean");

  Vec out(dim, 0.0);
  Vec column(n);
  const int kept = n - 2 * beta;
  Vec terms(kept);
  for (std::size_t c = 0; c < dim; ++c) {
    for (int i = 0; i < n; ++i) column[i] = updates[i][c];
    std::sort(column.begin(), column.end());
    for (int i = 0; i < kept; ++i) terms[i] = column[beta + i];
    out[c] = pairwise_sum(terms) / static_cast<double>(kept);
  }
  return out;
}

/// Coordinate-wise median; an even count averages the middle two values.
inline Vec coord_median(const std::vector<Vec>& updates) {
  const int n = static_cast<int>(updates.size());
  if (n == 0) throw ConfigError("coord_median: empty update set");
  const std::size_t dim = updates[0].size();
  for (const auto& u : updates) check_same_size(u, updates[0], "coord_median");

  Vec out(dim, 0.0);
  Vec column(n);
  for (std::size_t c = 0; c < dim; ++c) {
    for (int i = 0; i < n; ++i) column[i] = updates[i][c];
    std::sort(column.begin(), column.end());
    out[c] = (n % 2 == 1) ? column[n / 2] : 0.5 * (column[n / 2 - 1] + column[n / 2]);
  }
  return out;
}

}  // namespace foltr
