// Ranking quality metrics: nDCG@k, the discounted cumulative online metric
// and MaxRR (reciprocal rank of the highest clicked result).
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "foltr/clickmodels.hpp"
#include "foltr/core.hpp"
#include "foltr/data.hpp"
#include "foltr/rankers.hpp"

namespace foltr {

/// DCG with exponential gain (2^grade - 1) and log2(i+1) discount.
/// An all-zero ideal yields nDCG 0.0 by convention.
inline double ndcg_at_k(const std::vector<int>& displayed_grades,
                        std::vector<int> ideal_grades, int k) {
  if (k < 1) throw Error("ndcg_at_k: k must be >= 1");
  const auto dcg = [k](const std::vector<int>& grades) {
    double s = 0.0;
    const int top = std::min<int>(k, static_cast<int>(grades.size()));
    for (int i = 0; i < top; ++i)
      s += (std::pow(2.0, grades[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
    return s;
  };
  std::sort(ideal_grades.begin(), ideal_grades.end(), std::greater<int>());
  const double ideal = dcg(ideal_grades);
  if (ideal == 0.0) return 0.0;
  return dcg(displayed_grades) / ideal;
}

/// Cumulative discounted online metric: sum of ndcg_t * gamma^(t-1).
struct OnlineAccumulator {
  double gamma = 0.9995;
  long long t = 0;
  double sum = 0.0;
  double gamma_pow = 1.0;  // gamma^t, maintained incrementally

  void step(double serp_ndcg) {
    sum += serp_ndcg * gamma_pow;
    gamma_pow *= gamma;
    ++t;
  }
};

inline double max_rr(const ClickVector& clicks) {
  for (std::size_t rank = 0; rank < clicks.size(); ++rank)
    if (clicks[rank]) return 1.0 / static_cast<double>(rank + 1);
  return 0.0;
}

/// Deterministic ranking for evaluation: stable sort by descending score,
/// ties broken by ascending doc_index.
inline std::vector<int> rank_docs(const RankerParams& params, const Query& query) {
  std::vector<std::pair<double, int>> scored;
  scored.reserve(query.docs.size());
  for (const auto& d : query.docs) scored.emplace_back(score(params, d.features), d.doc_index);
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<int> order(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) order[i] = scored[i].second;
  return order;
}

/// Mean nDCG@k of the ranker over a held-out query set.
inline double offline_eval(const RankerParams& params, const std::vector<Query>& test_queries,
                           int k = 10) {
  if (test_queries.empty()) throw Error("offline_eval: empty test set");
  Vec per_query(test_queries.size());
  for (std::size_t qi = 0; qi < test_queries.size(); ++qi) {
    const Query& q = test_queries[qi];
    const auto order = rank_docs(params, q);
    std::vector<int> displayed, ideal;
    displayed.reserve(order.size());
    ideal.reserve(order.size());
    for (int d : order) displayed.push_back(q.docs[d].relevance);
    for (const auto& d : q.docs) ideal.push_back(d.relevance);
    per_query[qi] = ndcg_at_k(displayed, ideal, k);
  }
  return pairwise_sum(per_query) / static_cast<double>(per_query.size());
}

}  // namespace foltr
