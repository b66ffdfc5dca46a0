#include "foltr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

namespace foltr {
namespace {

// Direct evaluation of the DCG formula, kept independent of the library path.
double dcg_oracle(const std::vector<int>& grades, int k) {
  double s = 0.0;
  for (int i = 0; i < std::min<int>(k, grades.size()); ++i)
    s += (std::pow(2.0, grades[i]) - 1.0) / (std::log(i + 2.0) / std::log(2.0));
  return s;
}

TEST(Ndcg, IdealOrderingScoresOne) {
  EXPECT_DOUBLE_EQ(ndcg_at_k({3, 2, 1, 0}, {3, 2, 1, 0}, 4), 1.0);
  EXPECT_DOUBLE_EQ(ndcg_at_k({2, 2}, {2, 2}, 2), 1.0);
}

TEST(Ndcg, HandEvaluatedTwoDocCase) {
  // displayed [0,1]: DCG = 0 + 1/log2(3); ideal [1,0]: DCG = 1.
  const double expected = 1.0 / std::log2(3.0);
  EXPECT_NEAR(ndcg_at_k({0, 1}, {0, 1}, 2), expected, 1e-12);
  EXPECT_NEAR(expected, 0.6309297535714574, 1e-12);
}

TEST(Ndcg, AllZeroGradesScoreZero) {
  EXPECT_DOUBLE_EQ(ndcg_at_k({0, 0, 0}, {0, 0, 0}, 3), 0.0);
}

TEST(Ndcg, MatchesOracleOverPermutations) {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + rng.uniform_int(6);
    std::vector<int> grades(n);
    for (auto& g : grades) g = static_cast<int>(rng.uniform_int(5));
    std::vector<int> sorted_desc = grades;
    std::sort(sorted_desc.begin(), sorted_desc.end(), std::greater<int>());
    const int k = 1 + static_cast<int>(rng.uniform_int(n));
    const double ideal = dcg_oracle(sorted_desc, k);

    std::vector<int> perm = grades;
    std::sort(perm.begin(), perm.end());
    do {
      const double v = ndcg_at_k(perm, grades, k);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0 + 1e-12);
      const double expected = ideal == 0.0 ? 0.0 : dcg_oracle(perm, k) / ideal;
      EXPECT_NEAR(v, expected, 1e-12);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST(OnlineAccumulator, FirstStepIsUndiscounted) {
  OnlineAccumulator acc;
  acc.step(0.75);
  EXPECT_DOUBLE_EQ(acc.sum, 0.75);
  EXPECT_EQ(acc.t, 1);
}

TEST(OnlineAccumulator, GammaOneIsPlainSum) {
  OnlineAccumulator acc;
  acc.gamma = 1.0;
  for (int i = 0; i < 5; ++i) acc.step(0.5);
  EXPECT_DOUBLE_EQ(acc.sum, 2.5);
}

TEST(OnlineAccumulator, GeometricSumOracle) {
  OnlineAccumulator acc;
  acc.gamma = 0.9995;
  for (int i = 0; i < 3; ++i) acc.step(1.0);
  const double expected = 1.0 + 0.9995 + 0.9995 * 0.9995;
  EXPECT_NEAR(acc.sum, expected, 1e-15);
  EXPECT_NEAR(acc.sum, 2.99850025, 1e-8);
}

TEST(OnlineAccumulator, BatchingInvariance) {
  Rng rng(2);
  std::vector<double> values(500);
  for (auto& v : values) v = rng.uniform();

  OnlineAccumulator streamed;
  for (double v : values) streamed.step(v);

  OnlineAccumulator chunked;
  std::size_t i = 0;
  while (i < values.size()) {
    const std::size_t chunk = std::min<std::size_t>(values.size() - i, 1 + rng.uniform_int(37));
    for (std::size_t j = 0; j < chunk; ++j) chunked.step(values[i + j]);
    i += chunk;
  }
  EXPECT_DOUBLE_EQ(streamed.sum, chunked.sum);
}

TEST(MaxRR, Definition) {
  EXPECT_DOUBLE_EQ(max_rr({false, false, true, false, true}), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(max_rr({false, false}), 0.0);
  EXPECT_DOUBLE_EQ(max_rr({true}), 1.0);
  EXPECT_DOUBLE_EQ(max_rr({}), 0.0);
}

TEST(MaxRR, RangeIsReciprocalRanksOrZero) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + rng.uniform_int(10);
    ClickVector clicks(n);
    for (int i = 0; i < n; ++i) clicks[i] = rng.uniform() < 0.3;
    const double v = max_rr(clicks);
    bool valid = v == 0.0;
    for (int r = 1; r <= n; ++r) valid = valid || v == 1.0 / r;
    EXPECT_TRUE(valid);
  }
}

TEST(OfflineEval, SingleQueryReducesToNdcg) {
  const Dataset ds = generate_synthetic({1, 1, 8, 3, 4}, 5);
  RankerParams zero{Architecture{ArchKind::Linear, 3}, Vec(3, 0.0)};
  // Zero weights rank by doc_index; compute the same by hand.
  const Query& q = ds.test[0];
  std::vector<int> displayed, ideal;
  for (const auto& d : q.docs) {
    displayed.push_back(d.relevance);
    ideal.push_back(d.relevance);
  }
  EXPECT_DOUBLE_EQ(offline_eval(zero, ds.test, 10), ndcg_at_k(displayed, ideal, 10));
}

TEST(OfflineEval, MeanOverQueries) {
  const Dataset ds = generate_synthetic({1, 4, 8, 3, 4}, 6);
  RankerParams p{Architecture{ArchKind::Linear, 3}, {0.3, -0.1, 0.9}};
  double manual = 0.0;
  for (const auto& q : ds.test) {
    std::vector<Query> single{q};
    manual += offline_eval(p, single, 10);
  }
  EXPECT_NEAR(offline_eval(p, ds.test, 10), manual / ds.test.size(), 1e-12);
  EXPECT_THROW(offline_eval(p, {}, 10), Error);
}

TEST(RankDocs, StableTieBreakByDocIndex) {
  Query q;
  q.query_id = "t";
  for (int i = 0; i < 4; ++i) q.docs.push_back({i, {1.0}, 0});
  RankerParams p{Architecture{ArchKind::Linear, 1}, {0.0}};  // all scores tie
  EXPECT_EQ(rank_docs(p, q), (std::vector<int>{0, 1, 2, 3}));
}

}  // namespace
}  // namespace foltr
