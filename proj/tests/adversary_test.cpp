#include "foltr/adversary.hpp"

#include <cmath>

#include <gtest/gtest.h>

namespace foltr {
namespace {

TEST(DataPoisonSpec, MatchesThePoisonTableRows) {
  const CcmSpec five = data_poison_click_spec(4);
  EXPECT_EQ(five.click_prob, (Vec{1.0, 0.8, 0.4, 0.2, 0.0}));
  EXPECT_EQ(five.stop_prob, Vec(5, 0.0));
  EXPECT_EQ(five.click_prob[0], 1.0);
  EXPECT_EQ(five.click_prob[4], 0.0);

  const CcmSpec three = data_poison_click_spec(2);
  EXPECT_EQ(three.click_prob, (Vec{1.0, 0.5, 0.0}));
  EXPECT_EQ(three.stop_prob, Vec(3, 0.0));
}

TEST(LieAttack, IdenticalUpdatesHaveZeroDeviation) {
  const std::vector<Vec> colluders(4, Vec{0.5, -1.0});
  EXPECT_EQ(lie_attack(colluders, 2.0), (Vec{0.5, -1.0}));
}

TEST(LieAttack, WorkedOneDimensionalExample) {
  const std::vector<Vec> colluders{{0.0}, {2.0}};
  // mean 1, population std 1: mu - z*sigma = 0 at z = 1.
  EXPECT_NEAR(lie_attack(colluders, 1.0)[0], 0.0, 1e-12);
  EXPECT_NEAR(lie_attack(colluders, 0.0)[0], 1.0, 1e-12);
  EXPECT_THROW(lie_attack({}, 1.0), Error);
}

TEST(LieAttack, MatchesDirectRecomputation) {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const int m = 2 + static_cast<int>(rng.uniform_int(4));
    std::vector<Vec> colluders(m, Vec(3));
    for (auto& u : colluders)
      for (auto& v : u) v = rng.uniform_range(-2, 2);
    const double z = rng.uniform_range(0.0, 2.0);
    const Vec crafted = lie_attack(colluders, z);
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (const auto& u : colluders) mean += u[c];
      mean /= m;
      double var = 0.0;
      for (const auto& u : colluders) var += (u[c] - mean) * (u[c] - mean);
      var /= m;
      EXPECT_NEAR(crafted[c], mean - z * std::sqrt(var), 1e-12);
    }
  }
}

AttackConfig fang_config() {
  AttackConfig cfg;
  cfg.kind = AttackKind::FangKrum;
  cfg.attacker_fraction = 0.2;
  cfg.fang_lambda_init = 10.0;
  cfg.fang_lambda_threshold = 1e-5;
  return cfg;
}

TEST(FangKrum, PerturbationEntriesAreSigns) {
  Rng rng(2);
  std::vector<Vec> updates(5, Vec(3));
  for (auto& u : updates)
    for (auto& v : u) v = rng.uniform_range(-1, 1);
  const Vec global{0.0, 0.0, 0.0};
  const Vec crafted = fang_krum_attack(updates, global, 1, AttackKnowledge::Full, fang_config(),
                                       default_krum_probe());
  // crafted = global + lambda * s with s in {-1, 0, +1}: all coordinates share
  // |value| = lambda (global is zero and no coordinate mean is exactly zero).
  const double lambda = std::abs(crafted[0]);
  for (double v : crafted) EXPECT_NEAR(std::abs(v), lambda, 1e-12);
}

TEST(FangKrum, ExhaustedSearchReturnsTheThresholdPoint) {
  // A probe that never accepts forces the search to the threshold.
  const std::vector<Vec> updates(5, Vec{1.0, 1.0});
  const Vec global{0.0, 0.0};
  AttackConfig cfg = fang_config();
  const Vec crafted =
      fang_krum_attack(updates, global, 1, AttackKnowledge::Full, cfg,
                       [](const std::vector<Vec>&, int) { return false; });
  for (double v : crafted) EXPECT_NEAR(std::abs(v), cfg.fang_lambda_threshold, 1e-15);
}

TEST(FangKrum, SelectedBySeededBruteForceEvaluation) {
  // Benign updates scatter around the incoming global model, as local PDGD
  // steps would; the colluders' shared crafted point must win Krum.
  Rng rng(3);
  const Vec global{1.0, -0.5};
  std::vector<Vec> updates;
  for (int i = 0; i < 10; ++i)
    updates.push_back(
        {global[0] + rng.uniform_range(-0.2, 0.2), global[1] + rng.uniform_range(-0.2, 0.2)});
  const int m = 2;
  const Vec crafted = fang_krum_attack(updates, global, m, AttackKnowledge::Full, fang_config(),
                                       default_krum_probe());
  // Replay the aggregation the attacker targeted: a crafted copy must win.
  std::vector<Vec> submitted(m, crafted);
  for (int i = m; i < 10; ++i) submitted.push_back(updates[i]);
  EXPECT_LT(krum_select(submitted, m), m);
  EXPECT_EQ(krum(submitted, m), crafted);
  // And the accepted lambda is meaningfully larger than the threshold floor.
  EXPECT_GT(l2_distance(crafted, global), 10 * fang_config().fang_lambda_threshold);
}

TEST(FangTrimmed, ValuesLieOutsideTheBenignRangeOnTheAttackedSide) {
  AttackConfig cfg = fang_config();
  cfg.kind = AttackKind::FangTrimmed;
  Rng rng(4);
  // All benign coordinates equal 1.0; global above the mean forces s = +1.
  const std::vector<Vec> updates(6, Vec{1.0, 1.0});
  const Vec global{2.0, 2.0};
  const auto crafted = fang_trimmed_attack(updates, global, 2, AttackKnowledge::Full, cfg, rng);
  ASSERT_EQ(crafted.size(), 2u);
  for (const auto& u : crafted)
    for (double v : u) {
      EXPECT_GE(v, 1.0);   // at or beyond the benign maximum
      EXPECT_LE(v, 2.0);   // within the stretch factor b = 2
    }
}

TEST(FangTrimmed, EachAttackerSamplesIndependently) {
  AttackConfig cfg = fang_config();
  cfg.kind = AttackKind::FangTrimmed;
  Rng rng(5);
  std::vector<Vec> colluders;
  for (int i = 0; i < 3; ++i) colluders.push_back({rng.uniform_range(0.5, 1.0)});
  const Vec global{5.0};
  const auto crafted =
      fang_trimmed_attack(colluders, global, 3, AttackKnowledge::Partial, cfg, rng);
  EXPECT_NE(crafted[0], crafted[1]);
  EXPECT_NE(crafted[1], crafted[2]);
}

TEST(FangAttacks, PartialKnowledgeInterfaceAcceptsOnlyTheColludersSlice) {
  AttackConfig cfg = fang_config();
  Rng rng(6);
  const std::vector<Vec> six(6, Vec{1.0});
  const Vec global{0.0};
  EXPECT_THROW(
      fang_krum_attack(six, global, 3, AttackKnowledge::Partial, cfg, default_krum_probe()),
      Error);
  cfg.kind = AttackKind::FangTrimmed;
  EXPECT_THROW(fang_trimmed_attack(six, global, 3, AttackKnowledge::Partial, cfg, rng), Error);
}

TEST(FangTrimmed, ShiftsTrimmedMeanInTheAttackDirection) {
  AttackConfig cfg = fang_config();
  cfg.kind = AttackKind::FangTrimmed;
  Rng rng(6);
  const int n = 10, m = 4;
  std::vector<Vec> honest(n, Vec(3));
  for (auto& u : honest)
    for (auto& v : u) v = rng.uniform_range(0.0, 1.0);
  // Global far above every benign value: the no-attack update direction is
  // downward, so the reversed direction s is +1 on every coordinate.
  const Vec global{10.0, 10.0, 10.0};

  Rng attack_rng(7);
  const auto crafted =
      fang_trimmed_attack(honest, global, m, AttackKnowledge::Full, cfg, attack_rng);
  std::vector<Vec> attacked = honest;
  for (int i = 0; i < m; ++i) attacked[i] = crafted[i];

  const Vec base = trimmed_mean(honest, m);
  const Vec shifted = trimmed_mean(attacked, m);
  for (int c = 0; c < 3; ++c) EXPECT_GE(shifted[c], base[c]);
}

TEST(AttackConfig, FractionBoundsAndAttackerCounts) {
  AttackConfig cfg;
  cfg.kind = AttackKind::DataPoison;
  cfg.attacker_fraction = 0.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.attacker_fraction = 0.4;
  cfg.validate();
  EXPECT_EQ(cfg.attacker_count(10), 4);
  cfg.attacker_fraction = 0.1;
  EXPECT_EQ(cfg.attacker_count(10), 1);
  AttackConfig none;
  EXPECT_EQ(none.attacker_count(10), 0);
}

}  // namespace
}  // namespace foltr
