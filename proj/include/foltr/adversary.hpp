// Untargeted poisoning attacks: the poison click model for data poisoning,
// Little-Is-Enough model poisoning, and the optimization-based attacks
// tailored to Krum-family and TrimmedMean/Median aggregation.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "foltr/clickmodels.hpp"
#include "foltr/core.hpp"
#include "foltr/robustagg.hpp"

namespace foltr {

enum class AttackKind { None, DataPoison, Lie, FangKrum, FangTrimmed };

enum class AttackKnowledge { Partial, Full };

struct AttackConfig {
  AttackKind kind = AttackKind::None;
  double attacker_fraction = 0.0;  // of the client population, below 0.5
  AttackKnowledge knowledge = AttackKnowledge::Partial;
  double lie_z = 1.0;
  double fang_lambda_init = 10.0;
  double fang_lambda_threshold = 1e-5;
  double fang_range_factor = 2.0;  // b, the sampling-interval stretch

  void validate() const {
    if (kind == AttackKind::None) return;
    if (attacker_fraction <= 0.0 || attacker_fraction >= 0.5)
      throw ConfigError("attack: attacker_fraction must lie in (0, 0.5)");
    if (fang_lambda_init <= 0.0 || fang_lambda_threshold <= 0.0)
      throw ConfigError("attack: fang lambda parameters must be positive");
  }

  int attacker_count(int num_clients) const {
    if (kind == AttackKind::None) return 0;
    return std::max(1, static_cast<int>(std::lround(attacker_fraction * num_clients)));
  }

  static const char* kind_name(AttackKind k) {
    switch (k) {
      case AttackKind::None: return "none";
      case AttackKind::DataPoison: return "data_poison";
      case AttackKind::Lie: return "lie";
      case AttackKind::FangKrum: return "fang_krum";
      case AttackKind::FangTrimmed: return "fang_trimmed";
    }
    return "none";
  }
};

/// The poison instantiation of the cascade model: click probabilities are the
/// reverse of the perfect user's, all stop probabilities zero.
inline CcmSpec data_poison_click_spec(int max_grade) { return ccm_spec("poison", max_grade); }

/// Little Is Enough: all colluders submit mu - z * sigma of their
/// before-attack updates, coordinate-wise (sigma is the population std).
inline Vec lie_attack(const std::vector<Vec>& colluder_updates, double z) {
  if (colluder_updates.empty()) throw Error("lie_attack: empty collusion set");
  const std::size_t dim = colluder_updates[0].size();
  const double n = static_cast<double>(colluder_updates.size());
  Vec crafted(dim, 0.0);
  for (std::size_t c = 0; c < dim; ++c) {
    double mean = 0.0;
    for (const auto& u : colluder_updates) mean += u[c];
    mean /= n;
    double var = 0.0;
    for (const auto& u : colluder_updates) var += (u[c] - mean) * (u[c] - mean);
    var /= n;
    crafted[c] = mean - z * std::sqrt(var);
  }
  return crafted;
}

namespace detail {

inline Vec knowledge_mean(const std::vector<Vec>& knowledge) {
  Vec mu(knowledge[0].size(), 0.0);
  for (const auto& u : knowledge) axpy(1.0, u, mu);
  for (auto& v : mu) v /= static_cast<double>(knowledge.size());
  return mu;
}

inline Vec reversed_direction(const Vec& mu, const Vec& global) {
  Vec s(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double d = mu[i] - global[i];
    s[i] = d > 0.0 ? -1.0 : (d < 0.0 ? 1.0 : 0.0);
  }
  return s;
}

}  // namespace detail

/// Evaluates Krum on a hypothetical update set and reports whether the
/// crafted update (occupying the first m slots) would be selected.
using KrumProbe = std::function<bool(const std::vector<Vec>& hypothetical, int m)>;

inline KrumProbe default_krum_probe() {
  return [](const std::vector<Vec>& hypothetical, int m) {
    return krum_select(hypothetical, m) < m;
  };
}

/// Attack on Krum/Multi-Krum: craft theta_g + lambda * s with
/// s = -sign(mu - theta_g) and shrink lambda by halving until the probe
/// confirms Krum selects the crafted update. All attackers submit it.
///
/// `visible_updates` is exactly the slice the attacker may read: the m
/// colluders' before-attack updates first, followed (under full knowledge
/// only) by every benign update. Partial-knowledge callers pass just the
/// colluders, so the interface itself enforces the knowledge boundary.
inline Vec fang_krum_attack(const std::vector<Vec>& visible_updates, const Vec& global, int m,
                            AttackKnowledge knowledge, const AttackConfig& config,
                            const KrumProbe& probe) {
  if (m < 1 || m > static_cast<int>(visible_updates.size()))
    throw Error("fang_krum_attack: invalid attacker count");
  if (knowledge == AttackKnowledge::Partial &&
      static_cast<int>(visible_updates.size()) != m)
    throw Error("fang_krum_attack: partial knowledge sees only the colluders' updates");
  const Vec mu = detail::knowledge_mean(visible_updates);
  const Vec s = detail::reversed_direction(mu, global);

  const auto crafted_at = [&](double lambda) {
    Vec w = global;
    axpy(lambda, s, w);
    return w;
  };
  // The attacker simulates the aggregation it can see: its crafted copies in
  // the first m slots, believed benign updates in the rest. Under partial
  // knowledge the colluders' own before-attack updates stand in for the
  // benign population.
  const std::vector<Vec> believed_benign(
      knowledge == AttackKnowledge::Full ? visible_updates.begin() + m : visible_updates.begin(),
      visible_updates.end());

  double lambda = config.fang_lambda_init;
  while (lambda >= config.fang_lambda_threshold) {
    const Vec w = crafted_at(lambda);
    std::vector<Vec> hypothetical(m, w);
    hypothetical.insert(hypothetical.end(), believed_benign.begin(), believed_benign.end());
    if (static_cast<int>(hypothetical.size()) >= m + 3 && probe(hypothetical, m)) return w;
    lambda *= 0.5;
  }
  return crafted_at(config.fang_lambda_threshold);  // search exhausted
}

/// Attack on TrimmedMean/Median: per coordinate, push past the benign maximum
/// (s_j = +1) or minimum (s_j = -1); each attacker samples independently from
/// the stretched interval. `visible_updates` as in fang_krum_attack.
inline std::vector<Vec> fang_trimmed_attack(const std::vector<Vec>& visible_updates,
                                            const Vec& global, int m, AttackKnowledge knowledge,
                                            const AttackConfig& config, Rng& rng) {
  if (m < 1 || m > static_cast<int>(visible_updates.size()))
    throw Error("fang_trimmed_attack: invalid attacker count");
  if (knowledge == AttackKnowledge::Partial &&
      static_cast<int>(visible_updates.size()) != m)
    throw Error("fang_trimmed_attack: partial knowledge sees only the colluders' updates");
  const std::vector<Vec>& knowledge_set = visible_updates;
  const Vec mu = detail::knowledge_mean(knowledge_set);
  const Vec s = detail::reversed_direction(mu, global);
  const std::size_t dim = global.size();
  const double b = config.fang_range_factor;

  Vec lo(dim), hi(dim);
  for (std::size_t c = 0; c < dim; ++c) {
    double mx = knowledge_set[0][c], mn = knowledge_set[0][c];
    for (const auto& u : knowledge_set) {
      mx = std::max(mx, u[c]);
      mn = std::min(mn, u[c]);
    }
    if (s[c] > 0.0) {
      lo[c] = mx;
      hi[c] = mx > 0.0 ? b * mx : mx / b;
    } else if (s[c] < 0.0) {
      hi[c] = mn;
      lo[c] = mn > 0.0 ? mn / b : b * mn;
    } else {
      lo[c] = hi[c] = mu[c];  // no benign drift on this coordinate
    }
    if (lo[c] > hi[c]) std::swap(lo[c], hi[c]);
  }

  std::vector<Vec> crafted(m, Vec(dim));
  for (int a = 0; a < m; ++a)
    for (std::size_t c = 0; c < dim; ++c) crafted[a][c] = rng.uniform_range(lo[c], hi[c]);
  return crafted;
}

}  // namespace foltr
