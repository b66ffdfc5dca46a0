// Click simulation: cascade click model (CCM) with the perfect, navigational,
// informational and poison instantiations, plus a position-based model (PBM).
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "foltr/core.hpp"

namespace foltr {

using ClickVector = std::vector<bool>;  // one flag per displayed rank

constexpr int kSerpCap = 10;

/// Cascade model: the user scans top to bottom, clicks with a per-grade
/// probability and, after a click, stops browsing with a per-grade probability.
struct CcmSpec {
  std::string name;
  Vec click_prob;  // indexed by relevance grade
  Vec stop_prob;

  void validate() const {
    if (click_prob.size() != stop_prob.size() || click_prob.empty())
      throw ConfigError("ccm: click/stop tables must be non-empty and equally sized");
    for (double p : click_prob)
      if (p < 0.0 || p > 1.0) throw ConfigError("ccm: click probability outside [0,1]");
    for (double p : stop_prob)
      if (p < 0.0 || p > 1.0) throw ConfigError("ccm: stop probability outside [0,1]");
  }
};

/// Position-based model: rank k is examined with probability (1/k)^eta,
/// independently across ranks.
struct PbmSpec {
  double eta = 1.0;
  Vec click_prob;

  void validate() const {
    if (eta < 0.0) throw ConfigError("pbm: eta must be nonnegative");
    if (click_prob.empty()) throw ConfigError("pbm: click table must be non-empty");
    for (double p : click_prob)
      if (p < 0.0 || p > 1.0) throw ConfigError("pbm: click probability outside [0,1]");
  }
};

// Built-in CCM instantiations. The poison row is the reverse of the perfect
// click probabilities with all stop probabilities zero.
inline CcmSpec ccm_spec(const std::string& name, int max_grade) {
  const bool five = max_grade >= 3;
  CcmSpec spec;
  spec.name = name;
  if (name == "perfect") {
    spec.click_prob = five ? Vec{0.0, 0.2, 0.4, 0.8, 1.0} : Vec{0.0, 0.5, 1.0};
    spec.stop_prob = five ? Vec{0.0, 0.0, 0.0, 0.0, 0.0} : Vec{0.0, 0.0, 0.0};
  } else if (name == "navigational") {
    spec.click_prob = five ? Vec{0.05, 0.3, 0.5, 0.7, 0.95} : Vec{0.05, 0.5, 0.95};
    spec.stop_prob = five ? Vec{0.2, 0.3, 0.5, 0.7, 0.9} : Vec{0.2, 0.5, 0.9};
  } else if (name == "informational") {
    spec.click_prob = five ? Vec{0.4, 0.6, 0.7, 0.8, 0.9} : Vec{0.4, 0.7, 0.9};
    spec.stop_prob = five ? Vec{0.1, 0.2, 0.3, 0.4, 0.5} : Vec{0.1, 0.3, 0.5};
  } else if (name == "poison") {
    spec.click_prob = five ? Vec{1.0, 0.8, 0.4, 0.2, 0.0} : Vec{1.0, 0.5, 0.0};
    spec.stop_prob = five ? Vec{0.0, 0.0, 0.0, 0.0, 0.0} : Vec{0.0, 0.0, 0.0};
  } else {
    throw ConfigError("unknown click model instantiation '" + name + "'");
  }
  spec.validate();
  return spec;
}

inline ClickVector simulate_ccm(const CcmSpec& spec, const std::vector<int>& displayed_grades,
                                Rng& rng) {
  ClickVector clicks(displayed_grades.size(), false);
  for (std::size_t rank = 0; rank < displayed_grades.size(); ++rank) {
    const int grade = displayed_grades[rank];
    if (grade < 0 || grade >= static_cast<int>(spec.click_prob.size()))
      throw ConfigError("ccm: grade " + std::to_string(grade) + " not covered by spec");
    if (rng.uniform() < spec.click_prob[grade]) {
      clicks[rank] = true;
      if (rng.uniform() < spec.stop_prob[grade]) break;  // no examination after stop
    }
  }
  return clicks;
}

inline ClickVector simulate_pbm(const PbmSpec& spec, const std::vector<int>& displayed_grades,
                                Rng& rng) {
  ClickVector clicks(displayed_grades.size(), false);
  for (std::size_t rank = 0; rank < displayed_grades.size(); ++rank) {
    const int grade = displayed_grades[rank];
    if (grade < 0 || grade >= static_cast<int>(spec.click_prob.size()))
      throw ConfigError("pbm: grade " + std::to_string(grade) + " not covered by spec");
    const double examine = std::pow(1.0 / static_cast<double>(rank + 1), spec.eta);
    if (rng.uniform() < examine * spec.click_prob[grade]) clicks[rank] = true;
  }
  return clicks;
}

/// Tagged union over the two click models so simulation loops stay generic.
struct ClickSimulator {
  enum class Kind { Ccm, Pbm };
  Kind kind = Kind::Ccm;
  CcmSpec ccm;
  PbmSpec pbm;

  static ClickSimulator make_ccm(CcmSpec spec) {
    ClickSimulator s;
    s.kind = Kind::Ccm;
    s.ccm = std::move(spec);
    return s;
  }
  static ClickSimulator make_pbm(PbmSpec spec) {
    ClickSimulator s;
    s.kind = Kind::Pbm;
    s.pbm = std::move(spec);
    return s;
  }

  ClickVector simulate(const std::vector<int>& displayed_grades, Rng& rng) const {
    return kind == Kind::Ccm ? simulate_ccm(ccm, displayed_grades, rng)
                             : simulate_pbm(pbm, displayed_grades, rng);
  }
};

}  // namespace foltr
