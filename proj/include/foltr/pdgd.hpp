// Pairwise Differentiable Gradient Descent: Plackett-Luce result-list
// sampling, click-based preference inference, the position-debiasing pair
// weight rho and the pairwise gradient estimate.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "foltr/clickmodels.hpp"
#include "foltr/core.hpp"
#include "foltr/data.hpp"
#include "foltr/metrics.hpp"
#include "foltr/rankers.hpp"

namespace foltr {

struct RankedList {
  std::vector<int> doc_indices;  // the SERP, in display order
  double log_prob = 0.0;         // log-probability of sampling this list
};

struct PreferencePair {
  int preferred = 0;      // d_k, the clicked document
  int not_preferred = 0;  // d_l
  double rho = 0.0;
};

namespace detail {

inline double logsumexp(const Vec& values, const std::vector<bool>& active) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values.size(); ++i)
    if (active[i]) mx = std::max(mx, values[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (active[i]) s += std::exp(values[i] - mx);
  return mx + std::log(s);
}

inline double stable_logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

/// Scores for an explicit candidate subset of a query's documents.
inline Vec score_candidates(const RankerParams& params, const Query& query,
                            const std::vector<int>& candidates) {
  Vec scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    scores[i] = score(params, query.docs[candidates[i]].features);
  return scores;
}

/// Sequential sampling without replacement from the softmax of the remaining
/// candidates' scores; the returned log_prob is the sum of per-draw log
/// probabilities. The max score is subtracted before exponentiation.
inline RankedList sample_serp_from(const Vec& scores, const std::vector<int>& candidates, int k,
                                   Rng& rng) {
  if (candidates.empty()) throw Error("sample_serp: empty candidate set");
  k = std::min<int>(k, static_cast<int>(candidates.size()));

  RankedList list;
  list.doc_indices.reserve(k);
  std::vector<bool> active(candidates.size(), true);
  for (int draw = 0; draw < k; ++draw) {
    const double lse = detail::logsumexp(scores, active);
    const double u = rng.uniform();
    double cum = 0.0;
    int chosen = -1;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (!active[i]) continue;
      cum += std::exp(scores[i] - lse);
      if (u < cum) {
        chosen = static_cast<int>(i);
        break;
      }
    }
    if (chosen < 0) {  // u landed in the rounding tail; take the last active
      for (std::size_t i = candidates.size(); i-- > 0;)
        if (active[i]) {
          chosen = static_cast<int>(i);
          break;
        }
    }
    active[chosen] = false;
    list.doc_indices.push_back(candidates[chosen]);
    list.log_prob += scores[chosen] - lse;
  }
  return list;
}

inline RankedList sample_serp(const RankerParams& params, const Query& query, int k, Rng& rng) {
  std::vector<int> candidates(query.docs.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = static_cast<int>(i);
  return sample_serp_from(score_candidates(params, query, candidates), candidates, k, rng);
}

/// Log-probability of ranking `list` under the Plackett-Luce model over the
/// candidate set, computed as a sum of log terms.
inline double list_log_probability(const Vec& scores, const std::vector<int>& candidates,
                                   const std::vector<int>& list) {
  std::map<int, std::size_t> pos;  // doc index -> candidate slot
  for (std::size_t i = 0; i < candidates.size(); ++i) pos[candidates[i]] = i;
  std::vector<bool> active(candidates.size(), true);
  double logp = 0.0;
  for (int doc : list) {
    const auto it = pos.find(doc);
    if (it == pos.end()) throw Error("list_log_probability: document not in candidate set");
    logp += scores[it->second] - detail::logsumexp(scores, active);
    active[it->second] = false;
  }
  return logp;
}

/// Preference inference. The documents assumed observed but not clicked are
/// every unclicked document ranked above the last click plus the first
/// unclicked document below it; each clicked document is preferred over each
/// of those.
inline std::vector<std::pair<int, int>> infer_preferences(const RankedList& list,
                                                          const ClickVector& clicks) {
  if (clicks.size() != list.doc_indices.size())
    throw Error("infer_preferences: clicks length must equal list length");
  std::vector<std::size_t> clicked, observed_unclicked;
  std::size_t last_click = 0;
  for (std::size_t i = 0; i < clicks.size(); ++i)
    if (clicks[i]) {
      clicked.push_back(i);
      last_click = i;
    }
  if (clicked.empty()) return {};
  for (std::size_t i = 0; i < clicks.size(); ++i) {
    if (clicks[i]) continue;
    if (i < last_click) observed_unclicked.push_back(i);
    else if (i > last_click) {
      observed_unclicked.push_back(i);  // first unclicked below the last click
      break;
    }
  }
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(clicked.size() * observed_unclicked.size());
  for (std::size_t k : clicked)
    for (std::size_t l : observed_unclicked)
      pairs.emplace_back(list.doc_indices[k], list.doc_indices[l]);
  return pairs;
}

namespace detail {

inline std::vector<int> swapped_list(const std::vector<int>& list, int d_k, int d_l) {
  std::vector<int> swapped = list;
  for (auto& d : swapped) {
    if (d == d_k) d = d_l;
    else if (d == d_l) d = d_k;
  }
  return swapped;
}

/// rho from the two list log-probabilities: P(R*) / (P(R) + P(R*)). The two
/// branches keep the exponent nonpositive, and make rho and its complement
/// (the same ratio seen from the swapped list) sum to exactly 1.
inline double rho_from_log_probs(double log_p_r, double log_p_r_star) {
  if (log_p_r_star <= log_p_r) {
    const double r = std::exp(log_p_r_star - log_p_r);
    return r / (1.0 + r);
  }
  const double r = std::exp(log_p_r - log_p_r_star);
  return 1.0 - r / (1.0 + r);
}

}  // namespace detail

inline double pair_weight_rho_from(const Vec& scores, const std::vector<int>& candidates,
                                   const std::vector<int>& list, int d_k, int d_l) {
  const double log_p_r = list_log_probability(scores, candidates, list);
  const double log_p_star =
      list_log_probability(scores, candidates, detail::swapped_list(list, d_k, d_l));
  return detail::rho_from_log_probs(log_p_r, log_p_star);
}

inline double pair_weight_rho(const RankerParams& params, const Query& query,
                              const RankedList& list, int d_k, int d_l) {
  std::vector<int> candidates(query.docs.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = static_cast<int>(i);
  return pair_weight_rho_from(score_candidates(params, query, candidates), candidates,
                              list.doc_indices, d_k, d_l);
}

/// The pairwise gradient estimate: for every inferred preference d_k > d_l,
/// add rho * e^{f(d_k)} e^{f(d_l)} / (e^{f(d_k)} + e^{f(d_l)})^2 times the
/// difference of score gradients. The softmax factor is evaluated as
/// sigmoid(x) * sigmoid(-x) of the score difference.
///
/// rho is computed from per-draw denominator sums cached once per call: the
/// swapped list R* shares every numerator with R and differs only in the
/// denominators between the two swapped positions, so
///   log P(R)/P(R*) = sum over that range of (log S*_t - log S_t).
inline ModelDelta pdgd_gradient_from(const RankerParams& params, const Query& query,
                                     const Vec& scores, const std::vector<int>& candidates,
                                     const RankedList& list, const ClickVector& clicks) {
  ModelDelta delta(params.weights.size(), 0.0);
  const auto pairs = infer_preferences(list, clicks);
  if (pairs.empty()) return delta;

  std::map<int, std::size_t> slot;
  for (std::size_t i = 0; i < candidates.size(); ++i) slot[candidates[i]] = i;

  double max_score = scores[0];
  for (double s : scores) max_score = std::max(max_score, s);
  Vec exp_scores(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) exp_scores[i] = std::exp(scores[i] - max_score);

  // denom[t]: sum of exp scores still in the running at draw t of the list.
  const std::size_t k = list.doc_indices.size();
  Vec denom(k);
  {
    std::vector<bool> active(candidates.size(), true);
    for (std::size_t t = 0; t < k; ++t) {
      double s = 0.0;
      for (std::size_t i = 0; i < candidates.size(); ++i)
        if (active[i]) s += exp_scores[i];
      denom[t] = s;
      active[slot[list.doc_indices[t]]] = false;
    }
  }
  std::map<int, std::size_t> position;
  for (std::size_t t = 0; t < k; ++t) position[list.doc_indices[t]] = t;

  std::map<int, ModelDelta> grad_cache;
  const auto grad_of = [&](int doc) -> const ModelDelta& {
    auto it = grad_cache.find(doc);
    if (it == grad_cache.end())
      it = grad_cache.emplace(doc, score_gradient(params, query.docs[doc].features)).first;
    return it->second;
  };

  for (const auto& [d_k, d_l] : pairs) {
    const std::size_t p_k = position[d_k], p_l = position[d_l];
    const std::size_t lo = std::min(p_k, p_l), hi = std::max(p_k, p_l);
    const double e_early = exp_scores[slot[list.doc_indices[lo]]];
    const double e_late = exp_scores[slot[list.doc_indices[hi]]];
    double log_ratio = 0.0;  // log P(R) - log P(R*)
    for (std::size_t t = lo + 1; t <= hi; ++t) {
      double d_star = (denom[t] + e_early) - e_late;
      if (d_star <= 0.0) d_star = std::numeric_limits<double>::min();
      log_ratio += std::log(d_star) - std::log(denom[t]);
    }
    const double rho = detail::stable_logistic(-log_ratio);

    const double x = scores[slot[d_k]] - scores[slot[d_l]];
    const double pair_factor = detail::stable_logistic(x) * detail::stable_logistic(-x);
    const double w = rho * pair_factor;
    axpy(w, grad_of(d_k), delta);
    axpy(-w, grad_of(d_l), delta);
  }
  return delta;
}

inline ModelDelta pdgd_gradient(const RankerParams& params, const Query& query,
                                const RankedList& list, const ClickVector& clicks) {
  std::vector<int> candidates(query.docs.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = static_cast<int>(i);
  return pdgd_gradient_from(params, query, score_candidates(params, query, candidates),
                            candidates, list, clicks);
}

struct InteractionResult {
  RankerParams params;
  RankedList list;
  ClickVector clicks;
};

/// One full PDGD interaction over an explicit candidate subset: sample a SERP,
/// simulate clicks against `click_grades` (which may be intent-relabeled),
/// compute the gradient and ascend.
inline InteractionResult pdgd_interaction_on(const RankerParams& params, const Query& query,
                                             const std::vector<int>& candidates,
                                             const std::vector<int>& click_grades,
                                             const ClickSimulator& clicks_spec, double lr,
                                             Rng& rng) {
  const Vec scores = score_candidates(params, query, candidates);
  RankedList list = sample_serp_from(scores, candidates, kSerpCap, rng);
  std::vector<int> displayed;
  displayed.reserve(list.doc_indices.size());
  for (int d : list.doc_indices) displayed.push_back(click_grades[d]);
  ClickVector clicks = clicks_spec.simulate(displayed, rng);
  const ModelDelta delta = pdgd_gradient_from(params, query, scores, candidates, list, clicks);

  InteractionResult result;
  result.params = apply_update(params, delta, lr);
  result.list = std::move(list);
  result.clicks = std::move(clicks);
  return result;
}

inline InteractionResult pdgd_interaction(const RankerParams& params, const Query& query,
                                          const ClickSimulator& clicks_spec, double lr,
                                          Rng& rng) {
  std::vector<int> candidates(query.docs.size());
  std::vector<int> grades(query.docs.size());
  for (std::size_t i = 0; i < query.docs.size(); ++i) {
    candidates[i] = static_cast<int>(i);
    grades[i] = query.docs[i].relevance;
  }
  return pdgd_interaction_on(params, query, candidates, grades, clicks_spec, lr, rng);
}

}  // namespace foltr
