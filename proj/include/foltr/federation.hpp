// Federated round orchestration: broadcast the global model, run local PDGD
// interactions per client, apply attacks/privacy, aggregate with the
// configured rule, and emit per-round metrics.
#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <thread>
#include <vector>

#include "foltr/adversary.hpp"
#include "foltr/clickmodels.hpp"
#include "foltr/core.hpp"
#include "foltr/data.hpp"
#include "foltr/metrics.hpp"
#include "foltr/pdgd.hpp"
#include "foltr/privacy.hpp"
#include "foltr/rankers.hpp"
#include "foltr/robustagg.hpp"

namespace foltr {

struct LocalUpdate {
  int client_id = 0;
  RankerParams params;  // post-local-training theta
  int n_c = 1;          // interaction count, the FedAvg weight
};

enum class AggregationRule { FedAvg, Krum, MultiKrum, TrimmedMean, Median };

inline const char* rule_name(AggregationRule r) {
  switch (r) {
    case AggregationRule::FedAvg: return "fedavg";
    case AggregationRule::Krum: return "krum";
    case AggregationRule::MultiKrum: return "multi_krum";
    case AggregationRule::TrimmedMean: return "trimmed_mean";
    case AggregationRule::Median: return "median";
  }
  return "fedavg";
}

struct FedProxConfig {
  double mu = 0.0;  // 0 disables the proximal pull
};

struct DataShareConfig {
  double alpha = 0.0;            // fraction of train queries shared globally
  int warmup_interactions = 0;   // central PDGD steps on the shared set
};

struct RoundConfig {
  int num_clients = 1;
  int local_interactions = 5;  // B
  int global_rounds = 1;       // T
  double learning_rate = 0.1;
  AggregationRule rule = AggregationRule::FedAvg;
  FedProxConfig fedprox;
  DataShareConfig datashare;
  int trim_beta = -1;    // -1: defaults to the attacker count
  int multikrum_f = -1;  // -1: defaults to n - m

  void validate() const {
    if (num_clients < 1) throw ConfigError("federation: num_clients must be >= 1");
    if (local_interactions < 1) throw ConfigError("federation: local_interactions must be >= 1");
    if (global_rounds < 0) throw ConfigError("federation: global_rounds must be >= 0");
    if (learning_rate <= 0.0) throw ConfigError("federation: learning_rate must be positive");
    if (fedprox.mu < 0.0) throw ConfigError("federation: fedprox mu must be nonnegative");
    if (datashare.alpha < 0.0 || datashare.alpha > 1.0)
      throw ConfigError("federation: datashare alpha must lie in [0,1]");
  }
};

/// Weighted average sum_c (n_c / sum n) theta_c, pairwise-summed per
/// coordinate so the result is independent of update order to ~1e-12.
inline RankerParams fedavg(const std::vector<LocalUpdate>& updates) {
  if (updates.empty()) throw Error("fedavg: empty update set");
  const std::size_t dim = updates[0].params.weights.size();
  double total = 0.0;
  for (const auto& u : updates) {
    check_same_size(u.params.weights, updates[0].params.weights, "fedavg");
    if (u.n_c < 1) throw Error("fedavg: interaction counts must be >= 1");
    total += static_cast<double>(u.n_c);
  }
  RankerParams out;
  out.arch = updates[0].params.arch;
  out.weights.assign(dim, 0.0);
  Vec terms(updates.size());
  for (std::size_t c = 0; c < dim; ++c) {
    for (std::size_t i = 0; i < updates.size(); ++i)
      terms[i] = (static_cast<double>(updates[i].n_c) / total) * updates[i].params.weights[c];
    out.weights[c] = pairwise_sum(terms);
  }
  return out;
}

/// One FedProx-corrected ascent step: the proximal gradient mu (theta -
/// theta_global) is subtracted from the PDGD ascent direction.
inline RankerParams fedprox_local_step(const RankerParams& params,
                                       const RankerParams& global_params,
                                       const ModelDelta& pdgd_delta, double lr, double mu) {
  check_same_size(params.weights, global_params.weights, "fedprox_local_step");
  check_same_size(params.weights, pdgd_delta, "fedprox_local_step");
  RankerParams out = params;
  for (std::size_t i = 0; i < out.weights.size(); ++i)
    out.weights[i] += lr * (pdgd_delta[i] - mu * (params.weights[i] - global_params.weights[i]));
  return out;
}

/// Draws the globally shared query subset: ceil(alpha * |train|) distinct
/// queries, appended to every client's sampling domain by the round runner.
inline std::vector<int> data_share_queries(const Dataset& ds, double alpha, Rng& rng) {
  if (alpha <= 0.0) return {};
  const int total = static_cast<int>(ds.train.size());
  const int count = std::min<int>(total, static_cast<int>(std::ceil(alpha * total)));
  std::vector<int> order(total);
  for (int i = 0; i < total; ++i) order[i] = i;
  rng.shuffle(order);
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

// ---------------------------------------------------------------------------
// Run specification and per-round loop.

struct TraceRow {
  int round = 0;
  double offline_ndcg = 0.0;
  double online_cum_ndcg = 0.0;  // mean over clients of the discounted sums
  double maxrr_mean = 0.0;       // mean MaxRR over this round's interactions
};

struct RunSpec {
  const Dataset* dataset = nullptr;
  const PartitionPlan* plan = nullptr;
  Architecture arch;
  RoundConfig round;
  std::vector<ClickSimulator> client_clicks;  // benign spec per client
  AttackConfig attack;
  std::optional<DpConfig> privacy;
  std::uint64_t seed = 0;  // repetition seed; streams derive from it
  int threads = 1;
  std::vector<int> active_clients;  // empty: all clients participate
  std::uint64_t round_seed_tag = kSeedClientRound;
  double online_gamma = 0.9995;
  int metrics_k = 10;

  // Unlearning instrumentation: c* has its returned model replaced by
  // -z * theta after every local phase.
  int poison_eval_client = -1;
  double poison_z = 0.0;

  // Snapshot sink, called as (client_id, round, delta) at rounds
  // {1, 1+dt, 1+2dt, ...} when snapshot_interval > 0.
  int snapshot_interval = 0;
  std::function<void(int, int, const Vec&)> snapshot_sink;
};

struct RunResult {
  std::vector<TraceRow> trace;
  RankerParams final_params;
};

namespace detail {

inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += threads) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

struct InteractionStats {
  double ndcg_sum = 0.0;  // per-interaction SERP nDCG, for the online metric
  std::vector<double> serp_ndcgs;
  double maxrr_sum = 0.0;
  int count = 0;
};

/// Samples one query for a client according to the partition plan (and the
/// shared data-sharing pool), producing the candidate subset and the grades
/// its click oracle judges against.
struct SampledQuery {
  int query_index = 0;
  std::vector<int> candidates;
  std::vector<int> click_grades;  // indexed by doc index within the query
};

inline SampledQuery sample_client_query(const Dataset& ds, const PartitionPlan& plan,
                                        int client_id, const std::vector<int>& shared, Rng& rng) {
  const ClientDomain& domain = plan.clients[client_id];
  SampledQuery out;

  const bool has_owned = !domain.owned.empty();
  const std::size_t pool = (has_owned ? domain.owned.size() : ds.train.size()) + shared.size();
  const std::size_t pick = static_cast<std::size_t>(rng.uniform_int(pool));

  const auto full_candidates = [&](int qi) {
    const auto& q = ds.train[qi];
    std::vector<int> c(q.docs.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = static_cast<int>(i);
    return c;
  };

  if (has_owned && pick < domain.owned.size()) {
    out.query_index = domain.owned[pick].query_index;
    out.candidates = domain.owned[pick].doc_indices;
  } else if (has_owned) {
    out.query_index = shared[pick - domain.owned.size()];
    out.candidates = full_candidates(out.query_index);
  } else if (pick < ds.train.size()) {
    out.query_index = static_cast<int>(pick);
    out.candidates = full_candidates(out.query_index);
  } else {
    out.query_index = shared[pick - ds.train.size()];
    out.candidates = full_candidates(out.query_index);
  }

  const Query& q = ds.train[out.query_index];
  out.click_grades.resize(q.docs.size());
  if (domain.intent >= 0 && !plan.relabel.empty()) {
    const auto& table = plan.relabel.labels[out.query_index][domain.intent];
    for (std::size_t d = 0; d < q.docs.size(); ++d)
      out.click_grades[d] = table[d] ? ds.max_grade : 0;
  } else {
    for (std::size_t d = 0; d < q.docs.size(); ++d) out.click_grades[d] = q.docs[d].relevance;
  }
  return out;
}

}  // namespace detail

/// One client's local phase: B (or the quantity-skew count) PDGD interactions
/// starting from the incoming global model.
inline LocalUpdate client_round(const RankerParams& global_params, const Dataset& ds,
                                const PartitionPlan& plan, int client_id,
                                const RoundConfig& config, const ClickSimulator& clicks,
                                const std::vector<int>& shared, Rng& rng,
                                detail::InteractionStats* stats = nullptr) {
  const ClientDomain& domain = plan.clients[client_id];
  const int interactions =
      domain.queries_per_round > 0 ? domain.queries_per_round : config.local_interactions;

  RankerParams params = global_params;
  for (int b = 0; b < interactions; ++b) {
    const auto sampled = detail::sample_client_query(ds, plan, client_id, shared, rng);
    const Query& q = ds.train[sampled.query_index];

    InteractionResult result;
    if (config.fedprox.mu > 0.0) {
      const Vec scores = score_candidates(params, q, sampled.candidates);
      RankedList list = sample_serp_from(scores, sampled.candidates, kSerpCap, rng);
      std::vector<int> displayed;
      for (int d : list.doc_indices) displayed.push_back(sampled.click_grades[d]);
      ClickVector cv = clicks.simulate(displayed, rng);
      const ModelDelta delta = pdgd_gradient_from(params, q, scores, sampled.candidates, list, cv);
      result.params =
          fedprox_local_step(params, global_params, delta, config.learning_rate, config.fedprox.mu);
      result.list = std::move(list);
      result.clicks = std::move(cv);
    } else {
      result = pdgd_interaction_on(params, q, sampled.candidates, sampled.click_grades, clicks,
                                   config.learning_rate, rng);
    }
    params = std::move(result.params);

    if (stats != nullptr) {
      std::vector<int> displayed, ideal;
      for (int d : result.list.doc_indices) displayed.push_back(sampled.click_grades[d]);
      for (int d : sampled.candidates) ideal.push_back(sampled.click_grades[d]);
      const double serp_ndcg = ndcg_at_k(displayed, ideal, kSerpCap);
      stats->serp_ndcgs.push_back(serp_ndcg);
      stats->ndcg_sum += serp_ndcg;
      stats->maxrr_sum += max_rr(result.clicks);
      ++stats->count;
    }
  }

  LocalUpdate update;
  update.client_id = client_id;
  update.params = std::move(params);
  update.n_c = interactions;
  return update;
}

/// Aggregates one round of local updates under the configured rule. `m` is
/// the assumed attacker count for the robust rules.
inline RankerParams aggregate(const std::vector<LocalUpdate>& updates, const RoundConfig& config,
                              int m) {
  if (config.rule == AggregationRule::FedAvg) return fedavg(updates);

  std::vector<Vec> thetas;
  thetas.reserve(updates.size());
  for (const auto& u : updates) thetas.push_back(u.params.weights);
  const int n = static_cast<int>(thetas.size());

  RankerParams out;
  out.arch = updates[0].params.arch;
  switch (config.rule) {
    case AggregationRule::Krum:
      out.weights = krum(thetas, m);
      break;
    case AggregationRule::MultiKrum: {
      const int f = config.multikrum_f > 0 ? config.multikrum_f : n - m;
      out.weights = multi_krum(thetas, m, f);
      break;
    }
    case AggregationRule::TrimmedMean: {
      const int beta = config.trim_beta >= 0 ? config.trim_beta : m;
      out.weights = trimmed_mean(thetas, beta);
      break;
    }
    case AggregationRule::Median:
      out.weights = coord_median(thetas);
      break;
    case AggregationRule::FedAvg:
      break;  // handled above
  }
  return out;
}

/// Executes T global rounds and returns the per-round metric trace. Results
/// are identical for any thread count: every client draws from its own
/// (seed, client, round) stream and the server folds in client order.
inline RunResult run_experiment(const RunSpec& spec) {
  const Dataset& ds = *spec.dataset;
  const PartitionPlan& plan = *spec.plan;
  spec.round.validate();
  spec.attack.validate();
  if (static_cast<int>(spec.client_clicks.size()) != spec.round.num_clients)
    throw ConfigError("run: need one click spec per client");
  if (spec.privacy) spec.privacy->validate();

  std::vector<int> active = spec.active_clients;
  if (active.empty()) {
    active.resize(spec.round.num_clients);
    for (int c = 0; c < spec.round.num_clients; ++c) active[c] = c;
  }
  const int n_active = static_cast<int>(active.size());
  const int m = spec.attack.attacker_count(spec.round.num_clients);

  // Attackers under data poisoning click like the poison user; model
  // poisoning manipulates the returned updates below instead.
  std::vector<ClickSimulator> clicks = spec.client_clicks;
  if (spec.attack.kind == AttackKind::DataPoison)
    for (int c = 0; c < m; ++c)
      clicks[c] = ClickSimulator::make_ccm(data_poison_click_spec(ds.max_grade));

  Rng init_rng(derive_seed(spec.seed, {kSeedInit}));
  RankerParams global = init_ranker(spec.arch, init_rng);

  Rng share_rng(derive_seed(spec.seed, {kSeedDataShare}));
  const std::vector<int> shared = data_share_queries(ds, spec.round.datashare.alpha, share_rng);
  if (!shared.empty() && spec.round.datashare.warmup_interactions > 0) {
    Rng warm_rng(derive_seed(spec.seed, {kSeedDataShare, 1}));
    for (int i = 0; i < spec.round.datashare.warmup_interactions; ++i) {
      const int qi = shared[warm_rng.uniform_int(shared.size())];
      global = pdgd_interaction(global, ds.train[qi], clicks[active[0]], spec.round.learning_rate,
                                warm_rng)
                   .params;
    }
  }

  std::vector<OnlineAccumulator> online(n_active);
  for (auto& acc : online) acc.gamma = spec.online_gamma;
  RunResult result;
  result.trace.push_back({0, offline_eval(global, ds.test, spec.metrics_k), 0.0, 0.0});

  for (int round = 1; round <= spec.round.global_rounds; ++round) {
    std::vector<LocalUpdate> updates(n_active);
    std::vector<detail::InteractionStats> stats(n_active);

    detail::parallel_for(n_active, spec.threads, [&](int slot) {
      const int client = active[slot];
      Rng rng(derive_seed(spec.seed, {spec.round_seed_tag, static_cast<std::uint64_t>(client),
                                      static_cast<std::uint64_t>(round)}));
      updates[slot] = client_round(global, ds, plan, client, spec.round, clicks[client], shared,
                                   rng, &stats[slot]);
    });

    // Per-client online accumulators advance in interaction order.
    for (int slot = 0; slot < n_active; ++slot)
      for (double v : stats[slot].serp_ndcgs) online[slot].step(v);

    if (spec.snapshot_interval > 0 && (round - 1) % spec.snapshot_interval == 0 &&
        spec.snapshot_sink) {
      for (int slot = 0; slot < n_active; ++slot)
        spec.snapshot_sink(active[slot], round,
                           vec_sub(updates[slot].params.weights, global.weights));
    }

    // Unlearning-evaluation poisoning: c* returns -z * theta. z = 0 means no
    // poisoning at all, not a zeroed model.
    if (spec.poison_eval_client >= 0 && spec.poison_z != 0.0) {
      for (auto& u : updates)
        if (u.client_id == spec.poison_eval_client)
          u.params.weights = scaled(u.params.weights, -spec.poison_z);
    }

    // Model-poisoning attacks replace the colluders' updates (the first m
    // client ids). Partial knowledge passes only the colluders' slice of the
    // before-attack updates; full knowledge passes them all.
    if (m > 0 && (spec.attack.kind == AttackKind::Lie ||
                  spec.attack.kind == AttackKind::FangKrum ||
                  spec.attack.kind == AttackKind::FangTrimmed)) {
      // The attack receives exactly the slice its knowledge level may read:
      // colluders first, benign updates appended under full knowledge only.
      std::vector<Vec> visible;
      std::vector<int> malicious_slots;
      for (int slot = 0; slot < n_active; ++slot)
        if (updates[slot].client_id < m) {
          visible.push_back(updates[slot].params.weights);
          malicious_slots.push_back(slot);
        }
      const int m_present = static_cast<int>(malicious_slots.size());
      if (spec.attack.knowledge == AttackKnowledge::Full)
        for (int slot = 0; slot < n_active; ++slot)
          if (updates[slot].client_id >= m) visible.push_back(updates[slot].params.weights);

      if (m_present > 0) {
        if (spec.attack.kind == AttackKind::Lie) {
          const std::vector<Vec> colluders(visible.begin(), visible.begin() + m_present);
          const Vec crafted = lie_attack(colluders, spec.attack.lie_z);
          for (int slot : malicious_slots) updates[slot].params.weights = crafted;
        } else if (spec.attack.kind == AttackKind::FangKrum) {
          const Vec crafted =
              fang_krum_attack(visible, global.weights, m_present, spec.attack.knowledge,
                               spec.attack, default_krum_probe());
          for (int slot : malicious_slots) updates[slot].params.weights = crafted;
        } else {
          Rng attack_rng(
              derive_seed(spec.seed, {kSeedAttack, static_cast<std::uint64_t>(round)}));
          const auto crafted = fang_trimmed_attack(visible, global.weights, m_present,
                                                   spec.attack.knowledge, spec.attack, attack_rng);
          for (int i = 0; i < m_present; ++i)
            updates[malicious_slots[i]].params.weights = crafted[i];
        }
      }
    }

    // Client-side differential privacy, fresh noise per client per round.
    if (spec.privacy) {
      for (int slot = 0; slot < n_active; ++slot) {
        Rng dp_rng(derive_seed(spec.seed, {spec.round_seed_tag, static_cast<std::uint64_t>(
                                                                    active[slot]),
                                           static_cast<std::uint64_t>(round), 1}));
        updates[slot].params = privatize_update(updates[slot].params, *spec.privacy, dp_rng);
      }
    }

    global = aggregate(updates, spec.round, m);

    TraceRow row;
    row.round = round;
    row.offline_ndcg = offline_eval(global, ds.test, spec.metrics_k);
    Vec sums(n_active);
    for (int slot = 0; slot < n_active; ++slot) sums[slot] = online[slot].sum;
    row.online_cum_ndcg = pairwise_sum(sums) / static_cast<double>(n_active);
    double maxrr = 0.0;
    int count = 0;
    for (const auto& s : stats) {
      maxrr += s.maxrr_sum;
      count += s.count;
    }
    row.maxrr_mean = count > 0 ? maxrr / count : 0.0;
    result.trace.push_back(row);
  }

  result.final_params = std::move(global);
  return result;
}

}  // namespace foltr
