// Wires a parsed ExperimentConfig into datasets, partitions and seeded runs,
// including the evolution-strategies optimizer loop, and renders the CSV
// artifacts (trace.csv, final.csv, config.lock).
#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "foltr/config.hpp"
#include "foltr/federation.hpp"
#include "foltr/foltres.hpp"
#include "foltr/metrics.hpp"
#include "foltr/unlearning.hpp"

namespace foltr {

/// Relative dataset paths resolve against $FOLTR_DATA_ROOT when it is set.
inline std::string resolve_data_path(const std::string& path) {
  namespace fs = std::filesystem;
  if (path.empty() || fs::path(path).is_absolute()) return path;
  if (const char* root = std::getenv("FOLTR_DATA_ROOT"); root != nullptr && *root != '\0')
    return (fs::path(root) / path).string();
  return path;
}

inline Dataset build_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset_kind == "synthetic") return generate_synthetic(cfg.synthetic, cfg.synthetic_seed);
  std::ifstream train(resolve_data_path(cfg.train_path));
  if (!train) throw ConfigError("dataset.train: cannot open '" + cfg.train_path + "'");
  std::ifstream test(resolve_data_path(cfg.test_path));
  if (!test) throw ConfigError("dataset.test: cannot open '" + cfg.test_path + "'");
  return load_dataset(train, test, cfg.dataset_name);
}

inline PartitionPlan build_partition(const ExperimentConfig& cfg, const Dataset& ds,
                                     std::uint64_t rep_seed) {
  Rng rng(derive_seed(rep_seed, {kSeedPartition}));
  if (cfg.partition_kind == "iid") return partition_iid(cfg.round.num_clients);
  if (cfg.partition_kind == "label_skew")
    return partition_label_skew(ds, cfg.round.num_clients, cfg.labels_per_client, rng);
  if (cfg.partition_kind == "quantity_skew")
    return partition_quantity_skew(cfg.round.num_clients, cfg.queries_per_round);
  if (cfg.partition_kind == "intent_skew")
    return partition_intent_skew(ds, cfg.round.num_clients, cfg.intents, rng);
  std::ifstream in(resolve_data_path(cfg.partition_file));
  if (!in) throw ConfigError("partition.file: cannot open '" + cfg.partition_file + "'");
  return read_partition_plan(in);
}

inline std::vector<ClickSimulator> build_clicks(const ExperimentConfig& cfg, const Dataset& ds) {
  if (!cfg.custom_click_probs.empty() &&
      static_cast<int>(cfg.custom_click_probs.size()) != ds.max_grade + 1)
    throw ConfigError("clicks.click_probs: need one probability per relevance grade");

  std::vector<ClickSimulator> sims;
  sims.reserve(cfg.round.num_clients);
  for (int c = 0; c < cfg.round.num_clients; ++c) {
    if (cfg.click_model == "ccm") {
      CcmSpec spec;
      if (!cfg.custom_click_probs.empty()) {
        spec.name = "custom";
        spec.click_prob = cfg.custom_click_probs;
        spec.stop_prob = cfg.custom_stop_probs;
        spec.validate();
      } else {
        const auto& variant =
            cfg.click_variants.size() == 1 ? cfg.click_variants[0] : cfg.click_variants[c];
        spec = ccm_spec(variant, ds.max_grade);
      }
      sims.push_back(ClickSimulator::make_ccm(std::move(spec)));
    } else {
      PbmSpec pbm;
      pbm.eta = cfg.pbm_etas.size() == 1 ? cfg.pbm_etas[0] : cfg.pbm_etas[c];
      pbm.click_prob = cfg.custom_click_probs.empty() ? ccm_spec("perfect", ds.max_grade).click_prob
                                                      : cfg.custom_click_probs;
      pbm.validate();
      sims.push_back(ClickSimulator::make_pbm(pbm));
    }
  }
  return sims;
}

inline RunSpec build_run_spec(const ExperimentConfig& cfg, const Dataset& ds,
                              const PartitionPlan& plan,
                              const std::vector<ClickSimulator>& clicks, std::uint64_t rep_seed) {
  RunSpec spec;
  spec.dataset = &ds;
  spec.plan = &plan;
  spec.arch = cfg.arch;
  spec.arch.feature_dim = ds.feature_dim;
  spec.round = cfg.round;
  spec.client_clicks = clicks;
  spec.attack = cfg.attack;
  spec.privacy = cfg.privacy;
  spec.seed = rep_seed;
  spec.threads = cfg.threads;
  spec.online_gamma = cfg.online_gamma;
  spec.metrics_k = cfg.metrics_k;
  return spec;
}

// ---------------------------------------------------------------------------
// FOLtR-ES round loop. Each client evaluates its seed-determined perturbation
// (antithetic signs alternate across its B interactions) on deterministically
// ranked SERPs, privatizes the per-interaction MaxRR, and messages the
// server; the server ascends the regenerated gradient estimate.

inline RunResult run_foltres(const RunSpec& spec, const FoltresConfig& es) {
  const Dataset& ds = *spec.dataset;
  const PartitionPlan& plan = *spec.plan;
  spec.round.validate();

  EsState state;
  state.sigma = es.sigma;
  Rng init_rng(derive_seed(spec.seed, {kSeedInit}));
  RankerParams global = init_ranker(spec.arch, init_rng);
  state.mean = global.weights;

  PrivatizationSpec privatization;
  privatization.p = es.privatization_p;
  privatization.grid = maxrr_grid();

  AdamOptimizer adam;
  adam.lr = es.lr;

  const int n_clients = spec.round.num_clients;
  std::vector<OnlineAccumulator> online(n_clients);
  for (auto& acc : online) acc.gamma = spec.online_gamma;

  RunResult result;
  result.trace.push_back({0, offline_eval(global, ds.test, spec.metrics_k), 0.0, 0.0});

  struct ClientOut {
    std::vector<EsMessage> messages;
    std::vector<double> serp_ndcgs;
    double maxrr_sum = 0.0;
    int count = 0;
  };

  for (int round = 1; round <= spec.round.global_rounds; ++round) {
    std::vector<ClientOut> outs(n_clients);
    detail::parallel_for(n_clients, spec.threads, [&](int client) {
      Rng rng(derive_seed(spec.seed, {spec.round_seed_tag, static_cast<std::uint64_t>(client),
                                      static_cast<std::uint64_t>(round)}));
      const std::uint64_t pert_seed = rng.next_u64();
      const ClientDomain& domain = plan.clients[client];
      const int interactions =
          domain.queries_per_round > 0 ? domain.queries_per_round : spec.round.local_interactions;
      ClientOut& out = outs[client];

      for (int b = 0; b < interactions; ++b) {
        const int sign = (b % 2 == 0) ? +1 : -1;
        RankerParams perturbed;
        perturbed.arch = global.arch;
        perturbed.weights = state.mean;
        axpy(sign * state.sigma, perturbation(pert_seed, state.mean.size()), perturbed.weights);

        const auto sampled = detail::sample_client_query(ds, plan, client, {}, rng);
        const Query& q = ds.train[sampled.query_index];
        // Deterministic ranking of the candidate subset, truncated to the SERP.
        std::vector<std::pair<double, int>> scored;
        for (int d : sampled.candidates)
          scored.emplace_back(score(perturbed, q.docs[d].features), d);
        std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
          if (a.first != b.first) return a.first > b.first;
          return a.second < b.second;
        });
        const int k = std::min<int>(kSerpCap, static_cast<int>(scored.size()));
        std::vector<int> displayed_grades, ideal;
        for (int i = 0; i < k; ++i) displayed_grades.push_back(sampled.click_grades[scored[i].second]);
        for (int d : sampled.candidates) ideal.push_back(sampled.click_grades[d]);

        const ClickVector clicks = spec.client_clicks[client].simulate(displayed_grades, rng);
        const double metric = max_rr(clicks);
        const double reported = es.privatization_p < 1.0
                                    ? privatize(privatization, metric, rng)
                                    : metric;
        out.messages.push_back({pert_seed, reported, sign});
        out.serp_ndcgs.push_back(ndcg_at_k(displayed_grades, ideal, spec.metrics_k));
        out.maxrr_sum += metric;
        ++out.count;
      }
    });

    std::vector<EsMessage> messages;
    for (const auto& out : outs)
      messages.insert(messages.end(), out.messages.begin(), out.messages.end());
    const ModelDelta gradient = es_server_gradient(messages, state);
    if (es.adam) adam.step(state.mean, gradient);
    else axpy(es.lr, gradient, state.mean);
    global.weights = state.mean;

    for (int c = 0; c < n_clients; ++c)
      for (double v : outs[c].serp_ndcgs) online[c].step(v);

    TraceRow row;
    row.round = round;
    row.offline_ndcg = offline_eval(global, ds.test, spec.metrics_k);
    Vec sums(n_clients);
    for (int c = 0; c < n_clients; ++c) sums[c] = online[c].sum;
    row.online_cum_ndcg = pairwise_sum(sums) / static_cast<double>(n_clients);
    double maxrr = 0.0;
    int count = 0;
    for (const auto& out : outs) {
      maxrr += out.maxrr_sum;
      count += out.count;
    }
    row.maxrr_mean = count > 0 ? maxrr / count : 0.0;
    result.trace.push_back(row);
  }
  result.final_params = std::move(global);
  return result;
}

// ---------------------------------------------------------------------------
// CSV artifacts. Columns are fixed and versioned; floats print with %.10g so
// identical doubles produce identical bytes.

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

constexpr const char* kTraceHeader = "round,offline_ndcg10,online_cum_ndcg10,maxrr_mean,rule,attack,seed";

inline void append_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace,
                             const std::string& rule, const std::string& attack,
                             std::uint64_t seed) {
  for (const auto& row : trace) {
    out << row.round << ',' << format_double(row.offline_ndcg) << ','
        << format_double(row.online_cum_ndcg) << ',' << format_double(row.maxrr_mean) << ','
        << rule << ',' << attack << ',' << seed << '\n';
  }
}

struct ExperimentArtifacts {
  std::string trace_csv;
  std::string final_csv;
  std::string config_lock;
  std::vector<RunResult> repetitions;
};

/// Runs every repetition of the configured experiment and renders the CSV
/// artifacts in memory; the CLI persists them to the output directory.
inline ExperimentArtifacts run_configured_experiment(const ExperimentConfig& cfg) {
  const Dataset ds = build_dataset(cfg);
  const std::vector<ClickSimulator> clicks = build_clicks(cfg, ds);

  ExperimentArtifacts artifacts;
  std::ostringstream trace, final_rows;
  trace << kTraceHeader << '\n';
  final_rows << "repetition,seed,final_offline_ndcg10,online_cum_ndcg10,maxrr_mean,rule,attack\n";

  const std::string rule = rule_name(cfg.round.rule);
  const std::string attack = AttackConfig::kind_name(cfg.attack.kind);

  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    const std::uint64_t rep_seed =
        derive_seed(cfg.master_seed, {kSeedRepetition, static_cast<std::uint64_t>(rep)});
    const PartitionPlan plan = build_partition(cfg, ds, rep_seed);
    RunSpec spec = build_run_spec(cfg, ds, plan, clicks, rep_seed);

    RunResult result = cfg.optimizer == OptimizerKind::Foltres ? run_foltres(spec, cfg.foltres)
                                                               : run_experiment(spec);
    append_trace_csv(trace, result.trace, rule, attack, rep_seed);
    const TraceRow& last = result.trace.back();
    final_rows << rep << ',' << rep_seed << ',' << format_double(last.offline_ndcg) << ','
               << format_double(last.online_cum_ndcg) << ',' << format_double(last.maxrr_mean)
               << ',' << rule << ',' << attack << '\n';
    artifacts.repetitions.push_back(std::move(result));
  }

  artifacts.trace_csv = trace.str();
  artifacts.final_csv = final_rows.str();
  std::ostringstream lock;
  write_resolved_config(lock, cfg);
  artifacts.config_lock = lock.str();
  return artifacts;
}

/// The unlearning benchmark driven by the config's unlearn block; the report
/// is a single fixed-schema CSV row.
inline std::string run_configured_unlearning(const ExperimentConfig& cfg,
                                             BenchmarkReport* report_out = nullptr) {
  const Dataset ds = build_dataset(cfg);
  const std::vector<ClickSimulator> clicks = build_clicks(cfg, ds);
  const std::uint64_t rep_seed = derive_seed(cfg.master_seed, {kSeedRepetition, 0});
  const PartitionPlan plan = build_partition(cfg, ds, rep_seed);
  const RunSpec spec = build_run_spec(cfg, ds, plan, clicks, rep_seed);

  const BenchmarkReport report = unlearning_benchmark(spec, cfg.unlearn);
  if (report_out != nullptr) *report_out = report;

  std::ostringstream out;
  out << "honest_10h0m,poisoned_9h1m,retrained_9h0m,unlearned,gap_vs_retrain,"
         "unlearn_interactions,retrain_interactions\n";
  out << format_double(report.honest_all) << ',' << format_double(report.poisoned) << ','
      << format_double(report.retrained) << ',' << format_double(report.unlearned) << ','
      << format_double(report.gap_vs_retrain) << ',' << report.unlearn_interactions << ','
      << report.retrain_interactions << '\n';
  return out.str();
}

}  // namespace foltr
