// Federated unlearning by calibrated replay: historical local updates are
// snapshotted every snapshot_interval rounds; removing a client replays the
// remaining clients' stored update magnitudes along freshly computed
// directions. Evaluation uses the poisoned-client harness.
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "foltr/core.hpp"
#include "foltr/federation.hpp"

namespace foltr {

struct UpdateSnapshotLog {
  struct Entry {
    int round = 0;
    Vec delta;  // theta_local - theta_global at that round
  };
  std::map<int, std::vector<Entry>> per_client;
  int snapshot_interval = 1;

  void record(int client, int round, const Vec& delta) {
    auto& entries = per_client[client];
    if (!entries.empty() && entries.back().round >= round)
      throw Error("snapshot log: rounds must be strictly increasing");
    entries.push_back({round, delta});
  }

  const Entry& at(int client, std::size_t index) const {
    const auto it = per_client.find(client);
    if (it == per_client.end() || index >= it->second.size())
      throw Error("snapshot log: missing snapshot for client " + std::to_string(client) +
                  " at index " + std::to_string(index));
    return it->second[index];
  }

  // Directory layout: <dir>/client_<id>/round_<t>.delta
  void save(const std::string& dir) const {
    namespace fs = std::filesystem;
    for (const auto& [client, entries] : per_client) {
      const fs::path cdir = fs::path(dir) / ("client_" + std::to_string(client));
      fs::create_directories(cdir);
      for (const auto& e : entries) {
        std::ofstream out(cdir / ("round_" + std::to_string(e.round) + ".delta"));
        out << "foltr-delta v1\n" << e.delta.size() << "\n";
        out.precision(17);
        for (double v : e.delta) out << v << "\n";
      }
    }
  }

  static UpdateSnapshotLog load(const std::string& dir, int snapshot_interval) {
    namespace fs = std::filesystem;
    UpdateSnapshotLog log;
    log.snapshot_interval = snapshot_interval;
    std::map<int, std::map<int, Vec>> found;
    for (const auto& centry : fs::directory_iterator(dir)) {
      const std::string name = centry.path().filename().string();
      if (name.rfind("client_", 0) != 0) continue;
      const int client = std::stoi(name.substr(7));
      for (const auto& fentry : fs::directory_iterator(centry.path())) {
        const std::string fname = fentry.path().filename().string();
        if (fname.rfind("round_", 0) != 0) continue;
        const int round = std::stoi(fname.substr(6));
        std::ifstream in(fentry.path());
        std::string header;
        std::getline(in, header);
        if (header != "foltr-delta v1") throw Error("snapshot: bad header in " + fname);
        std::size_t n;
        in >> n;
        Vec delta(n);
        for (auto& v : delta)
          if (!(in >> v)) throw Error("snapshot: truncated delta in " + fname);
        found[client][round] = std::move(delta);
      }
    }
    for (auto& [client, by_round] : found)
      for (auto& [round, delta] : by_round) log.record(client, round, delta);
    return log;
  }
};

struct UnlearnConfig {
  int unlearned_client = 0;   // c*
  int local_steps = 3;        // n', below the original n_i
  int snapshot_interval = 10; // delta-t
  double poison_z = 2.0;      // evaluation-harness poison strength

  void validate() const {
    if (local_steps < 1) throw ConfigError("unlearn: local_steps must be >= 1");
    if (snapshot_interval < 1) throw ConfigError("unlearn: snapshot_interval must be >= 1");
  }
};

/// Calibration: keep the stored update's magnitude, take the fresh update's
/// direction. A zero fresh update has no direction and yields a zero delta.
inline ModelDelta calibrate_update(const ModelDelta& historical, const ModelDelta& fresh) {
  check_same_size(historical, fresh, "calibrate_update");
  const double fresh_norm = l2_norm(fresh);
  if (fresh_norm == 0.0) return ModelDelta(historical.size(), 0.0);
  return scaled(fresh, l2_norm(historical) / fresh_norm);
}

/// The evaluation-harness poisoned update: -z * delta - (z+1) * theta_global,
/// equivalent to replacing the local model with -z * theta_local.
inline ModelDelta poison_eval_update(const ModelDelta& local_delta, const Vec& global_params,
                                     double z) {
  check_same_size(local_delta, global_params, "poison_eval_update");
  ModelDelta out(local_delta.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = -z * local_delta[i] - (z + 1.0) * global_params[i];
  return out;
}

struct UnlearnResult {
  RankerParams params;
  std::vector<TraceRow> trace;
  long long fresh_interactions = 0;  // exact bookkeeping for efficiency claims
};

/// Replays the stored history without the departed client: the global model
/// is re-initialized exactly as in the original run; each remaining client
/// runs n' fresh interactions per stored round, calibrates against its stored
/// delta, and the server aggregates the calibrated deltas with the weighted
/// average.
inline UnlearnResult run_unlearning(const UpdateSnapshotLog& log, const RunSpec& original_spec,
                                    const UnlearnConfig& config) {
  config.validate();
  const Dataset& ds = *original_spec.dataset;
  const PartitionPlan& plan = *original_spec.plan;

  std::vector<int> retained;
  for (int c = 0; c < original_spec.round.num_clients; ++c)
    if (c != config.unlearned_client) retained.push_back(c);
  if (retained.empty()) throw ConfigError("unlearn: no clients remain");

  std::size_t rounds = 0;
  for (int c : retained) {
    const auto it = log.per_client.find(c);
    if (it == log.per_client.end())
      throw Error("unlearn: no snapshots stored for client " + std::to_string(c));
    if (rounds == 0) rounds = it->second.size();
    else if (it->second.size() != rounds)
      throw Error("unlearn: snapshot count mismatch for client " + std::to_string(c));
  }

  Rng init_rng(derive_seed(original_spec.seed, {kSeedInit}));
  RankerParams global = init_ranker(original_spec.arch, init_rng);

  RoundConfig local = original_spec.round;
  local.local_interactions = config.local_steps;

  UnlearnResult result;
  result.trace.push_back({0, offline_eval(global, ds.test), 0.0, 0.0});

  const int n_retained = static_cast<int>(retained.size());
  for (std::size_t idx = 0; idx < rounds; ++idx) {
    std::vector<LocalUpdate> updates(n_retained);
    detail::parallel_for(n_retained, original_spec.threads, [&](int slot) {
      const int client = retained[slot];
      const int stored_round = log.at(client, idx).round;
      Rng rng(derive_seed(original_spec.seed,
                          {kSeedUnlearnRound, static_cast<std::uint64_t>(client),
                           static_cast<std::uint64_t>(stored_round)}));
      LocalUpdate u = client_round(global, ds, plan, client, local,
                                   original_spec.client_clicks[client], {}, rng);
      const Vec fresh = vec_sub(u.params.weights, global.weights);
      u.params.weights = calibrate_update(log.at(client, idx).delta, fresh);
      updates[slot] = std::move(u);
    });
    result.fresh_interactions += static_cast<long long>(n_retained) * config.local_steps;

    // Weighted average of the calibrated deltas, applied to the global model.
    double total = 0.0;
    for (const auto& u : updates) total += u.n_c;
    Vec step(global.weights.size(), 0.0);
    Vec terms(updates.size());
    for (std::size_t c = 0; c < step.size(); ++c) {
      for (std::size_t i = 0; i < updates.size(); ++i)
        terms[i] = (updates[i].n_c / total) * updates[i].params.weights[c];
      step[c] = pairwise_sum(terms);
    }
    axpy(1.0, step, global.weights);

    result.trace.push_back(
        {static_cast<int>(idx) + 1, offline_eval(global, ds.test), 0.0, 0.0});
  }
  result.params = std::move(global);
  return result;
}

// ---------------------------------------------------------------------------
// The benchmark harness: three reference configurations plus the unlearning
// run under shared seeds.

struct BenchmarkReport {
  double honest_all = 0.0;       // 10H-0M: every client honest
  double poisoned = 0.0;         // 9H-1M: c* poisons its updates
  double retrained = 0.0;        // 9H-0M: honest clients retrained from scratch
  double unlearned = 0.0;        // unlearning applied to the poisoned run
  double gap_vs_retrain = 0.0;   // |unlearned - retrained|
  long long unlearn_interactions = 0;
  long long retrain_interactions = 0;
  std::vector<TraceRow> unlearn_trace;
  UpdateSnapshotLog snapshots;   // recorded during the 9H-1M run
};

/// Runs 10H-0M, 9H-1M (with snapshots), 9H-0M and the unlearning replay, all
/// from the same seed, and reports final offline nDCG@10 per configuration.
inline BenchmarkReport unlearning_benchmark(const RunSpec& base, const UnlearnConfig& config) {
  config.validate();
  BenchmarkReport report;

  RunSpec honest = base;
  honest.poison_eval_client = -1;
  honest.snapshot_interval = 0;
  report.honest_all = run_experiment(honest).trace.back().offline_ndcg;

  UpdateSnapshotLog log;
  log.snapshot_interval = config.snapshot_interval;
  RunSpec poisoned = base;
  poisoned.poison_eval_client = config.unlearned_client;
  poisoned.poison_z = config.poison_z;
  poisoned.snapshot_interval = config.snapshot_interval;
  poisoned.snapshot_sink = [&log](int client, int round, const Vec& delta) {
    log.record(client, round, delta);
  };
  report.poisoned = run_experiment(poisoned).trace.back().offline_ndcg;

  RunSpec retrain = base;
  retrain.poison_eval_client = -1;
  retrain.snapshot_interval = 0;
  for (int c = 0; c < base.round.num_clients; ++c)
    if (c != config.unlearned_client) retrain.active_clients.push_back(c);
  report.retrained = run_experiment(retrain).trace.back().offline_ndcg;
  report.retrain_interactions = static_cast<long long>(retrain.active_clients.size()) *
                                base.round.local_interactions * base.round.global_rounds;

  UnlearnResult unlearned = run_unlearning(log, base, config);
  report.unlearned = unlearned.trace.back().offline_ndcg;
  report.unlearn_interactions = unlearned.fresh_interactions;
  report.gap_vs_retrain = std::abs(report.unlearned - report.retrained);
  report.unlearn_trace = std::move(unlearned.trace);
  report.snapshots = std::move(log);
  return report;
}

}  // namespace foltr
