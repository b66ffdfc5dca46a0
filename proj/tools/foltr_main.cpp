// foltr: federated online learning-to-rank experiment runner.
//
// Subcommands:
//   simulate   run the configured experiment, write trace.csv/final.csv/config.lock
//   attack     simulate with a poisoning attack required in the config
//   unlearn    run the unlearning benchmark and write report.csv
//   partition  materialize the configured partition plan to a file
//   evaluate   score a checkpoint against a LETOR test file

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "foltr/experiment.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::int64_t seed = -1;
  int threads = 0;
  int repetitions = 0;
  bool dry_run = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_out = true) {
  cmd->add_option("--config", opts.config_path, "experiment config file")->required();
  if (needs_out) cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--seed", opts.seed, "override the master seed");
  cmd->add_option("--threads", opts.threads, "worker threads (results are thread-count independent)");
  cmd->add_option("--repetitions", opts.repetitions, "override the repetition count");
}

foltr::ExperimentConfig load_config(const CommonOpts& opts) {
  std::ifstream in(opts.config_path);
  if (!in) throw foltr::ConfigError("cannot open config file '" + opts.config_path + "'");
  const foltr::KvConfig kv = foltr::KvConfig::parse(in);
  foltr::ExperimentConfig cfg = foltr::load_experiment_config(kv);
  if (opts.seed >= 0) cfg.master_seed = static_cast<std::uint64_t>(opts.seed);
  if (opts.threads > 0) cfg.threads = opts.threads;
  if (opts.repetitions > 0) cfg.repetitions = opts.repetitions;
  return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw foltr::Error("cannot write " + path.string());
  out << content;
}

int run_simulate(const CommonOpts& opts, bool require_attack) {
  const foltr::ExperimentConfig cfg = load_config(opts);
  if (require_attack && cfg.attack.kind == foltr::AttackKind::None)
    throw foltr::ConfigError("attack.kind: the attack subcommand needs an attack configured");
  if (cfg.attack.kind == foltr::AttackKind::FangKrum &&
      cfg.round.rule == foltr::AggregationRule::FedAvg) {
    std::cerr << "warning: fang_krum is tailored to Krum-family rules but "
                 "federation.aggregation = fedavg\n";
  }
  if (opts.dry_run) {
    foltr::build_dataset(cfg);  // surfaces dataset errors before a long run
    std::cout << "config ok: " << opts.config_path << "\n";
    return 0;
  }

  const foltr::ExperimentArtifacts artifacts = foltr::run_configured_experiment(cfg);
  fs::create_directories(opts.out_dir);
  write_file(fs::path(opts.out_dir) / "trace.csv", artifacts.trace_csv);
  write_file(fs::path(opts.out_dir) / "final.csv", artifacts.final_csv);
  write_file(fs::path(opts.out_dir) / "config.lock", artifacts.config_lock);
  std::cout << "wrote " << opts.out_dir << "/trace.csv (" << artifacts.repetitions.size()
            << " repetition(s), final offline nDCG@" << cfg.metrics_k << " = "
            << foltr::format_double(artifacts.repetitions.back().trace.back().offline_ndcg)
            << ")\n";
  return 0;
}

int run_unlearn(const CommonOpts& opts) {
  const foltr::ExperimentConfig cfg = load_config(opts);
  if (opts.dry_run) {
    foltr::build_dataset(cfg);
    std::cout << "config ok: " << opts.config_path << "\n";
    return 0;
  }
  foltr::BenchmarkReport report;
  const std::string csv = foltr::run_configured_unlearning(cfg, &report);
  fs::create_directories(opts.out_dir);
  write_file(fs::path(opts.out_dir) / "report.csv", csv);
  report.snapshots.save((fs::path(opts.out_dir) / "snapshots").string());
  std::ostringstream lock;
  foltr::write_resolved_config(lock, cfg);
  write_file(fs::path(opts.out_dir) / "config.lock", lock.str());
  std::cout << "10H-0M " << foltr::format_double(report.honest_all) << ", 9H-1M "
            << foltr::format_double(report.poisoned) << ", 9H-0M "
            << foltr::format_double(report.retrained) << ", unlearned "
            << foltr::format_double(report.unlearned) << "\n";
  return 0;
}

int run_partition(const CommonOpts& opts, const std::string& out_file) {
  const foltr::ExperimentConfig cfg = load_config(opts);
  const foltr::Dataset ds = foltr::build_dataset(cfg);
  const std::uint64_t rep_seed = foltr::derive_seed(cfg.master_seed, {foltr::kSeedRepetition, 0});
  const foltr::PartitionPlan plan = foltr::build_partition(cfg, ds, rep_seed);
  std::ofstream out(out_file);
  if (!out) throw foltr::Error("cannot write " + out_file);
  foltr::write_partition_plan(out, plan);
  std::cout << "wrote " << out_file << " (" << plan.num_clients << " clients)\n";
  return 0;
}

int run_evaluate(const std::string& checkpoint, const std::string& data, int k) {
  std::ifstream ck(checkpoint);
  if (!ck) throw foltr::Error("cannot open checkpoint '" + checkpoint + "'");
  const foltr::RankerParams params = foltr::read_checkpoint(ck);
  std::ifstream in(foltr::resolve_data_path(data));
  if (!in) throw foltr::Error("cannot open data file '" + data + "'");
  int dim = params.arch.feature_dim;
  const std::vector<foltr::Query> queries = foltr::parse_letor(in, dim, dim);
  std::cout << foltr::format_double(foltr::offline_eval(params, queries, k)) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated online learning-to-rank simulation laboratory"};
  app.require_subcommand(1);

  CommonOpts sim_opts, attack_opts, unlearn_opts, part_opts;
  std::string partition_out = "partition.plan";
  std::string eval_checkpoint, eval_data;
  int eval_k = 10;

  CLI::App* simulate = app.add_subcommand("simulate", "run the configured experiment");
  add_common(simulate, sim_opts);
  simulate->add_flag("--dry-run", sim_opts.dry_run, "validate the config without running");

  CLI::App* attack = app.add_subcommand("attack", "run with the configured poisoning attack");
  add_common(attack, attack_opts);
  attack->add_flag("--dry-run", attack_opts.dry_run, "validate the config without running");

  CLI::App* unlearn = app.add_subcommand("unlearn", "run the unlearning benchmark");
  add_common(unlearn, unlearn_opts);
  unlearn->add_flag("--dry-run", unlearn_opts.dry_run, "validate the config without running");

  CLI::App* partition = app.add_subcommand("partition", "materialize a partition plan");
  add_common(partition, part_opts, /*needs_out=*/false);
  partition->add_option("--plan-out", partition_out, "output plan file");

  CLI::App* evaluate = app.add_subcommand("evaluate", "score a checkpoint on a test file");
  evaluate->add_option("--checkpoint", eval_checkpoint, "ranker checkpoint")->required();
  evaluate->add_option("--data", eval_data, "LETOR-format test file")->required();
  evaluate->add_option("--k", eval_k, "nDCG cutoff");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return run_simulate(sim_opts, false);
    if (attack->parsed()) return run_simulate(attack_opts, true);
    if (unlearn->parsed()) return run_unlearn(unlearn_opts);
    if (partition->parsed()) return run_partition(part_opts, partition_out);
    if (evaluate->parsed()) return run_evaluate(eval_checkpoint, eval_data, eval_k);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
