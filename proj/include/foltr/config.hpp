// Experiment configuration: a line-based `dotted.key = value` text format
// (nesting through the dots, `#` comments), parsed into a validated
// ExperimentConfig. The exact schema is documented in the README.
#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "foltr/adversary.hpp"
#include "foltr/core.hpp"
#include "foltr/data.hpp"
#include "foltr/federation.hpp"
#include "foltr/privacy.hpp"
#include "foltr/rankers.hpp"
#include "foltr/unlearning.hpp"

namespace foltr {

class KvConfig {
 public:
  static KvConfig parse(std::istream& in) {
    KvConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      const auto trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ParseError("expected 'key = value', got '" + trimmed + "'", line_no);
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) throw ParseError("empty key", line_no);
      cfg.values_[key] = value;
    }
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string require_string(const std::string& key) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(key + ": required key is missing");
    return it->second;
  }

  long long get_int(const std::string& key, long long fallback) const {
    const std::string raw = get_string(key, "");
    if (raw.empty()) return fallback;
    try {
      return std::stoll(raw);
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected an integer, got '" + raw + "'");
    }
  }

  double get_double(const std::string& key, double fallback) const {
    const std::string raw = get_string(key, "");
    if (raw.empty()) return fallback;
    try {
      return std::stod(raw);
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected a number, got '" + raw + "'");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const std::string raw = get_string(key, "");
    if (raw.empty()) return fallback;
    if (raw == "true" || raw == "1" || raw == "yes") return true;
    if (raw == "false" || raw == "0" || raw == "no") return false;
    throw ConfigError(key + ": expected true/false, got '" + raw + "'");
  }

  std::vector<std::string> get_list(const std::string& key) const {
    const std::string raw = get_string(key, "");
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(raw);
    while (std::getline(in, item, ',')) {
      const auto t = trim(item);
      if (!t.empty()) out.push_back(t);
    }
    return out;
  }

  std::vector<int> get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (const auto& s : get_list(key)) {
      try {
        out.push_back(std::stoi(s));
      } catch (const std::exception&) {
        throw ConfigError(key + ": expected integers, got '" + s + "'");
      }
    }
    return out;
  }

  std::vector<double> get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : get_list(key)) {
      try {
        out.push_back(std::stod(s));
      } catch (const std::exception&) {
        throw ConfigError(key + ": expected numbers, got '" + s + "'");
      }
    }
    return out;
  }

  /// Keys present in the file but never read by the loader: almost always a
  /// typo, reported with their full paths.
  std::vector<std::string> unconsumed() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : values_)
      if (consumed_.count(k) == 0) out.push_back(k);
    return out;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  void write(std::ostream& out) const {
    for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
  }

 private:
  static std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

// ---------------------------------------------------------------------------

enum class OptimizerKind { Fpdgd, Foltres };

struct FoltresConfig {
  double sigma = 0.05;
  double lr = 0.001;
  bool adam = false;
  double privatization_p = 1.0;  // 1.0: send the true metric value
};

struct ExperimentConfig {
  // dataset
  std::string dataset_kind = "synthetic";  // synthetic | letor
  std::string dataset_name = "synthetic";
  std::string train_path, test_path;
  SyntheticSpec synthetic;
  std::uint64_t synthetic_seed = 7;

  // model
  Architecture arch;

  OptimizerKind optimizer = OptimizerKind::Fpdgd;
  FoltresConfig foltres;

  RoundConfig round;

  // partition
  std::string partition_kind = "iid";
  int labels_per_client = 1;
  std::vector<int> queries_per_round;
  int intents = 2;
  std::string partition_file;

  // clicks
  std::string click_model = "ccm";  // ccm | pbm
  std::vector<std::string> click_variants;  // one, or one per client
  std::vector<double> pbm_etas;
  Vec custom_click_probs;  // inline per-grade tables; override the named variant
  Vec custom_stop_probs;

  std::optional<DpConfig> privacy;
  AttackConfig attack;

  UnlearnConfig unlearn;

  int metrics_k = 10;
  double online_gamma = 0.9995;

  std::uint64_t master_seed = 42;
  int repetitions = 1;
  int threads = 1;
};

inline ExperimentConfig load_experiment_config(const KvConfig& kv) {
  ExperimentConfig cfg;

  cfg.dataset_kind = kv.get_string("dataset.kind", "synthetic");
  cfg.dataset_name = kv.get_string("dataset.name", cfg.dataset_kind);
  cfg.train_path = kv.get_string("dataset.train", "");
  cfg.test_path = kv.get_string("dataset.test", "");
  cfg.synthetic.train_queries = static_cast<int>(kv.get_int("dataset.synthetic.train_queries", 50));
  cfg.synthetic.test_queries = static_cast<int>(kv.get_int("dataset.synthetic.test_queries", 50));
  cfg.synthetic.docs_per_query = static_cast<int>(kv.get_int("dataset.synthetic.docs_per_query", 20));
  cfg.synthetic.feature_dim = static_cast<int>(kv.get_int("dataset.synthetic.features", 5));
  cfg.synthetic.max_grade = static_cast<int>(kv.get_int("dataset.synthetic.grades", 5)) - 1;
  cfg.synthetic_seed = static_cast<std::uint64_t>(kv.get_int("dataset.synthetic.seed", 7));
  if (cfg.dataset_kind == "letor") {
    if (cfg.train_path.empty() || cfg.test_path.empty())
      throw ConfigError("dataset.train / dataset.test: required for dataset.kind = letor");
  } else if (cfg.dataset_kind != "synthetic") {
    throw ConfigError("dataset.kind: expected synthetic or letor, got '" + cfg.dataset_kind + "'");
  }

  const std::string arch = kv.get_string("ranker.arch", "linear");
  if (arch == "linear") cfg.arch.kind = ArchKind::Linear;
  else if (arch == "mlp") cfg.arch.kind = ArchKind::Mlp;
  else throw ConfigError("ranker.arch: expected linear or mlp, got '" + arch + "'");
  cfg.arch.hidden = static_cast<int>(kv.get_int("ranker.hidden", 64));

  const std::string opt = kv.get_string("optimizer", "fpdgd");
  if (opt == "fpdgd") cfg.optimizer = OptimizerKind::Fpdgd;
  else if (opt == "foltres") cfg.optimizer = OptimizerKind::Foltres;
  else throw ConfigError("optimizer: expected fpdgd or foltres, got '" + opt + "'");
  cfg.foltres.sigma = kv.get_double("foltres.sigma", 0.05);
  cfg.foltres.lr = kv.get_double("foltres.lr", 0.001);
  const std::string es_opt = kv.get_string("foltres.optimizer", "sgd");
  if (es_opt == "adam") cfg.foltres.adam = true;
  else if (es_opt != "sgd")
    throw ConfigError("foltres.optimizer: expected sgd or adam, got '" + es_opt + "'");
  cfg.foltres.privatization_p = kv.get_double("foltres.privatization_p", 1.0);

  cfg.round.num_clients = static_cast<int>(kv.get_int("federation.clients", 5));
  cfg.round.local_interactions = static_cast<int>(kv.get_int("federation.local_interactions", 5));
  cfg.round.global_rounds = static_cast<int>(kv.get_int("federation.rounds", 100));
  cfg.round.learning_rate = kv.get_double("federation.lr", 0.1);
  const std::string rule = kv.get_string("federation.aggregation", "fedavg");
  if (rule == "fedavg") cfg.round.rule = AggregationRule::FedAvg;
  else if (rule == "krum") cfg.round.rule = AggregationRule::Krum;
  else if (rule == "multi_krum") cfg.round.rule = AggregationRule::MultiKrum;
  else if (rule == "trimmed_mean") cfg.round.rule = AggregationRule::TrimmedMean;
  else if (rule == "median") cfg.round.rule = AggregationRule::Median;
  else throw ConfigError("federation.aggregation: unknown rule '" + rule + "'");
  cfg.round.fedprox.mu = kv.get_double("federation.fedprox_mu", 0.0);
  cfg.round.datashare.alpha = kv.get_double("federation.datashare_alpha", 0.0);
  cfg.round.datashare.warmup_interactions =
      static_cast<int>(kv.get_int("federation.datashare_warmup", 0));
  cfg.round.trim_beta = static_cast<int>(kv.get_int("federation.trim_beta", -1));
  cfg.round.multikrum_f = static_cast<int>(kv.get_int("federation.multikrum_f", -1));
  cfg.round.validate();

  cfg.partition_kind = kv.get_string("partition.kind", "iid");
  cfg.labels_per_client = static_cast<int>(kv.get_int("partition.labels_per_client", 1));
  cfg.queries_per_round = kv.get_int_list("partition.queries_per_round");
  cfg.intents = static_cast<int>(kv.get_int("partition.intents", 2));
  cfg.partition_file = kv.get_string("partition.file", "");
  const std::set<std::string> kinds{"iid", "label_skew", "quantity_skew", "intent_skew", "file"};
  if (kinds.count(cfg.partition_kind) == 0)
    throw ConfigError("partition.kind: unknown kind '" + cfg.partition_kind + "'");
  if (cfg.partition_kind == "file" && cfg.partition_file.empty())
    throw ConfigError("partition.file: required for partition.kind = file");
  if (cfg.partition_kind == "quantity_skew" &&
      static_cast<int>(cfg.queries_per_round.size()) != cfg.round.num_clients)
    throw ConfigError("partition.queries_per_round: need one entry per client");

  cfg.click_model = kv.get_string("clicks.model", "ccm");
  if (cfg.click_model != "ccm" && cfg.click_model != "pbm")
    throw ConfigError("clicks.model: expected ccm or pbm, got '" + cfg.click_model + "'");
  cfg.click_variants = kv.get_list("clicks.variant");
  if (cfg.click_variants.empty()) cfg.click_variants = {"perfect"};
  if (cfg.click_variants.size() != 1 &&
      static_cast<int>(cfg.click_variants.size()) != cfg.round.num_clients)
    throw ConfigError("clicks.variant: give one variant or one per client");
  cfg.pbm_etas = kv.get_double_list("clicks.pbm_eta");
  if (cfg.pbm_etas.empty()) cfg.pbm_etas = {1.0};
  if (cfg.pbm_etas.size() != 1 && static_cast<int>(cfg.pbm_etas.size()) != cfg.round.num_clients)
    throw ConfigError("clicks.pbm_eta: give one eta or one per client");
  cfg.custom_click_probs = kv.get_double_list("clicks.click_probs");
  cfg.custom_stop_probs = kv.get_double_list("clicks.stop_probs");
  if (cfg.custom_click_probs.size() != cfg.custom_stop_probs.size() &&
      !(cfg.custom_stop_probs.empty() && cfg.click_model == "pbm"))
    throw ConfigError("clicks.click_probs / clicks.stop_probs: per-grade lists of equal length");

  if (kv.get_bool("privacy.enabled", false)) {
    DpConfig dp;
    dp.epsilon = kv.get_double("privacy.epsilon", 2.3);
    dp.sensitivity = kv.get_double("privacy.sensitivity", 3.0);
    dp.num_clients = cfg.round.num_clients;
    dp.validate();
    cfg.privacy = dp;
  } else {
    kv.get_double("privacy.epsilon", 0.0);  // consume so the keys stay valid
    kv.get_double("privacy.sensitivity", 0.0);
  }

  const std::string attack = kv.get_string("attack.kind", "none");
  if (attack == "none") cfg.attack.kind = AttackKind::None;
  else if (attack == "data_poison") cfg.attack.kind = AttackKind::DataPoison;
  else if (attack == "lie") cfg.attack.kind = AttackKind::Lie;
  else if (attack == "fang_krum") cfg.attack.kind = AttackKind::FangKrum;
  else if (attack == "fang_trimmed") cfg.attack.kind = AttackKind::FangTrimmed;
  else throw ConfigError("attack.kind: unknown attack '" + attack + "'");
  cfg.attack.attacker_fraction = kv.get_double("attack.fraction", 0.2);
  const std::string knowledge = kv.get_string("attack.knowledge", "partial");
  if (knowledge == "partial") cfg.attack.knowledge = AttackKnowledge::Partial;
  else if (knowledge == "full") cfg.attack.knowledge = AttackKnowledge::Full;
  else throw ConfigError("attack.knowledge: expected partial or full");
  cfg.attack.lie_z = kv.get_double("attack.lie_z", 1.0);
  cfg.attack.fang_lambda_init = kv.get_double("attack.fang_lambda_init", 10.0);
  cfg.attack.fang_lambda_threshold = kv.get_double("attack.fang_lambda_threshold", 1e-5);
  cfg.attack.fang_range_factor = kv.get_double("attack.fang_range_factor", 2.0);
  cfg.attack.validate();

  cfg.unlearn.unlearned_client = static_cast<int>(kv.get_int("unlearn.client", 0));
  cfg.unlearn.local_steps = static_cast<int>(kv.get_int("unlearn.local_steps", 3));
  cfg.unlearn.snapshot_interval = static_cast<int>(kv.get_int("unlearn.snapshot_interval", 10));
  cfg.unlearn.poison_z = kv.get_double("unlearn.poison_z", 2.0);

  cfg.metrics_k = static_cast<int>(kv.get_int("metrics.k", 10));
  cfg.online_gamma = kv.get_double("metrics.gamma", 0.9995);

  cfg.master_seed = static_cast<std::uint64_t>(kv.get_int("seed", 42));
  cfg.repetitions = static_cast<int>(kv.get_int("repetitions", 1));
  if (cfg.repetitions < 1) throw ConfigError("repetitions: must be >= 1");
  cfg.threads = static_cast<int>(kv.get_int("threads", 1));

  const auto unknown = kv.unconsumed();
  if (!unknown.empty()) {
    std::string joined;
    for (const auto& k : unknown) joined += (joined.empty() ? "" : ", ") + k;
    throw ConfigError("unknown configuration keys: " + joined);
  }
  return cfg;
}

/// Serializes the fully resolved configuration (every key, defaults included)
/// so a run can be replayed byte-for-byte from its lock file.
inline void write_resolved_config(std::ostream& out, const ExperimentConfig& cfg) {
  KvConfig kv;
  const auto set_int = [&](const std::string& k, long long v) { kv.set(k, std::to_string(v)); };
  const auto set_double = [&](const std::string& k, double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    kv.set(k, s.str());
  };

  kv.set("dataset.kind", cfg.dataset_kind);
  kv.set("dataset.name", cfg.dataset_name);
  if (!cfg.train_path.empty()) kv.set("dataset.train", cfg.train_path);
  if (!cfg.test_path.empty()) kv.set("dataset.test", cfg.test_path);
  set_int("dataset.synthetic.train_queries", cfg.synthetic.train_queries);
  set_int("dataset.synthetic.test_queries", cfg.synthetic.test_queries);
  set_int("dataset.synthetic.docs_per_query", cfg.synthetic.docs_per_query);
  set_int("dataset.synthetic.features", cfg.synthetic.feature_dim);
  set_int("dataset.synthetic.grades", cfg.synthetic.max_grade + 1);
  set_int("dataset.synthetic.seed", static_cast<long long>(cfg.synthetic_seed));

  kv.set("ranker.arch", cfg.arch.kind == ArchKind::Linear ? "linear" : "mlp");
  set_int("ranker.hidden", cfg.arch.hidden);

  kv.set("optimizer", cfg.optimizer == OptimizerKind::Fpdgd ? "fpdgd" : "foltres");
  set_double("foltres.sigma", cfg.foltres.sigma);
  set_double("foltres.lr", cfg.foltres.lr);
  kv.set("foltres.optimizer", cfg.foltres.adam ? "adam" : "sgd");
  set_double("foltres.privatization_p", cfg.foltres.privatization_p);

  set_int("federation.clients", cfg.round.num_clients);
  set_int("federation.local_interactions", cfg.round.local_interactions);
  set_int("federation.rounds", cfg.round.global_rounds);
  set_double("federation.lr", cfg.round.learning_rate);
  kv.set("federation.aggregation", rule_name(cfg.round.rule));
  set_double("federation.fedprox_mu", cfg.round.fedprox.mu);
  set_double("federation.datashare_alpha", cfg.round.datashare.alpha);
  set_int("federation.datashare_warmup", cfg.round.datashare.warmup_interactions);
  set_int("federation.trim_beta", cfg.round.trim_beta);
  set_int("federation.multikrum_f", cfg.round.multikrum_f);

  kv.set("partition.kind", cfg.partition_kind);
  set_int("partition.labels_per_client", cfg.labels_per_client);
  if (!cfg.queries_per_round.empty()) {
    std::string joined;
    for (int v : cfg.queries_per_round) joined += (joined.empty() ? "" : ",") + std::to_string(v);
    kv.set("partition.queries_per_round", joined);
  }
  set_int("partition.intents", cfg.intents);
  if (!cfg.partition_file.empty()) kv.set("partition.file", cfg.partition_file);

  kv.set("clicks.model", cfg.click_model);
  {
    std::string joined;
    for (const auto& v : cfg.click_variants) joined += (joined.empty() ? "" : ",") + v;
    kv.set("clicks.variant", joined);
    const auto join_doubles = [](const Vec& values) {
      std::ostringstream out;
      out.precision(17);
      for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
      return out.str();
    };
    kv.set("clicks.pbm_eta", join_doubles(cfg.pbm_etas));
    if (!cfg.custom_click_probs.empty()) {
      kv.set("clicks.click_probs", join_doubles(cfg.custom_click_probs));
      kv.set("clicks.stop_probs", join_doubles(cfg.custom_stop_probs));
    }
  }

  kv.set("privacy.enabled", cfg.privacy ? "true" : "false");
  if (cfg.privacy) {
    set_double("privacy.epsilon", cfg.privacy->epsilon);
    set_double("privacy.sensitivity", cfg.privacy->sensitivity);
  }

  kv.set("attack.kind", AttackConfig::kind_name(cfg.attack.kind));
  set_double("attack.fraction", cfg.attack.attacker_fraction);
  kv.set("attack.knowledge",
         cfg.attack.knowledge == AttackKnowledge::Partial ? "partial" : "full");
  set_double("attack.lie_z", cfg.attack.lie_z);
  set_double("attack.fang_lambda_init", cfg.attack.fang_lambda_init);
  set_double("attack.fang_lambda_threshold", cfg.attack.fang_lambda_threshold);
  set_double("attack.fang_range_factor", cfg.attack.fang_range_factor);

  set_int("unlearn.client", cfg.unlearn.unlearned_client);
  set_int("unlearn.local_steps", cfg.unlearn.local_steps);
  set_int("unlearn.snapshot_interval", cfg.unlearn.snapshot_interval);
  set_double("unlearn.poison_z", cfg.unlearn.poison_z);

  set_int("metrics.k", cfg.metrics_k);
  set_double("metrics.gamma", cfg.online_gamma);

  set_int("seed", static_cast<long long>(cfg.master_seed));
  set_int("repetitions", cfg.repetitions);
  set_int("threads", cfg.threads);

  kv.write(out);
}

}  // namespace foltr
