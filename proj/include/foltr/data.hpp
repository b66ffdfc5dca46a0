// LETOR corpus parsing, in-memory dataset types, client partitioning for the
// IID and non-IID regimes, and the synthetic linear benchmark generator.
#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "foltr/core.hpp"

namespace foltr {

struct DocumentFeatures {
  int doc_index = 0;  // position within the query's candidate list
  Vec features;
  int relevance = 0;
};

struct Query {
  std::string query_id;
  std::vector<DocumentFeatures> docs;
};

struct Dataset {
  std::string name;
  int feature_dim = 0;
  int max_grade = 0;
  std::vector<Query> train;
  std::vector<Query> test;

  void validate() const {
    for (const auto* split : {&train, &test}) {
      for (const auto& q : *split) {
        if (q.docs.empty()) throw Error("dataset: query " + q.query_id + " has no documents");
        for (const auto& d : q.docs) {
          if (static_cast<int>(d.features.size()) != feature_dim)
            throw Error("dataset: feature dimension mismatch in query " + q.query_id);
          if (d.relevance < 0 || d.relevance > max_grade)
            throw Error("dataset: relevance grade out of range in query " + q.query_id);
        }
      }
    }
  }
};

// ---------------------------------------------------------------------------
// LETOR text format: `<grade> qid:<id> <fid>:<val> ... [# comment]`.
// Feature ids may be sparse and unordered; they are densified to 0-based
// positions with absent ids defaulting to 0.0.

namespace detail {

struct RawDoc {
  int grade = 0;
  std::vector<std::pair<int, double>> feats;  // (1-based fid, value)
};

inline bool parse_letor_line(const std::string& line, std::size_t line_no,
                             std::string& qid_out, RawDoc& doc_out) {
  std::string body = line;
  if (const auto hash = body.find('#'); hash != std::string::npos) body.resize(hash);
  std::istringstream in(body);
  std::string tok;
  if (!(in >> tok)) return false;  // blank or comment-only line
  try {
    doc_out.grade = std::stoi(tok);
  } catch (const std::exception&) {
    throw ParseError("expected integer relevance grade, got '" + tok + "'", line_no);
  }
  if (!(in >> tok) || tok.rfind("qid:", 0) != 0 || tok.size() <= 4)
    throw ParseError("expected qid:<id> after the grade", line_no);
  qid_out = tok.substr(4);
  doc_out.feats.clear();
  while (in >> tok) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= tok.size())
      throw ParseError("expected <fid>:<value>, got '" + tok + "'", line_no);
    int fid;
    double val;
    try {
      fid = std::stoi(tok.substr(0, colon));
      val = std::stod(tok.substr(colon + 1));
    } catch (const std::exception&) {
      throw ParseError("malformed feature pair '" + tok + "'", line_no);
    }
    if (fid < 1) throw ParseError("feature ids are 1-based, got " + std::to_string(fid), line_no);
    doc_out.feats.emplace_back(fid, val);
  }
  return true;
}

}  // namespace detail

/// Parses one LETOR split. When `expected_dim` is positive any feature id
/// beyond it is a schema error; otherwise the dimension is the largest id seen.
inline std::vector<Query> parse_letor(std::istream& in, int& feature_dim_inout,
                                      int expected_dim = 0) {
  std::vector<Query> queries;
  std::map<std::string, std::size_t> index_of;
  std::vector<std::pair<std::string, detail::RawDoc>> raw;
  int max_fid = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string qid;
    detail::RawDoc doc;
    if (!detail::parse_letor_line(line, line_no, qid, doc)) continue;
    for (const auto& [fid, _] : doc.feats) {
      if (expected_dim > 0 && fid > expected_dim)
        throw ParseError("feature id " + std::to_string(fid) + " exceeds declared dimension " +
                             std::to_string(expected_dim),
                         line_no);
      max_fid = std::max(max_fid, fid);
    }
    raw.emplace_back(qid, std::move(doc));
  }

  const int dim = expected_dim > 0 ? expected_dim : max_fid;
  for (auto& [qid, doc] : raw) {
    auto it = index_of.find(qid);
    if (it == index_of.end()) {
      it = index_of.emplace(qid, queries.size()).first;
      queries.push_back(Query{qid, {}});
    }
    Query& q = queries[it->second];
    DocumentFeatures d;
    d.doc_index = static_cast<int>(q.docs.size());
    d.relevance = doc.grade;
    d.features.assign(dim, 0.0);
    for (const auto& [fid, val] : doc.feats) d.features[fid - 1] = val;
    q.docs.push_back(std::move(d));
  }
  feature_dim_inout = dim;
  return queries;
}

inline void write_letor(std::ostream& out, const std::vector<Query>& queries) {
  out.precision(17);
  for (const auto& q : queries) {
    for (const auto& d : q.docs) {
      out << d.relevance << " qid:" << q.query_id;
      for (std::size_t f = 0; f < d.features.size(); ++f) out << ' ' << f + 1 << ':' << d.features[f];
      out << '\n';
    }
  }
}

inline int infer_grade_scale(const std::vector<Query>& queries) {
  int max_seen = 0;
  for (const auto& q : queries)
    for (const auto& d : q.docs) max_seen = std::max(max_seen, d.relevance);
  return max_seen <= 2 ? 2 : 4;  // 3-level vs 5-level judgement scales
}

inline Dataset load_dataset(std::istream& train_in, std::istream& test_in,
                            const std::string& name = "letor") {
  Dataset ds;
  ds.name = name;
  int dim = 0;
  ds.train = parse_letor(train_in, dim);
  ds.test = parse_letor(test_in, dim, dim);
  ds.feature_dim = dim;
  ds.max_grade = std::max(infer_grade_scale(ds.train), infer_grade_scale(ds.test));
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Partition plans.

/// Per-intent binary relevance overrides: table[query][intent][doc] in {0,1}.
struct IntentRelabelTable {
  int num_intents = 0;
  std::vector<std::vector<std::vector<int>>> labels;  // [query][intent][doc]

  bool empty() const { return num_intents == 0; }
};

/// One client's sampling domain. An empty `owned` means "uniform over all
/// train queries with full candidate lists"; otherwise the client samples a
/// query among `owned` and only sees the listed documents.
struct ClientDomain {
  struct OwnedQuery {
    int query_index = 0;
    std::vector<int> doc_indices;  // subset of the query's candidates
  };
  std::vector<OwnedQuery> owned;
  int queries_per_round = 0;  // 0: use the experiment's B
  int intent = -1;            // -1: score clicks against the original labels
};

struct PartitionPlan {
  enum class Kind { Iid, LabelSkew, QuantitySkew, IntentSkew };

  Kind kind = Kind::Iid;
  int num_clients = 1;
  std::vector<ClientDomain> clients;
  IntentRelabelTable relabel;  // populated for intent skew only

  static const char* kind_name(Kind k) {
    switch (k) {
      case Kind::Iid: return "iid";
      case Kind::LabelSkew: return "label_skew";
      case Kind::QuantitySkew: return "quantity_skew";
      case Kind::IntentSkew: return "intent_skew";
    }
    return "iid";
  }
};

inline PartitionPlan partition_iid(int num_clients) {
  if (num_clients < 1) throw ConfigError("partition: num_clients must be >= 1");
  PartitionPlan plan;
  plan.kind = PartitionPlan::Kind::Iid;
  plan.num_clients = num_clients;
  plan.clients.resize(num_clients);
  return plan;
}

/// Label-distribution skew: every client owns query-document pairs from
/// `labels_per_client` relevance grades only. All k-combinations of the grade
/// set are dealt to clients round-robin after a shuffle, then each grade's
/// pairs are divided equally among the clients owning that grade.
inline PartitionPlan partition_label_skew(const Dataset& ds, int num_clients,
                                          int labels_per_client, Rng& rng) {
  const int grades = ds.max_grade + 1;
  if (labels_per_client < 1 || labels_per_client > grades)
    throw ConfigError("label skew: labels_per_client out of range");
  if (num_clients < 1) throw ConfigError("label skew: num_clients must be >= 1");

  // All k-combinations of {0..max_grade}.
  std::vector<std::vector<int>> combos;
  std::vector<int> cur;
  const auto gen = [&](auto&& self, int start) -> void {
    if (static_cast<int>(cur.size()) == labels_per_client) {
      combos.push_back(cur);
      return;
    }
    for (int g = start; g < grades; ++g) {
      cur.push_back(g);
      self(self, g + 1);
      cur.pop_back();
    }
  };
  gen(gen, 0);
  if (num_clients < static_cast<int>(combos.size()))
    throw ConfigError("label skew: need at least one client per grade combination (" +
                      std::to_string(combos.size()) + ")");

  rng.shuffle(combos);
  std::vector<std::vector<int>> combo_of_client(num_clients);
  for (int c = 0; c < num_clients; ++c) combo_of_client[c] = combos[c % combos.size()];

  std::vector<std::vector<int>> owners_of_grade(grades);
  for (int c = 0; c < num_clients; ++c)
    for (int g : combo_of_client[c]) owners_of_grade[g].push_back(c);

  PartitionPlan plan;
  plan.kind = PartitionPlan::Kind::LabelSkew;
  plan.num_clients = num_clients;
  plan.clients.resize(num_clients);

  // Pair-level split: shuffle each grade's (query, doc) pairs, deal them
  // equally to the owning clients; remainders go round-robin by owner index.
  for (int g = 0; g < grades; ++g) {
    std::vector<std::pair<int, int>> pairs;  // (query_index, doc_index)
    for (std::size_t qi = 0; qi < ds.train.size(); ++qi)
      for (const auto& d : ds.train[qi].docs)
        if (d.relevance == g) pairs.emplace_back(static_cast<int>(qi), d.doc_index);
    if (owners_of_grade[g].empty() || pairs.empty()) continue;
    rng.shuffle(pairs);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const int owner = owners_of_grade[g][i % owners_of_grade[g].size()];
      auto& owned = plan.clients[owner].owned;
      if (owned.empty() || owned.back().query_index != pairs[i].first) {
        // Queries repeat across grades; merge below after dealing.
        owned.push_back({pairs[i].first, {pairs[i].second}});
      } else {
        owned.back().doc_indices.push_back(pairs[i].second);
      }
    }
  }

  // Merge duplicate query entries per client and sort for stable lookups.
  for (auto& client : plan.clients) {
    std::map<int, std::vector<int>> merged;
    for (auto& oq : client.owned)
      merged[oq.query_index].insert(merged[oq.query_index].end(), oq.doc_indices.begin(),
                                    oq.doc_indices.end());
    client.owned.clear();
    for (auto& [qi, docs] : merged) {
      std::sort(docs.begin(), docs.end());
      client.owned.push_back({qi, std::move(docs)});
    }
    if (client.owned.empty()) throw ConfigError("label skew: a client received no pairs");
  }
  return plan;
}

/// Data-quantity skew: client i issues queries_per_round[i] queries per local
/// round, sampled uniformly from the full train set.
inline PartitionPlan partition_quantity_skew(int num_clients,
                                             const std::vector<int>& queries_per_round) {
  if (static_cast<int>(queries_per_round.size()) != num_clients)
    throw ConfigError("quantity skew: list length must equal num_clients");
  PartitionPlan plan = partition_iid(num_clients);
  plan.kind = PartitionPlan::Kind::QuantitySkew;
  for (int c = 0; c < num_clients; ++c) {
    if (queries_per_round[c] < 1) throw ConfigError("quantity skew: counts must be >= 1");
    plan.clients[c].queries_per_round = queries_per_round[c];
  }
  return plan;
}

/// Document-preference skew: num_intents synthetic intents, each marking a
/// disjoint random 10% of every query's documents as relevant. Client i scores
/// clicks against intent (i mod num_intents).
inline PartitionPlan partition_intent_skew(const Dataset& ds, int num_clients, int num_intents,
                                           Rng& rng) {
  if (num_intents < 1) throw ConfigError("intent skew: num_intents must be >= 1");
  PartitionPlan plan = partition_iid(num_clients);
  plan.kind = PartitionPlan::Kind::IntentSkew;
  plan.relabel.num_intents = num_intents;
  plan.relabel.labels.resize(ds.train.size());

  for (std::size_t qi = 0; qi < ds.train.size(); ++qi) {
    const int n_docs = static_cast<int>(ds.train[qi].docs.size());
    const int per_intent = std::max(1, (n_docs + 9) / 10);  // ceil(10%)
    if (per_intent * num_intents > n_docs)
      throw ConfigError("intent skew: query " + ds.train[qi].query_id +
                        " has too few documents for " + std::to_string(num_intents) + " intents");
    std::vector<int> order(n_docs);
    for (int i = 0; i < n_docs; ++i) order[i] = i;
    rng.shuffle(order);
    auto& per_query = plan.relabel.labels[qi];
    per_query.assign(num_intents, std::vector<int>(n_docs, 0));
    int next = 0;
    for (int intent = 0; intent < num_intents; ++intent)
      for (int k = 0; k < per_intent; ++k) per_query[intent][order[next++]] = 1;
  }
  for (int c = 0; c < num_clients; ++c) plan.clients[c].intent = c % num_intents;
  return plan;
}

// ---------------------------------------------------------------------------
// Plan (de)serialization: a plain key-value text file so partitions can be
// frozen and replayed.

inline void write_partition_plan(std::ostream& out, const PartitionPlan& plan) {
  out << "partition v1\n";
  out << "kind " << PartitionPlan::kind_name(plan.kind) << "\n";
  out << "num_clients " << plan.num_clients << "\n";
  out << "num_intents " << plan.relabel.num_intents << "\n";
  for (int c = 0; c < plan.num_clients; ++c) {
    const auto& cl = plan.clients[c];
    out << "client " << c << " intent " << cl.intent << " queries_per_round "
        << cl.queries_per_round << "\n";
    for (const auto& oq : cl.owned) {
      out << "  owned " << oq.query_index << " :";
      for (int d : oq.doc_indices) out << ' ' << d;
      out << "\n";
    }
  }
  for (std::size_t qi = 0; qi < plan.relabel.labels.size(); ++qi) {
    for (int intent = 0; intent < plan.relabel.num_intents; ++intent) {
      out << "relabel " << qi << ' ' << intent << " :";
      for (int v : plan.relabel.labels[qi][intent]) out << ' ' << v;
      out << "\n";
    }
  }
}

inline PartitionPlan read_partition_plan(std::istream& in) {
  PartitionPlan plan;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line) || line != "partition v1")
    throw ParseError("expected 'partition v1' header", 1);
  int current_client = -1;
  std::size_t relabel_queries = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "kind") {
      std::string k;
      ls >> k;
      if (k == "iid") plan.kind = PartitionPlan::Kind::Iid;
      else if (k == "label_skew") plan.kind = PartitionPlan::Kind::LabelSkew;
      else if (k == "quantity_skew") plan.kind = PartitionPlan::Kind::QuantitySkew;
      else if (k == "intent_skew") plan.kind = PartitionPlan::Kind::IntentSkew;
      else throw ParseError("unknown partition kind '" + k + "'", line_no);
    } else if (key == "num_clients") {
      ls >> plan.num_clients;
      plan.clients.assign(plan.num_clients, {});
    } else if (key == "num_intents") {
      ls >> plan.relabel.num_intents;
    } else if (key == "client") {
      std::string tag;
      int intent, qpr;
      ls >> current_client >> tag >> intent >> tag >> qpr;
      if (current_client < 0 || current_client >= plan.num_clients)
        throw ParseError("client index out of range", line_no);
      plan.clients[current_client].intent = intent;
      plan.clients[current_client].queries_per_round = qpr;
    } else if (key == "owned") {
      if (current_client < 0) throw ParseError("'owned' before any client", line_no);
      ClientDomain::OwnedQuery oq;
      std::string colon;
      ls >> oq.query_index >> colon;
      int d;
      while (ls >> d) oq.doc_indices.push_back(d);
      plan.clients[current_client].owned.push_back(std::move(oq));
    } else if (key == "relabel") {
      std::size_t qi;
      int intent;
      std::string colon;
      ls >> qi >> intent >> colon;
      relabel_queries = std::max(relabel_queries, qi + 1);
      plan.relabel.labels.resize(relabel_queries);
      auto& per_query = plan.relabel.labels[qi];
      if (static_cast<int>(per_query.size()) < plan.relabel.num_intents)
        per_query.resize(plan.relabel.num_intents);
      int v;
      std::vector<int> vals;
      while (ls >> v) vals.push_back(v);
      per_query[intent] = std::move(vals);
    } else {
      throw ParseError("unknown directive '" + key + "'", line_no);
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark corpus: relevance grades generated by a hidden linear
// model, so a linear ranker can realize a perfect ordering.

struct SyntheticSpec {
  int train_queries = 50;
  int test_queries = 50;
  int docs_per_query = 20;
  int feature_dim = 5;
  int max_grade = 4;
};

inline Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {kSeedSynthetic}));
  Vec hidden(spec.feature_dim);
  for (auto& w : hidden) w = rng.normal();

  const auto make_split = [&](int count, const char* prefix) {
    std::vector<Query> split;
    split.reserve(count);
    for (int qi = 0; qi < count; ++qi) {
      Query q;
      q.query_id = std::string(prefix) + std::to_string(qi);
      std::vector<std::pair<double, int>> scored;  // (hidden score, doc)
      for (int di = 0; di < spec.docs_per_query; ++di) {
        DocumentFeatures d;
        d.doc_index = di;
        d.features.resize(spec.feature_dim);
        for (auto& f : d.features) f = rng.uniform();
        scored.emplace_back(dot(hidden, d.features), di);
        q.docs.push_back(std::move(d));
      }
      // Grades by within-query quantile of the hidden score: the top slice of
      // documents gets max_grade, the bottom slice gets 0.
      std::sort(scored.begin(), scored.end(),
                [](const auto& a, const auto& b) { return a.first > b.first; });
      const int buckets = spec.max_grade + 1;
      for (int rank = 0; rank < spec.docs_per_query; ++rank) {
        const int grade = spec.max_grade - (rank * buckets) / spec.docs_per_query;
        q.docs[scored[rank].second].relevance = grade;
      }
      split.push_back(std::move(q));
    }
    return split;
  };

  Dataset ds;
  ds.name = "synthetic";
  ds.feature_dim = spec.feature_dim;
  ds.max_grade = spec.max_grade;
  ds.train = make_split(spec.train_queries, "train");
  ds.test = make_split(spec.test_queries, "test");
  ds.validate();
  return ds;
}

}  // namespace foltr
