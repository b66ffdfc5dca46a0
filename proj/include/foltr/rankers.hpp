// Ranking models over flat parameter vectors: a linear scorer and a single
// hidden-layer network (64 sigmoid units) with hand-derived gradients.
#pragma once

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "foltr/core.hpp"

namespace foltr {

using ModelDelta = Vec;

enum class ArchKind { Linear, Mlp };

struct Architecture {
  ArchKind kind = ArchKind::Linear;
  int feature_dim = 0;
  int hidden = 64;

  // MLP layout (row-major, documented for checkpoint consumers):
  //   [ W1: hidden x feature_dim | b1: hidden | w2: hidden | b2: 1 ]
  int param_count() const {
    if (kind == ArchKind::Linear) return feature_dim;
    return feature_dim * hidden + hidden + hidden + 1;
  }

  bool operator==(const Architecture& o) const {
    return kind == o.kind && feature_dim == o.feature_dim &&
           (kind == ArchKind::Linear || hidden == o.hidden);
  }

  std::string to_string() const {
    std::ostringstream out;
    if (kind == ArchKind::Linear) out << "linear " << feature_dim;
    else out << "mlp " << feature_dim << ' ' << hidden;
    return out.str();
  }
};

struct RankerParams {
  Architecture arch;
  Vec weights;

  void validate() const {
    if (static_cast<int>(weights.size()) != arch.param_count())
      throw Error("ranker: parameter count does not match architecture");
  }
};

/// Zero initialization for the linear ranker, Xavier-uniform for the network.
inline RankerParams init_ranker(const Architecture& arch, Rng& rng) {
  RankerParams p;
  p.arch = arch;
  p.weights.assign(arch.param_count(), 0.0);
  if (arch.kind == ArchKind::Mlp) {
    const int f = arch.feature_dim, h = arch.hidden;
    const double lim1 = std::sqrt(6.0 / (f + h));
    for (int i = 0; i < f * h; ++i) p.weights[i] = rng.uniform_range(-lim1, lim1);
    const double lim2 = std::sqrt(6.0 / (h + 1));
    for (int i = 0; i < h; ++i) p.weights[f * h + h + i] = rng.uniform_range(-lim2, lim2);
    // Biases start at zero.
  }
  return p;
}

namespace detail {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}

inline double score(const RankerParams& p, const Vec& doc_features) {
  if (static_cast<int>(doc_features.size()) != p.arch.feature_dim)
    throw Error("score: feature dimension mismatch");
  if (p.arch.kind == ArchKind::Linear) return dot(p.weights, doc_features);

  const int f = p.arch.feature_dim, h = p.arch.hidden;
  const double* w1 = p.weights.data();
  const double* b1 = p.weights.data() + f * h;
  const double* w2 = b1 + h;
  const double b2 = w2[h];
  double out = b2;
  for (int j = 0; j < h; ++j) {
    double z = b1[j];
    const double* row = w1 + j * f;
    for (int i = 0; i < f; ++i) z += row[i] * doc_features[i];
    out += w2[j] * detail::sigmoid(z);
  }
  return out;
}

/// d(score)/d(params). Linear: the feature vector itself. MLP: backprop
/// through the sigmoid layer.
inline ModelDelta score_gradient(const RankerParams& p, const Vec& doc_features) {
  if (static_cast<int>(doc_features.size()) != p.arch.feature_dim)
    throw Error("score_gradient: feature dimension mismatch");
  if (p.arch.kind == ArchKind::Linear) return doc_features;

  const int f = p.arch.feature_dim, h = p.arch.hidden;
  const double* w1 = p.weights.data();
  const double* b1 = p.weights.data() + f * h;
  const double* w2 = b1 + h;

  ModelDelta g(p.weights.size(), 0.0);
  for (int j = 0; j < h; ++j) {
    double z = b1[j];
    const double* row = w1 + j * f;
    for (int i = 0; i < f; ++i) z += row[i] * doc_features[i];
    const double a = detail::sigmoid(z);
    const double da = w2[j] * a * (1.0 - a);  // d(score)/dz_j
    double* grow = g.data() + j * f;
    for (int i = 0; i < f; ++i) grow[i] = da * doc_features[i];
    g[f * h + j] = da;        // b1
    g[f * h + h + j] = a;     // w2
  }
  g[f * h + h + h] = 1.0;     // b2
  return g;
}

inline RankerParams apply_update(const RankerParams& p, const ModelDelta& delta, double lr) {
  check_same_size(p.weights, delta, "apply_update");
  RankerParams out = p;
  axpy(lr, delta, out.weights);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: flat-float text, one value per line with round-trip precision.
// Used by the CLI `evaluate` subcommand and the unlearning snapshot store.

inline void write_checkpoint(std::ostream& out, const RankerParams& p) {
  out << "foltr-checkpoint v1\n";
  out << "arch " << p.arch.to_string() << "\n";
  out << "params " << p.weights.size() << "\n";
  out.precision(17);
  for (double w : p.weights) out << w << "\n";
}

inline RankerParams read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "foltr-checkpoint v1")
    throw ParseError("expected 'foltr-checkpoint v1' header", 1);
  RankerParams p;
  std::string word, kind;
  in >> word >> kind;
  if (word != "arch") throw ParseError("expected arch line", 2);
  if (kind == "linear") {
    p.arch.kind = ArchKind::Linear;
    in >> p.arch.feature_dim;
  } else if (kind == "mlp") {
    p.arch.kind = ArchKind::Mlp;
    in >> p.arch.feature_dim >> p.arch.hidden;
  } else {
    throw ParseError("unknown architecture '" + kind + "'", 2);
  }
  std::size_t n;
  in >> word >> n;
  if (word != "params") throw ParseError("expected params line", 3);
  p.weights.resize(n);
  for (auto& w : p.weights)
    if (!(in >> w)) throw Error("checkpoint: truncated parameter list");
  p.validate();
  return p;
}

}  // namespace foltr
