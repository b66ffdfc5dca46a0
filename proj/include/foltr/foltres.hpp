// The evolution-strategies baseline: seed-synchronized Gaussian perturbations
// with antithetic variates, epsilon-local-DP privatization of the discretized
// metric, and the server-side gradient estimate.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "foltr/core.hpp"
#include "foltr/rankers.hpp"

namespace foltr {

struct EsState {
  Vec mean;            // phi
  double sigma = 0.05;

  void validate() const {
    if (sigma <= 0.0) throw ConfigError("es: sigma must be positive");
  }
};

struct EsMessage {
  std::uint64_t seed = 0;
  double metric = 0.0;  // one of the grid values
  int sign = +1;        // antithetic sign: theta = phi +/- sigma * z(seed)
};

struct PrivatizationSpec {
  double p = 1.0;  // probability of reporting the true value
  Vec grid;        // the n distinct metric values

  void validate() const {
    if (grid.size() < 2) throw ConfigError("privatization: grid needs at least two values");
    const double n = static_cast<double>(grid.size());
    if (p <= 1.0 / n || p > 1.0)
      throw ConfigError("privatization: p must lie in (1/n, 1]");
  }
};

/// MaxRR on a 10-deep SERP takes exactly these 11 values.
inline Vec maxrr_grid() {
  Vec grid{0.0};
  for (int r = 10; r >= 2; --r) grid.push_back(1.0 / static_cast<double>(r));
  grid.push_back(1.0);
  return grid;
}

/// The standard-normal perturbation determined by a message seed. Server and
/// clients regenerate the identical vector from the seed alone.
inline Vec perturbation(std::uint64_t seed, std::size_t dim) {
  Rng rng(seed);
  Vec z(dim);
  for (auto& v : z) v = rng.normal();
  return z;
}

inline RankerParams sample_perturbed(const EsState& state, const Architecture& arch,
                                     std::uint64_t seed, int sign = +1) {
  state.validate();
  RankerParams p;
  p.arch = arch;
  p.weights = state.mean;
  const Vec z = perturbation(seed, state.mean.size());
  axpy(sign * state.sigma, z, p.weights);
  return p;
}

/// Reports the true grid value with probability p, otherwise one of the other
/// n-1 grid values uniformly at random.
inline double privatize(const PrivatizationSpec& spec, double true_value, Rng& rng) {
  spec.validate();
  std::size_t true_idx = spec.grid.size();
  for (std::size_t i = 0; i < spec.grid.size(); ++i)
    if (spec.grid[i] == true_value) {
      true_idx = i;
      break;
    }
  if (true_idx == spec.grid.size())
    throw Error("privatize: value is not a member of the metric grid");
  if (rng.uniform() < spec.p) return true_value;
  const std::uint64_t other = rng.uniform_int(spec.grid.size() - 1);
  const std::size_t idx = other < true_idx ? other : other + 1;
  return spec.grid[idx];
}

/// Upper bound on the local differential privacy budget:
/// epsilon <= log(p (n-1) / (1 - p)). p = 1 is unbounded.
inline double epsilon_bound(const PrivatizationSpec& spec) {
  spec.validate();
  if (spec.p >= 1.0) return std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(spec.grid.size());
  return std::log(spec.p * (n - 1.0) / (1.0 - spec.p));
}

/// Server gradient estimate: g = (1 / (N sigma^2)) * sum_i f_i (theta_i - phi)
/// with theta_i regenerated from each message's seed and antithetic sign.
inline ModelDelta es_server_gradient(const std::vector<EsMessage>& messages,
                                     const EsState& state) {
  state.validate();
  if (messages.empty()) throw Error("es_server_gradient: empty message set");
  const std::size_t dim = state.mean.size();

  // Pairwise-summed per coordinate for order-independent results.
  std::vector<Vec> terms(messages.size(), Vec(dim));
  for (std::size_t i = 0; i < messages.size(); ++i) {
    const Vec z = perturbation(messages[i].seed, dim);
    const double w = messages[i].metric * messages[i].sign * state.sigma;
    for (std::size_t c = 0; c < dim; ++c) terms[i][c] = w * z[c];
  }
  const double norm = 1.0 / (static_cast<double>(messages.size()) * state.sigma * state.sigma);
  ModelDelta g(dim, 0.0);
  Vec column(messages.size());
  for (std::size_t c = 0; c < dim; ++c) {
    for (std::size_t i = 0; i < messages.size(); ++i) column[i] = terms[i][c];
    g[c] = norm * pairwise_sum(column);
  }
  return g;
}

/// Adaptive-moment ascent for the ES server, implemented from the published
/// update rule (beta1 = 0.9, beta2 = 0.999, eps = 1e-8, bias-corrected).
struct AdamOptimizer {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Vec m, v;
  long long t = 0;

  void step(Vec& params, const Vec& gradient) {
    if (m.empty()) {
      m.assign(params.size(), 0.0);
      v.assign(params.size(), 0.0);
    }
    check_same_size(params, gradient, "adam");
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * gradient[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * gradient[i] * gradient[i];
      params[i] += lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  }
};

}  // namespace foltr
