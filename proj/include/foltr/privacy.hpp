// Epsilon-differential privacy for federated PDGD: norm clipping to the
// sensitivity bound and distributed Laplace noise assembled from per-client
// Gamma draws.
#pragma once

#include <cmath>
#include <utility>

#include "foltr/core.hpp"
#include "foltr/rankers.hpp"

namespace foltr {

struct DpConfig {
  double epsilon = 0.0;
  double sensitivity = 0.0;  // Delta
  int num_clients = 1;

  double scale() const { return sensitivity / epsilon; }  // Laplace lambda

  void validate() const {
    if (epsilon <= 0.0) throw ConfigError("dp: epsilon must be positive");
    if (sensitivity <= 0.0) throw ConfigError("dp: sensitivity must be positive");
    if (num_clients < 1) throw ConfigError("dp: num_clients must be >= 1");
  }
};

/// theta * min(1, Delta / (2 ||theta||)); the output norm never exceeds
/// Delta / 2, so the update meets global sensitivity Delta.
inline RankerParams clip_weights(const RankerParams& params, double delta) {
  if (delta <= 0.0) throw ConfigError("clip_weights: sensitivity must be positive");
  const double norm = l2_norm(params.weights);
  const double factor = norm > 0.0 ? std::min(1.0, delta / (2.0 * norm)) : 1.0;
  if (factor >= 1.0) return params;
  RankerParams out = params;
  for (auto& w : out.weights) w *= factor;
  return out;
}

/// Per-coordinate (gamma, gamma') draws, each Gamma(shape = 1/n, scale =
/// Delta/epsilon). Summing gamma - gamma' over the n clients yields
/// Laplace(Delta/epsilon) noise on every coordinate.
inline std::pair<Vec, Vec> gamma_noise_pair(const DpConfig& config, std::size_t dim, Rng& rng) {
  config.validate();
  const double shape = 1.0 / static_cast<double>(config.num_clients);
  const double scale = config.scale();
  Vec g(dim), g_prime(dim);
  for (std::size_t i = 0; i < dim; ++i) g[i] = rng.gamma(shape, scale);
  for (std::size_t i = 0; i < dim; ++i) g_prime[i] = rng.gamma(shape, scale);
  return {std::move(g), std::move(g_prime)};
}

/// Client-side privatization: clip, then add gamma - gamma' per coordinate.
inline RankerParams privatize_update(const RankerParams& params, const DpConfig& config,
                                     Rng& rng) {
  RankerParams out = clip_weights(params, config.sensitivity);
  const auto [g, g_prime] = gamma_noise_pair(config, out.weights.size(), rng);
  for (std::size_t i = 0; i < out.weights.size(); ++i) out.weights[i] += g[i] - g_prime[i];
  return out;
}

}  // namespace foltr
