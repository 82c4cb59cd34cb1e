#include <algorithm>
#include <cmath>
#include <numeric>

#include "fcucr/data.hpp"
#include "fcucr/errors.hpp"
#include "fcucr/rng.hpp"

namespace fcucr {

namespace {

using Vec = std::vector<double>;

Vec random_unit(Rng& rng, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(static_cast<std::size_t>(dim));
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

void normalize(Vec& v) {
  double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  if (norm > 0.0)
    for (auto& x : v) x /= norm;
}

// Draws `count` distinct items with probability proportional to softmax
// affinity, renormalizing after each draw.
std::vector<ItemId> sample_items(Rng& rng, const Vec& pref, const std::vector<Vec>& items,
                                 double temperature, int count) {
  std::vector<double> logits(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    logits[i] = std::inner_product(pref.begin(), pref.end(), items[i].begin(), 0.0) / temperature;
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> weight(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) weight[i] = std::exp(logits[i] - top);

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<ItemId> out;
  for (int n = 0; n < count; ++n) {
    const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
    const double u = unif(rng) * total;
    double acc = 0.0;
    std::size_t pick = weight.size(), last = 0;
    for (std::size_t i = 0; i < weight.size(); ++i) {
      if (weight[i] == 0.0) continue;
      acc += weight[i];
      last = i;
      if (u < acc) {
        pick = i;
        break;
      }
    }
    if (pick == weight.size()) pick = last;
    out.push_back(static_cast<ItemId>(pick));
    weight[pick] = 0.0;
  }
  return out;
}

}  // namespace

SyntheticDataset gen_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n_clients < 1 || cfg.n_sessions < 1 || cfg.latent_dim < 1)
    throw ConfigError("synthetic: n_clients, n_sessions and latent_dim must be >= 1");
  if (cfg.session_length < 2) throw ConfigError("synthetic: session_length must be >= 2");
  if (cfg.catalog_size < cfg.session_length)
    throw ConfigError("synthetic: catalog_size < session_length");
  if (cfg.n_clusters < 1 || cfg.n_clusters > cfg.n_clients)
    throw ConfigError("synthetic: need 1 <= n_clusters <= n_clients");
  if (cfg.drift_rate < 0.0 || cfg.drift_rate > 1.0)
    throw ConfigError("synthetic: drift_rate must lie in [0, 1]");
  if (cfg.temperature <= 0.0) throw ConfigError("synthetic: temperature must be positive");

  Rng rng(splitmix64(cfg.seed));
  std::vector<Vec> item_vecs;
  for (int i = 0; i < cfg.catalog_size; ++i) item_vecs.push_back(random_unit(rng, cfg.latent_dim));

  std::vector<Vec> centers;
  for (int c = 0; c < cfg.n_clusters; ++c) centers.push_back(random_unit(rng, cfg.latent_dim));

  SyntheticDataset out;
  std::vector<Vec> offsets;
  for (int u = 0; u < cfg.n_clients; ++u) {
    out.cluster_of.push_back(u % cfg.n_clusters);
    Vec off = random_unit(rng, cfg.latent_dim);
    for (auto& x : off) x *= cfg.client_spread;
    offsets.push_back(std::move(off));
  }

  // Cluster centers drift toward a fresh random direction each step; clients
  // follow their cluster with a fixed personal offset.
  std::vector<std::vector<Vec>> center_at(static_cast<std::size_t>(cfg.n_sessions));
  center_at[0] = centers;
  for (int t = 1; t < cfg.n_sessions; ++t) {
    for (int c = 0; c < cfg.n_clusters; ++c) {
      Vec target = random_unit(rng, cfg.latent_dim);
      Vec next = center_at[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(c)];
      for (int k = 0; k < cfg.latent_dim; ++k) {
        next[static_cast<std::size_t>(k)] =
            (1.0 - cfg.drift_rate) * next[static_cast<std::size_t>(k)] +
            cfg.drift_rate * target[static_cast<std::size_t>(k)];
      }
      normalize(next);
      center_at[static_cast<std::size_t>(t)].push_back(std::move(next));
    }
  }

  SessionsByClient sessions;
  out.preferences.resize(static_cast<std::size_t>(cfg.n_clients));
  for (int u = 0; u < cfg.n_clients; ++u) {
    Rng client_rng = make_stream(cfg.seed, {0x5e55ULL, static_cast<std::uint64_t>(u)});
    const auto cluster = static_cast<std::size_t>(out.cluster_of[static_cast<std::size_t>(u)]);
    auto& list = sessions[u];
    for (int t = 0; t < cfg.n_sessions; ++t) {
      Vec pref = center_at[static_cast<std::size_t>(t)][cluster];
      for (int k = 0; k < cfg.latent_dim; ++k)
        pref[static_cast<std::size_t>(k)] += offsets[static_cast<std::size_t>(u)][static_cast<std::size_t>(k)];
      normalize(pref);
      list.push_back(Session{u, t + 1,
                             sample_items(client_rng, pref, item_vecs, cfg.temperature,
                                          cfg.session_length)});
      out.preferences[static_cast<std::size_t>(u)].push_back(std::move(pref));
    }
  }

  out.dataset.catalog_size = cfg.catalog_size;
  out.dataset.clients = build_splits(sessions);
  return out;
}

}  // namespace fcucr
