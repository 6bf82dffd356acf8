#pragma once

// Leave-one-feature-out weight sensing. Each column is predicted from the
// others by a random forest; m trees per target are picked by a greedy
// quality-diversity search over their attribution vectors, and every picked
// tree becomes one feature-weight view on the simplex.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wise/data_model.hpp"
#include "wise/forest.hpp"
#include "wise/treeshap.hpp"
#include "wise/util.hpp"

namespace wise {

struct TreeCandidate {
  std::size_t id = 0;
  double quality = 0.0;
  std::vector<double> attribution;
};

struct FeatureWeightVector {
  std::vector<double> w;
  std::size_t target = 0;  // held-out feature j
  std::size_t tree = 0;    // tree u within the target's forest
  std::size_t rank = 0;    // greedy selection order
  double quality = 0.0;
};

struct QdParams {
  int m = 3;
  double lambda = 0.5;

  void validate() const {
    if (m < 1) throw ConfigError("lofo: m must be >= 1");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lofo: lambda_QD must be in [0,1]");
  }
};

/// Cosine similarity; a zero vector is dissimilar to everything.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double cosine_distance(const TreeCandidate& a, const TreeCandidate& b) {
  return 1.0 - cosine_similarity(a.attribution, b.attribution);
}

/// Mean quality blended with mean pairwise cosine distance. The diversity
/// term of a singleton is 0.
inline double qd_objective(std::span<const TreeCandidate> subset, double lambda) {
  if (subset.empty()) throw ConfigError("lofo: quality-diversity objective of an empty set");
  const double k = static_cast<double>(subset.size());
  double q = 0.0;
  for (const auto& c : subset) q += c.quality;
  double pair = 0.0;
  for (std::size_t a = 0; a < subset.size(); ++a) {
    for (std::size_t b = a + 1; b < subset.size(); ++b) pair += cosine_distance(subset[a], subset[b]);
  }
  const double diversity = subset.size() > 1 ? 2.0 * pair / (k * (k - 1.0)) : 0.0;
  return lambda * q / k + (1.0 - lambda) * diversity;
}

/// Running sums of a selected set: Q = sum of qualities, P = sum of pairwise distances.
struct QdState {
  std::vector<std::size_t> members;
  double quality_sum = 0.0;
  double pair_sum = 0.0;

  double objective(double lambda) const {
    const double k = static_cast<double>(members.size());
    const double diversity = members.size() > 1 ? 2.0 * pair_sum / (k * (k - 1.0)) : 0.0;
    return lambda * quality_sum / k + (1.0 - lambda) * diversity;
  }
};

/// J(S + r) - J(S) from the cached sums in O(|S|) distance evaluations.
inline double marginal_gain(const TreeCandidate& r, std::span<const TreeCandidate> pool, const QdState& state, double lambda) {
  const double k = static_cast<double>(state.members.size());
  if (state.members.empty()) return lambda * r.quality;
  double added = 0.0;  // A(r; S)
  for (auto u : state.members) added += cosine_distance(pool[u], r);
  const double with_r =
      lambda * (state.quality_sum + r.quality) / (k + 1.0) + (1.0 - lambda) * 2.0 / (k * (k + 1.0)) * (state.pair_sum + added);
  return with_r - state.objective(lambda);
}

/// Greedy subset of size m: seed with the best-quality tree, then add the
/// largest marginal gain. Ties go to the lowest candidate position.
inline std::vector<std::size_t> greedy_select(std::span<const TreeCandidate> candidates, const QdParams& params) {
  params.validate();
  const auto m = static_cast<std::size_t>(params.m);
  if (m > candidates.size()) {
    throw ConfigError("lofo: m=" + std::to_string(m) + " exceeds the number of trees T=" + std::to_string(candidates.size()));
  }
  QdState state;
  std::vector<bool> taken(candidates.size(), false);
  std::size_t seed = 0;
  for (std::size_t u = 1; u < candidates.size(); ++u) {
    if (candidates[u].quality > candidates[seed].quality) seed = u;
  }
  state.members.push_back(seed);
  state.quality_sum = candidates[seed].quality;
  taken[seed] = true;
  while (state.members.size() < m) {
    std::size_t best = candidates.size();
    double best_gain = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < candidates.size(); ++r) {
      if (taken[r]) continue;
      const double gain = marginal_gain(candidates[r], candidates, state, params.lambda);
      if (gain > best_gain) {
        best_gain = gain;
        best = r;
      }
    }
    for (auto u : state.members) state.pair_sum += cosine_distance(candidates[u], candidates[best]);
    state.quality_sum += candidates[best].quality;
    state.members.push_back(best);
    taken[best] = true;
  }
  return state.members;
}

/// Simplex completion: attribution mass scaled by quality on the inputs,
/// the remaining 1 - q on the held-out feature.
inline FeatureWeightVector complete_weight(const TreeCandidate& candidate, std::size_t target, std::size_t d) {
  if (candidate.attribution.size() + 1 != d) throw ConfigError("lofo: attribution length must be d-1");
  if (target >= d) throw ConfigError("lofo: target index out of range");
  FeatureWeightVector out;
  out.w.assign(d, 0.0);
  out.target = target;
  out.tree = candidate.id;
  out.quality = candidate.quality;
  const double q = std::clamp(candidate.quality, 0.0, 1.0);
  double total = 0.0;
  for (double v : candidate.attribution) total += v;
  if (total <= 0.0) {
    out.w[target] = 1.0;
    return out;
  }
  for (std::size_t k = 0, a = 0; k < d; ++k) {
    if (k == target) continue;
    out.w[k] = q * candidate.attribution[a++] / total;
  }
  out.w[target] = 1.0 - q;
  return out;
}

struct SenseOptions {
  std::size_t background_size = 64;
  std::size_t explain_cap = 256;
};

/// Candidates (quality + global attribution) for every tree of one LOFO forest.
inline std::vector<TreeCandidate> tree_candidates(const LofoTask& task, const ForestModel& forest, const SenseOptions& options,
                                                  std::uint64_t seed) {
  std::vector<TreeCandidate> out(forest.trees.size());
  for (std::size_t u = 0; u < forest.trees.size(); ++u) {
    std::mt19937_64 rng(derive_seed(seed, 0xb6u, u));
    std::vector<std::size_t> bg = forest.train_rows[u];
    detail::partial_shuffle(bg, options.background_size, rng);
    bg.resize(std::min(bg.size(), options.background_size));
    std::sort(bg.begin(), bg.end());
    std::vector<std::size_t> ex = forest.holdout_rows[u].empty() ? forest.train_rows[u] : forest.holdout_rows[u];
    if (ex.size() > options.explain_cap) {
      detail::partial_shuffle(ex, options.explain_cap, rng);
      ex.resize(options.explain_cap);
      std::sort(ex.begin(), ex.end());
    }
    RowRefs background, explain;
    for (auto r : bg) background.push_back(task.x.row(r));
    for (auto r : ex) explain.push_back(task.x.row(r));
    const int output_class = forest.task == TaskKind::kClassification ? forest.majority_class[u] : 0;
    out[u].id = u;
    out[u].quality = forest.quality[u];
    out[u].attribution = aggregate_global(forest.trees[u], explain, background, output_class).s;
  }
  return out;
}

/// R = d * m weight views ordered by (target feature, greedy rank).
inline std::vector<FeatureWeightVector> sense_all(const MixedTable& table, const ForestParams& forest_params,
                                                  const QdParams& qd, const SenseOptions& options = {}) {
  if (table.d() < 2) throw ConfigError("lofo: need at least two columns");
  qd.validate();
  forest_params.validate();
  if (qd.m > forest_params.trees) throw ConfigError("lofo: m exceeds T");
  const std::size_t d = table.d();
  std::vector<std::vector<FeatureWeightVector>> per_target(d);
  parallel_for(d, [&](std::size_t j) {
    const LofoTask task = make_lofo_task(table, j);
    ForestParams params = forest_params;
    params.seed = derive_seed(forest_params.seed, 0x10f0u, j);
    ForestModel forest = train_forest(task.x, task.y, task.task, task.n_classes, params);
    forest.target = j;
    const auto candidates = tree_candidates(task, forest, options, params.seed);
    const auto picked = greedy_select(candidates, qd);
    for (std::size_t rank = 0; rank < picked.size(); ++rank) {
      FeatureWeightVector v = complete_weight(candidates[picked[rank]], j, d);
      v.rank = rank;
      per_target[j].push_back(std::move(v));
    }
  });
  std::vector<FeatureWeightVector> views;
  for (auto& group : per_target) {
    for (auto& v : group) views.push_back(std::move(v));
  }
  return views;
}

/// Ablation views: every view uniform over the d features.
inline std::vector<FeatureWeightVector> uniform_views(std::size_t d, std::size_t count) {
  std::vector<FeatureWeightVector> out(count);
  for (std::size_t r = 0; r < count; ++r) {
    out[r].w.assign(d, 1.0 / static_cast<double>(d));
    out[r].target = 0;
    out[r].rank = r;
  }
  return out;
}

/// Ablation views: |N(0,1)| per feature, L1-normalized.
inline std::vector<FeatureWeightVector> gaussian_views(std::size_t d, std::size_t count, std::uint64_t seed) {
  std::vector<FeatureWeightVector> out(count);
  for (std::size_t r = 0; r < count; ++r) {
    std::mt19937_64 rng(derive_seed(seed, 0x6a55u, r));
    std::normal_distribution<double> normal(0.0, 1.0);
    double total = 0.0;
    out[r].w.resize(d);
    for (auto& w : out[r].w) total += (w = std::abs(normal(rng)));
    if (total <= 0.0) {
      std::fill(out[r].w.begin(), out[r].w.end(), 1.0 / static_cast<double>(d));
    } else {
      for (auto& w : out[r].w) w /= total;
    }
    out[r].rank = r;
  }
  return out;
}

}  // namespace wise
