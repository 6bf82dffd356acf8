#pragma once

// Weighted k-FreqItems over sparse non-negative vectors.
//
// Distance is weighted Jaccard, centers are weighted FreqItems (coordinates
// whose aggregate mass clears alpha * max, valued at their average
// contribution), and seeding is a two-level LSH overseeding (ICWS weighted
// MinHash buckets, then MinHash over bucket memberships into bins) reduced
// to k centers by weighted D^2 sampling. With all-equal weights the engine
// is plain k-FreqItems under Jaccard distance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wise/util.hpp"

namespace wise {

struct WeightedEntry {
  std::uint32_t t = 0;
  double v = 0.0;

  friend bool operator==(const WeightedEntry&, const WeightedEntry&) = default;
};

/// Entries sorted by coordinate, all values positive.
struct SparseWeightedVector {
  std::vector<WeightedEntry> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }

  double l1() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.v;
    return s;
  }

  static SparseWeightedVector binary(std::span<const std::uint32_t> support, double value = 1.0) {
    SparseWeightedVector out;
    out.entries.reserve(support.size());
    for (auto t : support) out.entries.push_back({t, value});
    return out;
  }

  friend bool operator==(const SparseWeightedVector&, const SparseWeightedVector&) = default;
};

/// Binary support reweighted per coordinate; zero-weight coordinates drop out.
inline SparseWeightedVector reweight(std::span<const std::uint32_t> support, std::span<const double> coordinate_weight) {
  SparseWeightedVector out;
  out.entries.reserve(support.size());
  for (auto t : support) {
    const double w = coordinate_weight[t];
    if (w > 0.0) out.entries.push_back({t, w});
  }
  return out;
}

/// Sum of min over sum of max. Two empty vectors are identical (similarity 1).
inline double weighted_jaccard(const SparseWeightedVector& a, const SparseWeightedVector& b) {
  double lo = 0.0, hi = 0.0;
  std::size_t i = 0, k = 0;
  while (i < a.entries.size() || k < b.entries.size()) {
    if (k == b.entries.size() || (i < a.entries.size() && a.entries[i].t < b.entries[k].t)) {
      hi += a.entries[i++].v;
    } else if (i == a.entries.size() || b.entries[k].t < a.entries[i].t) {
      hi += b.entries[k++].v;
    } else {
      lo += std::min(a.entries[i].v, b.entries[k].v);
      hi += std::max(a.entries[i].v, b.entries[k].v);
      ++i;
      ++k;
    }
  }
  if (hi <= 0.0) return 1.0;
  return lo / hi;
}

inline double weighted_jaccard_distance(const SparseWeightedVector& a, const SparseWeightedVector& b) {
  return 1.0 - weighted_jaccard(a, b);
}

// ---------------------------------------------------------------------------
// Consistent weighted sampling (Ioffe's ICWS)

struct CwsSample {
  std::uint32_t t = 0;  // argmin coordinate
  std::int64_t k = 0;   // discretized companion value

  friend bool operator==(const CwsSample&, const CwsSample&) = default;
};

/// One ICWS hash of v. The (r, c, beta) draws of coordinate t under hash h
/// come from a counter-based generator keyed on (seed, h, t), so no tables
/// are stored and identical inputs always hash identically.
inline CwsSample cws_hash(const SparseWeightedVector& v, std::uint64_t h, std::uint64_t seed) {
  if (v.empty()) throw DataError("cws: cannot hash an empty vector");
  CwsSample best;
  double best_log_key = std::numeric_limits<double>::infinity();
  const std::uint64_t stream = derive_seed(seed, h);
  for (const auto& e : v.entries) {
    const std::uint64_t base = splitmix64(stream ^ (static_cast<std::uint64_t>(e.t) * 0xd1b54a32d192ed03ULL));
    // Gamma(2,1) as the sum of two unit exponentials.
    const double r = -std::log(key_to_unit(base + 1)) - std::log(key_to_unit(base + 2));
    const double c = -std::log(key_to_unit(base + 3)) - std::log(key_to_unit(base + 4));
    const double beta = key_to_unit(base + 5);
    const double tk = std::floor(std::log(e.v) / r + beta);
    // ln a = ln c - ln y - r with y = exp(r (tk - beta)).
    const double log_key = std::log(c) - r * (tk - beta) - r;
    if (log_key < best_log_key) {
      best_log_key = log_key;
      best = {e.t, static_cast<std::int64_t>(tk)};
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Centers

struct FreqItemCenter {
  SparseWeightedVector center;  // retained coordinates valued at s_t / max(1, f_t)
  std::size_t cluster_size = 0;
};

/// Relative slack for threshold and tie comparisons, so that equal rational
/// quantities computed along different float paths compare equal.
inline constexpr double kTieTolerance = 1e-12;

namespace detail {

/// Accumulates s_t and f_t over members and applies the alpha threshold.
class FreqItemAccumulator {
 public:
  void add(const SparseWeightedVector& v) {
    for (const auto& e : v.entries) {
      auto [it, inserted] = slots_.try_emplace(e.t, Slot{});
      it->second.sum += e.v;
      it->second.freq += 1;
    }
    ++members_;
  }

  FreqItemCenter finish(double alpha) const {
    FreqItemCenter out;
    out.cluster_size = members_;
    double s_max = 0.0;
    for (const auto& [t, slot] : slots_) s_max = std::max(s_max, slot.sum);
    if (s_max <= 0.0) return out;
    const double cut = alpha * s_max * (1.0 - kTieTolerance);
    for (const auto& [t, slot] : slots_) {
      if (slot.sum >= cut) {
        out.center.entries.push_back({t, slot.sum / static_cast<double>(std::max<std::size_t>(1, slot.freq))});
      }
    }
    return out;
  }

 private:
  struct Slot {
    double sum = 0.0;
    std::size_t freq = 0;
  };
  std::map<std::uint32_t, Slot> slots_;
  std::size_t members_ = 0;
};

}  // namespace detail

/// Weighted FreqItem of a cluster. An empty cluster yields an empty center
/// (cluster_size 0), which callers treat as the empty-cluster condition.
inline FreqItemCenter freqitem_center(std::span<const SparseWeightedVector> cluster, double alpha) {
  detail::FreqItemAccumulator acc;
  for (const auto& v : cluster) acc.add(v);
  return acc.finish(alpha);
}

inline FreqItemCenter freqitem_center(std::span<const SparseWeightedVector> data, std::span<const std::size_t> members,
                                      double alpha) {
  detail::FreqItemAccumulator acc;
  for (auto i : members) acc.add(data[i]);
  return acc.finish(alpha);
}

// ---------------------------------------------------------------------------
// Parameters

struct LshParams {
  int tables = 4;          // level-2 hash tables over bucket memberships
  int bands = 8;           // level-1 bands
  int rows_per_band = 2;   // hashes concatenated per band / per level-2 key
  double dedup_distance = 0.05;

  void validate() const {
    if (tables < 1 || bands < 1 || rows_per_band < 1) throw ConfigError("silk: tables, bands and rows_per_band must be >= 1");
    if (!(dedup_distance >= 0.0 && dedup_distance <= 1.0)) throw ConfigError("silk: dedup_distance must be in [0,1]");
  }
};

struct ClusterParams {
  int k = 2;
  double alpha = 0.4;
  double beta = 0.4;
  int max_iter = 50;
  std::uint64_t seed = 0;
  LshParams lsh;

  void validate() const {
    if (k < 1) throw ConfigError("kfreq: k must be >= 1");
    if (max_iter < 1) throw ConfigError("kfreq: max_iter must be >= 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("kfreq: alpha must be in [0,1]");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("kfreq: beta must be in [0,1]");
    lsh.validate();
  }
};

// ---------------------------------------------------------------------------
// SILK-style seeding

namespace detail {

inline std::uint64_t combine(std::uint64_t h, std::uint64_t v) { return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2))); }

/// Groups item ids by key; only groups with at least `min_size` members.
inline std::vector<std::vector<std::size_t>> group_by_key(std::vector<std::pair<std::uint64_t, std::size_t>>& keyed,
                                                          std::size_t min_size) {
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t a = 0; a < keyed.size();) {
    std::size_t b = a;
    while (b < keyed.size() && keyed[b].first == keyed[a].first) ++b;
    if (b - a >= min_size) {
      std::vector<std::size_t> g;
      for (std::size_t i = a; i < b; ++i) g.push_back(keyed[i].second);
      groups.push_back(std::move(g));
    }
    a = b;
  }
  return groups;
}

}  // namespace detail

/// Initial centers: LSH overseeding reduced to k, padded with distinct data
/// points when the overseeded set is too small.
inline std::vector<FreqItemCenter> silk_seed(std::span<const SparseWeightedVector> data, const ClusterParams& params) {
  params.validate();
  const auto k = static_cast<std::size_t>(params.k);
  if (data.size() < k) {
    throw DataError("kfreq: need at least k=" + std::to_string(k) + " rows, got " + std::to_string(data.size()));
  }
  const LshParams& lsh = params.lsh;

  // Weighted Jaccard is invariant to a global scale; hashing the rescaled
  // vectors makes all-equal weights hash exactly like unit weights.
  double max_value = 0.0;
  for (const auto& v : data) {
    for (const auto& e : v.entries) max_value = std::max(max_value, e.v);
  }
  if (!(max_value > 0.0)) throw DataError("kfreq: all rows are empty");
  std::vector<SparseWeightedVector> scaled(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    scaled[i] = data[i];
    for (auto& e : scaled[i].entries) e.v /= max_value;
  }

  // Level 1: band signatures of ICWS samples -> buckets of similar rows.
  std::vector<std::vector<std::size_t>> buckets;
  {
    const auto hashes = static_cast<std::size_t>(lsh.bands * lsh.rows_per_band);
    std::vector<std::vector<CwsSample>> sketch(data.size());
    parallel_for(data.size(), [&](std::size_t i) {
      if (scaled[i].empty()) return;
      sketch[i].resize(hashes);
      for (std::size_t h = 0; h < hashes; ++h) sketch[i][h] = cws_hash(scaled[i], h, params.seed);
    });
    for (int b = 0; b < lsh.bands; ++b) {
      std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
      for (std::size_t i = 0; i < data.size(); ++i) {
        if (sketch[i].empty()) continue;
        std::uint64_t key = static_cast<std::uint64_t>(b) + 1;
        for (int r = 0; r < lsh.rows_per_band; ++r) {
          const auto& s = sketch[i][static_cast<std::size_t>(b * lsh.rows_per_band + r)];
          key = detail::combine(detail::combine(key, s.t), static_cast<std::uint64_t>(s.k));
        }
        keyed.emplace_back(key, i);
      }
      for (auto& g : detail::group_by_key(keyed, 2)) buckets.push_back(std::move(g));
    }
  }

  // Level 2: MinHash over bucket memberships -> bins of overlapping buckets.
  std::vector<std::vector<std::size_t>> bins;  // bucket ids
  for (int table = 0; table < lsh.tables; ++table) {
    std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
    for (std::size_t b = 0; b < buckets.size(); ++b) {
      std::uint64_t key = static_cast<std::uint64_t>(table) + 1;
      for (int r = 0; r < lsh.rows_per_band; ++r) {
        const std::uint64_t salt = derive_seed(params.seed, 0xb1u, table, r);
        std::uint64_t lo = std::numeric_limits<std::uint64_t>::max();
        for (auto id : buckets[b]) lo = std::min(lo, splitmix64(salt ^ id));
        key = detail::combine(key, lo);
      }
      keyed.emplace_back(key, b);
    }
    for (auto& g : detail::group_by_key(keyed, 1)) bins.push_back(std::move(g));
  }

  // Frequent data subset of each bin -> candidate center.
  struct Candidate {
    FreqItemCenter center;
    std::size_t support = 0;
  };
  std::vector<Candidate> candidates;
  std::map<std::vector<std::size_t>, bool> seen_subsets;
  for (const auto& bin : bins) {
    std::map<std::size_t, std::size_t> hits;
    for (auto b : bin) {
      for (auto id : buckets[b]) ++hits[id];
    }
    std::size_t top = 0;
    for (const auto& [id, c] : hits) top = std::max(top, c);
    const double cut = params.beta * static_cast<double>(top) * (1.0 - kTieTolerance);
    std::vector<std::size_t> subset;
    for (const auto& [id, c] : hits) {
      if (static_cast<double>(c) >= cut) subset.push_back(id);
    }
    if (subset.empty() || !seen_subsets.emplace(subset, true).second) continue;
    Candidate cand{freqitem_center(scaled, subset, params.alpha), subset.size()};
    if (!cand.center.center.empty()) candidates.push_back(std::move(cand));
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.support > b.support; });

  // Deduplicate near-identical candidates, keeping the better supported one.
  std::vector<Candidate> kept;
  for (auto& cand : candidates) {
    bool duplicate = false;
    for (const auto& other : kept) {
      if (weighted_jaccard_distance(cand.center.center, other.center.center) <= lsh.dedup_distance + kTieTolerance) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) kept.push_back(std::move(cand));
  }

  // Reduce to k by support-weighted D^2 sampling, starting from the best supported.
  std::mt19937_64 rng(derive_seed(params.seed, 0x5eedu));
  std::vector<FreqItemCenter> centers;
  if (!kept.empty()) {
    std::vector<double> nearest(kept.size(), std::numeric_limits<double>::infinity());
    std::vector<bool> chosen(kept.size(), false);
    std::size_t next = 0;
    while (centers.size() < k) {
      chosen[next] = true;
      centers.push_back(kept[next].center);
      double total = 0.0;
      for (std::size_t c = 0; c < kept.size(); ++c) {
        const double dist = weighted_jaccard_distance(kept[c].center.center, kept[next].center.center);
        nearest[c] = std::min(nearest[c], dist);
        if (!chosen[c]) total += static_cast<double>(kept[c].support) * nearest[c] * nearest[c];
      }
      if (centers.size() == k || total <= 0.0) break;
      const double target = std::uniform_real_distribution<double>(0.0, total)(rng);
      double run = 0.0;
      next = kept.size();
      for (std::size_t c = 0; c < kept.size(); ++c) {
        if (chosen[c]) continue;
        const double mass = static_cast<double>(kept[c].support) * nearest[c] * nearest[c];
        if (mass <= 0.0) continue;
        next = c;
        run += mass;
        if (run >= target) break;
      }
      if (next == kept.size()) break;
    }
  }

  // Pad with random distinct data points.
  if (centers.size() < k) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      std::swap(order[i], order[i + static_cast<std::size_t>(rng() % (order.size() - i))]);
    }
    std::vector<bool> used(data.size(), false);
    for (int pass = 0; pass < 2 && centers.size() < k; ++pass) {
      for (auto i : order) {
        if (centers.size() == k) break;
        if (used[i] || data[i].empty()) continue;
        bool distinct = true;
        if (pass == 0) {
          for (const auto& c : centers) distinct = distinct && !(c.center == scaled[i]);
        }
        if (!distinct) continue;
        used[i] = true;
        centers.push_back({scaled[i], 1});
      }
    }
  }
  if (centers.size() < k) throw DataError("kfreq: not enough non-empty rows to seed k centers");
  // Seeding ran on the rescaled rows.
  for (auto& c : centers) {
    for (auto& e : c.center.entries) e.v *= max_value;
  }
  return centers;
}

// ---------------------------------------------------------------------------
// Lloyd iterations

struct ClusterResult {
  std::vector<int> labels;
  std::vector<FreqItemCenter> centers;
  int iterations = 0;
  double mean_distance = 0.0;
  // Per assignment step from the second on: (cost of the previous labels,
  // cost of the new labels), both against the same centers.
  std::vector<std::pair<double, double>> assignment_trace;
};

namespace detail {

/// Centers laid out densely for O(nnz) distance evaluation.
class DenseCenters {
 public:
  DenseCenters(const std::vector<FreqItemCenter>& centers, std::size_t width)
      : width_(width), values_(centers.size() * width, 0.0), l1_(centers.size(), 0.0) {
    for (std::size_t c = 0; c < centers.size(); ++c) {
      for (const auto& e : centers[c].center.entries) {
        if (e.t < width) values_[c * width + e.t] = e.v;
        l1_[c] += e.v;
      }
    }
  }

  double distance(std::size_t c, const SparseWeightedVector& v, double v_l1) const {
    double lo = 0.0;
    const double* row = values_.data() + c * width_;
    for (const auto& e : v.entries) lo += std::min(e.v, row[e.t]);
    const double hi = v_l1 + l1_[c] - lo;
    if (hi <= 0.0) return 0.0;
    return 1.0 - lo / hi;
  }

  std::size_t size() const { return l1_.size(); }

 private:
  std::size_t width_;
  std::vector<double> values_;
  std::vector<double> l1_;
};

}  // namespace detail

/// Lloyd-style weighted k-FreqItems. Assignment ties (within kTieTolerance)
/// go to the lowest center id; empty clusters take the worst-fit row.
inline ClusterResult cluster(std::span<const SparseWeightedVector> data, const ClusterParams& params,
                             std::optional<std::vector<FreqItemCenter>> initial_centers = std::nullopt) {
  params.validate();
  const auto k = static_cast<std::size_t>(params.k);
  const std::size_t n = data.size();
  if (n < k) throw DataError("kfreq: need at least k=" + std::to_string(k) + " rows, got " + std::to_string(n));

  std::size_t width = 0;
  std::vector<double> l1(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!data[i].empty()) width = std::max<std::size_t>(width, data[i].entries.back().t + 1);
    l1[i] = data[i].l1();
  }

  ClusterResult result;
  result.centers = initial_centers ? std::move(*initial_centers) : silk_seed(data, params);
  if (result.centers.size() != k) throw ConfigError("kfreq: initial centers must number k");

  std::vector<double> dist(n, 0.0);
  std::vector<int> labels(n, 0);
  std::vector<int> previous;
  constexpr std::size_t kBlock = 256;
  for (int it = 1; it <= params.max_iter; ++it) {
    const detail::DenseCenters dense(result.centers, width);
    parallel_for((n + kBlock - 1) / kBlock, [&](std::size_t block) {
      const std::size_t end = std::min(n, (block + 1) * kBlock);
      for (std::size_t i = block * kBlock; i < end; ++i) {
        int best = 0;
        double best_d = dense.distance(0, data[i], l1[i]);
        for (std::size_t c = 1; c < k; ++c) {
          const double d = dense.distance(c, data[i], l1[i]);
          if (d < best_d - kTieTolerance) {
            best_d = d;
            best = static_cast<int>(c);
          }
        }
        labels[i] = best;
        dist[i] = best_d;
      }
    });
    if (!previous.empty()) {
      double before = 0.0, after = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        before += dense.distance(static_cast<std::size_t>(previous[i]), data[i], l1[i]);
        after += dist[i];
      }
      result.assignment_trace.emplace_back(before / static_cast<double>(n), after / static_cast<double>(n));
    }

    // Empty-cluster repair: move the worst-fit row of a multi-member cluster.
    std::vector<std::size_t> sizes(k, 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    for (std::size_t e = 0; e < k; ++e) {
      if (sizes[e] > 0) continue;
      std::size_t worst = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[static_cast<std::size_t>(labels[i])] < 2) continue;
        if (worst == n || dist[i] > dist[worst] + kTieTolerance) worst = i;
      }
      if (worst == n) break;
      --sizes[static_cast<std::size_t>(labels[worst])];
      labels[worst] = static_cast<int>(e);
      dist[worst] = 0.0;
      sizes[e] = 1;
    }

    result.iterations = it;
    if (labels == previous) break;
    previous = labels;

    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
    std::vector<FreqItemCenter> updated(k);
    parallel_for(k, [&](std::size_t c) { updated[c] = freqitem_center(data, members[c], params.alpha); });
    for (std::size_t c = 0; c < k; ++c) {
      // A center left empty keeps its previous coordinates.
      if (!updated[c].center.empty()) result.centers[c] = std::move(updated[c]);
    }
  }

  result.labels = std::move(labels);
  const detail::DenseCenters dense(result.centers, width);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += dense.distance(static_cast<std::size_t>(result.labels[i]), data[i], l1[i]);
  result.mean_distance = total / static_cast<double>(n);
  return result;
}

}  // namespace wise
