#pragma once

// Discriminative FreqItems explanations over the record matrix of Stage-I
// round labels and the final partition.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wise/data_model.hpp"
#include "wise/forest.hpp"
#include "wise/lofo.hpp"
#include "wise/util.hpp"

namespace wise {

/// n x R matrix of Stage-I labels, each in [0, k0).
struct RecordMatrix {
  std::size_t n = 0;
  std::size_t rounds = 0;
  int k0 = 0;
  std::vector<int> labels;  // row-major

  RecordMatrix() = default;
  RecordMatrix(std::size_t n_rows, std::size_t r, int base_k) : n(n_rows), rounds(r), k0(base_k), labels(n_rows * r, 0) {}

  int at(std::size_t i, std::size_t r) const { return labels[i * rounds + r]; }
  int& at(std::size_t i, std::size_t r) { return labels[i * rounds + r]; }

  void validate() const {
    if (labels.size() != n * rounds) throw InvariantError("record matrix: shape mismatch");
    for (int l : labels) {
      if (l < 0 || l >= k0) throw InvariantError("record matrix: label outside [0, k0)");
    }
  }
};

/// K x R x k0 tensor of label frequencies per final cluster and round.
struct ClusterBitFrequency {
  std::size_t clusters = 0;
  std::size_t rounds = 0;
  std::size_t k0 = 0;
  std::vector<double> values;

  double at(std::size_t j, std::size_t r, std::size_t t) const { return values[(j * rounds + r) * k0 + t]; }
  double& at(std::size_t j, std::size_t r, std::size_t t) { return values[(j * rounds + r) * k0 + t]; }
};

struct DfiScores {
  ClusterBitFrequency dfi;       // same layout as F
  std::vector<double> credits;   // K x R, c[j,r] = sum_t DFI[j,r,t]

  double credit(std::size_t j, std::size_t r) const { return credits[j * dfi.rounds + r]; }
};

/// Row-major matrix of weight rows with an all-zero flag per row.
struct WeightMatrix {
  std::size_t rows = 0;
  std::size_t d = 0;
  std::vector<double> values;
  std::vector<bool> zero_row;

  std::span<const double> row(std::size_t i) const { return {values.data() + i * d, d}; }
  std::span<double> row(std::size_t i) { return {values.data() + i * d, d}; }
};

struct ClusterWeights {
  WeightMatrix raw;         // sum_r c[j,r] w^(r)
  WeightMatrix normalized;  // L1 rows; zero rows flagged as undiscriminated
};

struct InstanceWeights {
  WeightMatrix raw;
  WeightMatrix normalized;
};

struct Explanations {
  ClusterBitFrequency frequency;
  DfiScores scores;
  ClusterWeights cluster;
  InstanceWeights instance;
  std::vector<std::size_t> cluster_sizes;
  double consistency_deviation = 0.0;
};

inline ClusterBitFrequency cluster_bit_frequency(const RecordMatrix& records, std::span<const int> final_labels, int k) {
  if (final_labels.size() != records.n) throw DataError("dfi: label count does not match record matrix rows");
  if (k < 1) throw ConfigError("dfi: K must be >= 1");
  ClusterBitFrequency f;
  f.clusters = static_cast<std::size_t>(k);
  f.rounds = records.rounds;
  f.k0 = static_cast<std::size_t>(records.k0);
  f.values.assign(f.clusters * f.rounds * f.k0, 0.0);
  std::vector<std::size_t> size(f.clusters, 0);
  for (std::size_t i = 0; i < records.n; ++i) {
    const int j = final_labels[i];
    if (j < 0 || j >= k) throw DataError("dfi: final label outside [0, K)");
    ++size[static_cast<std::size_t>(j)];
    for (std::size_t r = 0; r < f.rounds; ++r) f.at(static_cast<std::size_t>(j), r, static_cast<std::size_t>(records.at(i, r))) += 1.0;
  }
  for (std::size_t j = 0; j < f.clusters; ++j) {
    if (size[j] == 0) throw DataError("dfi: final cluster " + std::to_string(j) + " is empty");
    for (std::size_t r = 0; r < f.rounds; ++r) {
      for (std::size_t t = 0; t < f.k0; ++t) f.at(j, r, t) /= static_cast<double>(size[j]);
    }
  }
  return f;
}

/// Positive-part margin over the strongest competing cluster. With a single
/// cluster there is no competitor and DFI equals F.
inline DfiScores dfi_scores(const ClusterBitFrequency& f) {
  DfiScores s;
  s.dfi = f;
  s.credits.assign(f.clusters * f.rounds, 0.0);
  for (std::size_t r = 0; r < f.rounds; ++r) {
    for (std::size_t t = 0; t < f.k0; ++t) {
      for (std::size_t j = 0; j < f.clusters; ++j) {
        if (f.clusters == 1) continue;
        double rival = 0.0;
        for (std::size_t o = 0; o < f.clusters; ++o) {
          if (o != j) rival = std::max(rival, f.at(o, r, t));
        }
        s.dfi.at(j, r, t) = std::max(0.0, f.at(j, r, t) - rival);
      }
    }
  }
  for (std::size_t j = 0; j < f.clusters; ++j) {
    for (std::size_t r = 0; r < f.rounds; ++r) {
      double c = 0.0;
      for (std::size_t t = 0; t < f.k0; ++t) c += s.dfi.at(j, r, t);
      s.credits[j * f.rounds + r] = c;
    }
  }
  return s;
}

namespace detail {

inline void normalize_rows(const WeightMatrix& raw, WeightMatrix& out) {
  out = raw;
  out.zero_row.assign(raw.rows, false);
  for (std::size_t i = 0; i < raw.rows; ++i) {
    auto row = out.row(i);
    double total = 0.0;
    for (double v : row) total += v;
    if (total > 0.0) {
      for (double& v : row) v /= total;
    } else {
      std::fill(row.begin(), row.end(), 0.0);
      out.zero_row[i] = true;
    }
  }
}

inline std::size_t view_width(std::span<const FeatureWeightVector> views) {
  if (views.empty()) throw ConfigError("dfi: no weight views");
  const std::size_t d = views.front().w.size();
  for (const auto& v : views) {
    if (v.w.size() != d) throw ConfigError("dfi: weight views differ in length");
  }
  return d;
}

}  // namespace detail

inline ClusterWeights cluster_weights(const DfiScores& scores, std::span<const FeatureWeightVector> views) {
  if (views.size() != scores.dfi.rounds) throw ConfigError("dfi: view count must equal the number of rounds");
  const std::size_t d = detail::view_width(views);
  ClusterWeights out;
  out.raw.rows = scores.dfi.clusters;
  out.raw.d = d;
  out.raw.values.assign(out.raw.rows * d, 0.0);
  out.raw.zero_row.assign(out.raw.rows, false);
  for (std::size_t j = 0; j < out.raw.rows; ++j) {
    auto row = out.raw.row(j);
    for (std::size_t r = 0; r < views.size(); ++r) {
      const double c = scores.credit(j, r);
      if (c == 0.0) continue;
      for (std::size_t f = 0; f < d; ++f) row[f] += c * views[r].w[f];
    }
  }
  detail::normalize_rows(out.raw, out.normalized);
  return out;
}

inline InstanceWeights instance_weights(const RecordMatrix& records, std::span<const int> final_labels,
                                        const ClusterBitFrequency& f, const DfiScores& scores,
                                        std::span<const FeatureWeightVector> views, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("dfi: epsilon must be > 0");
  if (views.size() != records.rounds) throw ConfigError("dfi: view count must equal the number of rounds");
  const std::size_t d = detail::view_width(views);
  InstanceWeights out;
  out.raw.rows = records.n;
  out.raw.d = d;
  out.raw.values.assign(records.n * d, 0.0);
  out.raw.zero_row.assign(records.n, false);
  parallel_for(records.n, [&](std::size_t i) {
    const auto j = static_cast<std::size_t>(final_labels[i]);
    auto row = out.raw.row(i);
    for (std::size_t r = 0; r < records.rounds; ++r) {
      const auto t = static_cast<std::size_t>(records.at(i, r));
      const double contribution = scores.dfi.at(j, r, t) / std::max(epsilon, f.at(j, r, t));
      if (contribution == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) row[k] += contribution * views[r].w[k];
    }
  });
  detail::normalize_rows(out.raw, out.normalized);
  return out;
}

/// Max over clusters of || mean of member raw vectors - raw cluster vector ||_inf.
inline double consistency_check(const WeightMatrix& instance_raw, std::span<const int> final_labels,
                                const WeightMatrix& cluster_raw) {
  std::vector<double> mean(cluster_raw.rows * cluster_raw.d, 0.0);
  std::vector<std::size_t> size(cluster_raw.rows, 0);
  for (std::size_t i = 0; i < instance_raw.rows; ++i) {
    const auto j = static_cast<std::size_t>(final_labels[i]);
    ++size[j];
    const auto row = instance_raw.row(i);
    for (std::size_t k = 0; k < cluster_raw.d; ++k) mean[j * cluster_raw.d + k] += row[k];
  }
  double worst = 0.0;
  for (std::size_t j = 0; j < cluster_raw.rows; ++j) {
    if (size[j] == 0) continue;
    const auto target = cluster_raw.row(j);
    for (std::size_t k = 0; k < cluster_raw.d; ++k) {
      worst = std::max(worst, std::abs(mean[j * cluster_raw.d + k] / static_cast<double>(size[j]) - target[k]));
    }
  }
  return worst;
}

inline Explanations explain(const RecordMatrix& records, std::span<const int> final_labels, int k,
                            std::span<const FeatureWeightVector> views, double epsilon = 1e-12) {
  Explanations e;
  e.frequency = cluster_bit_frequency(records, final_labels, k);
  e.scores = dfi_scores(e.frequency);
  e.cluster = cluster_weights(e.scores, views);
  e.instance = instance_weights(records, final_labels, e.frequency, e.scores, views, epsilon);
  e.cluster_sizes.assign(static_cast<std::size_t>(k), 0);
  for (int l : final_labels) ++e.cluster_sizes[static_cast<std::size_t>(l)];
  e.consistency_deviation = consistency_check(e.instance.raw, final_labels, e.cluster.raw);
  if (k == 1) log(LogLevel::kInfo, "dfi: K=1 has no competing cluster; DFI is taken equal to F");
  return e;
}

// ---------------------------------------------------------------------------
// Faithfulness: can a shallow tree on the top-ranked features recover the
// final labels?

/// Cluster-size-weighted average of the normalized cluster weight rows.
inline std::vector<double> global_dfi_importance(const WeightMatrix& cluster_normalized, std::span<const std::size_t> sizes) {
  std::vector<double> out(cluster_normalized.d, 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j < cluster_normalized.rows; ++j) {
    const double w = static_cast<double>(sizes[j]);
    total += w;
    const auto row = cluster_normalized.row(j);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * row[k];
  }
  if (total > 0.0) {
    for (double& v : out) v /= total;
  }
  return out;
}

/// Feature indices by decreasing importance (ties: lower index first).
inline std::vector<std::size_t> rank_features(std::span<const double> importance) {
  std::vector<std::size_t> order(importance.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return importance[a] > importance[b]; });
  return order;
}

struct FaithfulnessRow {
  std::string subset;  // "all", "top", "random"
  std::size_t features = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

struct FaithfulnessParams {
  std::vector<std::size_t> top_k = {3, 5, 10};
  int trials = 30;
  int max_depth = 6;
  double test_fraction = 0.3;
  std::uint64_t seed = 0;
};

struct FaithfulnessReport {
  std::vector<double> importance;
  std::vector<std::size_t> ranking;
  std::vector<FaithfulnessRow> rows;
};

/// Inputs for a probe tree over a subset of table columns.
inline FeatureMatrix feature_matrix(const MixedTable& table, std::span<const std::size_t> columns) {
  FeatureMatrix x;
  x.n = table.n();
  x.f = columns.size();
  x.values.assign(x.n * x.f, 0.0);
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const auto& col = table.column(columns[k]);
    if (col.kind == ColumnKind::kNominal) {
      x.categories.push_back(static_cast<int>(col.levels().size()));
      const auto codes = table.codes(columns[k]);
      for (std::size_t i = 0; i < x.n; ++i) x.values[i * x.f + k] = codes[i];
    } else {
      x.categories.push_back(0);
      const auto scaled = scalar_column(table, columns[k]);
      for (std::size_t i = 0; i < x.n; ++i) x.values[i * x.f + k] = scaled.values[i];
    }
  }
  return x;
}

inline double macro_f1(std::span<const int> truth, std::span<const int> predicted, int classes) {
  std::vector<double> tp(static_cast<std::size_t>(classes), 0.0), fp(tp), fn(tp);
  std::vector<bool> present(static_cast<std::size_t>(classes), false);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto a = static_cast<std::size_t>(truth[i]);
    const auto b = static_cast<std::size_t>(predicted[i]);
    present[a] = present[b] = true;
    if (a == b) {
      tp[a] += 1.0;
    } else {
      fp[b] += 1.0;
      fn[a] += 1.0;
    }
  }
  double sum = 0.0;
  int counted = 0;
  for (std::size_t c = 0; c < tp.size(); ++c) {
    if (!present[c]) continue;
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    sum += denom > 0.0 ? 2.0 * tp[c] / denom : 0.0;
    ++counted;
  }
  return counted ? sum / counted : 0.0;
}

/// Shallow-tree probe on a feature subset; seeded train/test split.
inline std::pair<double, double> probe_accuracy(const MixedTable& table, std::span<const int> labels, int classes,
                                                std::span<const std::size_t> columns, const FaithfulnessParams& params) {
  const FeatureMatrix x = feature_matrix(table, columns);
  std::vector<double> y(labels.begin(), labels.end());
  std::vector<std::size_t> rows(table.n());
  std::iota(rows.begin(), rows.end(), 0);
  std::mt19937_64 rng(derive_seed(params.seed, 0xfa17u));
  detail::partial_shuffle(rows, rows.size(), rng);
  const auto test_n = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::round(params.test_fraction * static_cast<double>(rows.size()))), 1, rows.size() - 1);
  std::vector<std::size_t> test(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(test_n));
  std::vector<std::size_t> train(rows.begin() + static_cast<std::ptrdiff_t>(test_n), rows.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());

  ForestParams tree_params;
  tree_params.max_depth = params.max_depth;
  tree_params.min_samples_leaf = 1;
  tree_params.features_per_split = 1.0;
  const DecisionTree tree = train_tree(x, y, train, TaskKind::kClassification, classes, tree_params, params.seed);
  std::vector<int> truth, predicted;
  for (auto i : test) {
    truth.push_back(labels[i]);
    predicted.push_back(tree.predict_class(x.row(i)));
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == predicted[i] ? 1 : 0;
  return {static_cast<double>(hits) / static_cast<double>(truth.size()), macro_f1(truth, predicted, classes)};
}

inline FaithfulnessReport faithfulness_eval(const MixedTable& table, std::span<const int> labels,
                                            const WeightMatrix& cluster_normalized, std::span<const std::size_t> sizes,
                                            const FaithfulnessParams& params) {
  if (labels.size() != table.n()) throw DataError("faithfulness: label count does not match table rows");
  if (table.n() < 2) throw DataError("faithfulness: need at least two rows");
  const std::size_t d = table.d();
  for (auto k : params.top_k) {
    if (k > d || k == 0) throw ConfigError("faithfulness: subset size " + std::to_string(k) + " not in [1, d]");
  }
  if (params.trials < 1) throw ConfigError("faithfulness: trials must be >= 1");
  if (!(params.test_fraction > 0.0 && params.test_fraction < 1.0)) throw ConfigError("faithfulness: test_fraction must be in (0,1)");
  const int classes = static_cast<int>(cluster_normalized.rows);
  FaithfulnessReport report;
  report.importance = global_dfi_importance(cluster_normalized, sizes);
  report.ranking = rank_features(report.importance);

  std::vector<std::size_t> all(d);
  std::iota(all.begin(), all.end(), 0);
  auto [acc_all, f1_all] = probe_accuracy(table, labels, classes, all, params);
  report.rows.push_back({"all", d, acc_all, f1_all});
  for (auto k : params.top_k) {
    std::vector<std::size_t> top(report.ranking.begin(), report.ranking.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(top.begin(), top.end());
    auto [acc, f1] = probe_accuracy(table, labels, classes, top, params);
    report.rows.push_back({"top", k, acc, f1});
  }
  for (auto k : params.top_k) {
    double acc_sum = 0.0, f1_sum = 0.0;
    for (int trial = 0; trial < params.trials; ++trial) {
      std::mt19937_64 rng(derive_seed(params.seed, 0x7a2du, k, trial));
      std::vector<std::size_t> pick = all;
      detail::partial_shuffle(pick, k, rng);
      pick.resize(k);
      std::sort(pick.begin(), pick.end());
      auto [acc, f1] = probe_accuracy(table, labels, classes, pick, params);
      acc_sum += acc;
      f1_sum += f1;
    }
    report.rows.push_back({"random", k, acc_sum / params.trials, f1_sum / params.trials});
  }
  return report;
}

}  // namespace wise
