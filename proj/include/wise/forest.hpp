#pragma once

// CART decision trees and random-forest ensembles over mixed inputs.
// Numeric inputs split on x <= threshold; categorical inputs split on a
// level-membership set (members go left).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "wise/data_model.hpp"
#include "wise/util.hpp"

namespace wise {

enum class TaskKind { kRegression, kClassification };

/// Row-major feature matrix. categories[k] == 0 marks a numeric input,
/// otherwise input k holds integer level codes in [0, categories[k]).
struct FeatureMatrix {
  std::size_t n = 0;
  std::size_t f = 0;
  std::vector<double> values;
  std::vector<int> categories;

  std::span<const double> row(std::size_t i) const { return {values.data() + i * f, f}; }
  double at(std::size_t i, std::size_t k) const { return values[i * f + k]; }
  bool is_categorical(std::size_t k) const { return categories[k] > 0; }
};

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  std::vector<std::uint8_t> left_levels;  // categorical split membership
  int left = -1;
  int right = -1;
  std::size_t count = 0;
  double value = 0.0;          // regression prediction
  std::vector<double> probs;   // classification distribution

  bool is_leaf() const { return feature < 0; }

  bool goes_left(std::span<const double> row) const {
    const double x = row[static_cast<std::size_t>(feature)];
    if (left_levels.empty()) return x <= threshold;
    const auto code = static_cast<std::size_t>(x);
    return code < left_levels.size() && left_levels[code] != 0;
  }
};

/// A tree stored as a flat node array; node 0 is the root.
struct DecisionTree {
  TaskKind task = TaskKind::kRegression;
  std::vector<TreeNode> nodes;

  std::size_t leaf_of(std::span<const double> row) const {
    std::size_t at = 0;
    while (!nodes[at].is_leaf()) at = static_cast<std::size_t>(nodes[at].goes_left(row) ? nodes[at].left : nodes[at].right);
    return at;
  }

  double predict_value(std::span<const double> row) const { return nodes[leaf_of(row)].value; }

  const std::vector<double>& predict_proba(std::span<const double> row) const { return nodes[leaf_of(row)].probs; }

  /// Scalar output: regression value or the probability of `output_class`.
  double predict_scalar(std::span<const double> row, int output_class) const {
    const auto& leaf = nodes[leaf_of(row)];
    return task == TaskKind::kRegression ? leaf.value : leaf.probs[static_cast<std::size_t>(output_class)];
  }

  int predict_class(std::span<const double> row) const {
    const auto& p = predict_proba(row);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
  }

  std::size_t depth(std::size_t at = 0) const {
    if (nodes[at].is_leaf()) return 0;
    return 1 + std::max(depth(static_cast<std::size_t>(nodes[at].left)), depth(static_cast<std::size_t>(nodes[at].right)));
  }
};

struct ForestParams {
  int trees = 10;  // T
  int max_depth = 20;
  std::size_t min_samples_leaf = 50;
  double train_sample_frac = 0.1;
  // Fraction of inputs tried per split; <= 0 selects sqrt(f) for
  // classification and f/3 for regression.
  double features_per_split = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (trees < 1) throw ConfigError("forest: T must be >= 1");
    if (!(train_sample_frac > 0.0 && train_sample_frac <= 1.0)) throw ConfigError("forest: train_sample_frac must be in (0,1]");
    if (max_depth < 0) throw ConfigError("forest: max_depth must be >= 0");
    if (features_per_split > 1.0) throw ConfigError("forest: features_per_split must be <= 1");
  }
};

struct ForestModel {
  TaskKind task = TaskKind::kRegression;
  int n_classes = 0;
  std::size_t target = 0;
  std::vector<DecisionTree> trees;
  std::vector<double> quality;  // q_u in [0, 1]
  std::vector<std::vector<std::size_t>> train_rows;
  std::vector<std::vector<std::size_t>> holdout_rows;
  std::vector<int> majority_class;  // per tree, most frequent training class

  double predict_value(std::span<const double> row) const {
    double sum = 0.0;
    for (const auto& t : trees) sum += t.predict_value(row);
    return sum / static_cast<double>(trees.size());
  }

  std::vector<double> predict_proba(std::span<const double> row) const {
    std::vector<double> acc(static_cast<std::size_t>(n_classes), 0.0);
    for (const auto& t : trees) {
      const auto& p = t.predict_proba(row);
      for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += p[c];
    }
    for (double& v : acc) v /= static_cast<double>(trees.size());
    return acc;
  }
};

namespace detail {

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

/// First `take` entries of a seeded Fisher-Yates shuffle of `items`.
template <typename T>
void partial_shuffle(std::vector<T>& items, std::size_t take, std::mt19937_64& rng) {
  take = std::min(take, items.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(items[i], items[i + uniform_index(rng, items.size() - i)]);
  }
}

struct NodeStats {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::vector<double> class_counts;
  std::size_t count = 0;

  void add(double y, TaskKind task) {
    ++count;
    if (task == TaskKind::kRegression) {
      sum += y;
      sum_sq += y * y;
    } else {
      class_counts[static_cast<std::size_t>(y)] += 1.0;
    }
  }

  void remove(double y, TaskKind task) {
    --count;
    if (task == TaskKind::kRegression) {
      sum -= y;
      sum_sq -= y * y;
    } else {
      class_counts[static_cast<std::size_t>(y)] -= 1.0;
    }
  }

  /// Count-weighted impurity: SSE for regression, n * Gini for classification.
  double weighted_impurity(TaskKind task) const {
    if (count == 0) return 0.0;
    const double n = static_cast<double>(count);
    if (task == TaskKind::kRegression) return std::max(0.0, sum_sq - sum * sum / n);
    double sq = 0.0;
    for (double c : class_counts) sq += c * c;
    return n - sq / n;
  }
};

struct SplitChoice {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  std::vector<std::uint8_t> left_levels;
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::span<const double> y, TaskKind task, int n_classes, const ForestParams& params,
              std::uint64_t seed)
      : x_(x), y_(y), task_(task), n_classes_(n_classes), params_(params), rng_(seed) {
    std::size_t per_split = x.f;
    if (params.features_per_split > 0.0) {
      per_split = static_cast<std::size_t>(std::ceil(params.features_per_split * static_cast<double>(x.f)));
    } else if (task == TaskKind::kClassification) {
      per_split = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x.f))));
    } else {
      per_split = static_cast<std::size_t>(std::ceil(static_cast<double>(x.f) / 3.0));
    }
    per_split_ = std::clamp<std::size_t>(per_split, std::min<std::size_t>(1, x.f), x.f);
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    tree_.task = task_;
    tree_.nodes.clear();
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  NodeStats empty_stats() const {
    NodeStats s;
    if (task_ == TaskKind::kClassification) s.class_counts.assign(static_cast<std::size_t>(n_classes_), 0.0);
    return s;
  }

  int grow(std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    NodeStats stats = empty_stats();
    for (auto r : rows) stats.add(y_[r], task_);
    {
      TreeNode& node = tree_.nodes.back();
      node.count = rows.size();
      if (task_ == TaskKind::kRegression) {
        node.value = stats.sum / static_cast<double>(stats.count);
      } else {
        node.probs.resize(stats.class_counts.size());
        for (std::size_t c = 0; c < node.probs.size(); ++c) node.probs[c] = stats.class_counts[c] / static_cast<double>(stats.count);
      }
    }
    double impurity = stats.weighted_impurity(task_);
    if (task_ == TaskKind::kRegression) {
      // Two-pass SSE so that constant targets give exactly zero.
      const double mean = stats.sum / static_cast<double>(stats.count);
      impurity = 0.0;
      for (auto r : rows) impurity += (y_[r] - mean) * (y_[r] - mean);
    }
    if (depth >= params_.max_depth || impurity <= 0.0 ||
        rows.size() < 2 * std::max<std::size_t>(1, params_.min_samples_leaf)) {
      return id;
    }

    SplitChoice best = find_split(rows, stats, impurity);
    if (best.feature < 0) return id;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    TreeNode probe;
    probe.feature = best.feature;
    probe.threshold = best.threshold;
    probe.left_levels = best.left_levels;
    for (auto r : rows) (probe.goes_left(x_.row(r)) ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const int l = grow(left, depth + 1);
    const int rr = grow(right, depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left_levels = std::move(best.left_levels);
    node.left = l;
    node.right = rr;
    return id;
  }

  SplitChoice find_split(const std::vector<std::size_t>& rows, const NodeStats& parent, double parent_impurity) {
    std::vector<std::size_t> candidates(x_.f);
    std::iota(candidates.begin(), candidates.end(), 0);
    if (per_split_ < x_.f) {
      partial_shuffle(candidates, per_split_, rng_);
      candidates.resize(per_split_);
      std::sort(candidates.begin(), candidates.end());
    }
    SplitChoice best;
    const double min_gain = 1e-12 * std::max(1.0, parent_impurity);
    for (auto k : candidates) {
      if (x_.is_categorical(k)) {
        scan_categorical(rows, parent, parent_impurity, k, min_gain, best);
      } else {
        scan_numeric(rows, parent, parent_impurity, k, min_gain, best);
      }
    }
    return best;
  }

  void consider(double gain, int feature, double threshold, std::vector<std::uint8_t> levels, double min_gain,
                SplitChoice& best) const {
    // Strict improvement keeps the earliest (lowest feature, lowest threshold) among ties.
    if (gain > min_gain && gain > best.gain + 1e-12 * std::max(1.0, std::abs(best.gain))) {
      best.gain = gain;
      best.feature = feature;
      best.threshold = threshold;
      best.left_levels = std::move(levels);
    }
  }

  void scan_numeric(const std::vector<std::size_t>& rows, const NodeStats& parent, double parent_impurity, std::size_t k,
                    double min_gain, SplitChoice& best) {
    order_.assign(rows.begin(), rows.end());
    std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      const double xa = x_.at(a, k), xb = x_.at(b, k);
      return xa < xb || (xa == xb && a < b);
    });
    NodeStats left = empty_stats();
    NodeStats right = parent;
    const std::size_t min_leaf = std::max<std::size_t>(1, params_.min_samples_leaf);
    for (std::size_t i = 0; i + 1 < order_.size(); ++i) {
      const double yv = y_[order_[i]];
      left.add(yv, task_);
      right.remove(yv, task_);
      const double xi = x_.at(order_[i], k);
      const double xn = x_.at(order_[i + 1], k);
      if (xi == xn || left.count < min_leaf || right.count < min_leaf) continue;
      const double gain = parent_impurity - left.weighted_impurity(task_) - right.weighted_impurity(task_);
      double threshold = xi + (xn - xi) / 2.0;
      if (!(threshold >= xi && threshold < xn)) threshold = xi;
      consider(gain, static_cast<int>(k), threshold, {}, min_gain, best);
    }
  }

  void scan_categorical(const std::vector<std::size_t>& rows, const NodeStats& parent, double parent_impurity,
                        std::size_t k, double min_gain, SplitChoice& best) {
    const auto levels = static_cast<std::size_t>(x_.categories[k]);
    std::vector<NodeStats> per_level(levels, empty_stats());
    for (auto r : rows) per_level[static_cast<std::size_t>(x_.at(r, k))].add(y_[r], task_);
    std::vector<std::size_t> present;
    for (std::size_t l = 0; l < levels; ++l) {
      if (per_level[l].count > 0) present.push_back(l);
    }
    if (present.size() < 2) return;

    // Order levels by a scalar score, then scan prefixes of that order.
    std::vector<double> score(levels, 0.0);
    std::size_t major = 0;
    if (task_ == TaskKind::kClassification) {
      major = static_cast<std::size_t>(std::max_element(parent.class_counts.begin(), parent.class_counts.end()) - parent.class_counts.begin());
    }
    for (auto l : present) {
      const double n = static_cast<double>(per_level[l].count);
      score[l] = task_ == TaskKind::kRegression ? per_level[l].sum / n : per_level[l].class_counts[major] / n;
    }
    std::stable_sort(present.begin(), present.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });

    NodeStats left = empty_stats();
    NodeStats right = parent;
    std::vector<std::uint8_t> membership(levels, 0);
    const std::size_t min_leaf = std::max<std::size_t>(1, params_.min_samples_leaf);
    for (std::size_t p = 0; p + 1 < present.size(); ++p) {
      const auto& lv = per_level[present[p]];
      membership[present[p]] = 1;
      left.count += lv.count;
      right.count -= lv.count;
      if (task_ == TaskKind::kRegression) {
        left.sum += lv.sum;
        left.sum_sq += lv.sum_sq;
        right.sum -= lv.sum;
        right.sum_sq -= lv.sum_sq;
      } else {
        for (std::size_t c = 0; c < lv.class_counts.size(); ++c) {
          left.class_counts[c] += lv.class_counts[c];
          right.class_counts[c] -= lv.class_counts[c];
        }
      }
      if (left.count < min_leaf || right.count < min_leaf) continue;
      const double gain = parent_impurity - left.weighted_impurity(task_) - right.weighted_impurity(task_);
      consider(gain, static_cast<int>(k), static_cast<double>(p), membership, min_gain, best);
    }
  }

  const FeatureMatrix& x_;
  std::span<const double> y_;
  TaskKind task_;
  int n_classes_;
  const ForestParams& params_;
  std::mt19937_64 rng_;
  std::size_t per_split_ = 1;
  DecisionTree tree_;
  std::vector<std::size_t> order_;
};

}  // namespace detail

/// Greedy CART on the given rows of x. Variance reduction for regression,
/// Gini decrease for classification.
inline DecisionTree train_tree(const FeatureMatrix& x, std::span<const double> y, std::vector<std::size_t> rows, TaskKind task,
                               int n_classes, const ForestParams& params, std::uint64_t seed) {
  if (rows.empty()) throw DataError("forest: cannot train a tree on no rows");
  if (task == TaskKind::kClassification && n_classes < 1) throw ConfigError("forest: classification needs n_classes >= 1");
  detail::TreeBuilder builder(x, y, task, n_classes, params, seed);
  return builder.build(std::move(rows));
}

inline DecisionTree train_tree(const FeatureMatrix& x, std::span<const double> y, TaskKind task, int n_classes,
                               const ForestParams& params, std::uint64_t seed) {
  std::vector<std::size_t> rows(x.n);
  std::iota(rows.begin(), rows.end(), 0);
  return train_tree(x, y, std::move(rows), task, n_classes, params, seed);
}

/// Validation quality of one tree: accuracy, or R^2 clamped at 0.
inline double tree_quality(const DecisionTree& tree, const FeatureMatrix& x, std::span<const double> y,
                           std::span<const std::size_t> rows) {
  if (rows.empty()) return 0.0;
  if (tree.task == TaskKind::kClassification) {
    std::size_t hits = 0;
    for (auto r : rows) hits += tree.predict_class(x.row(r)) == static_cast<int>(y[r]) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(rows.size());
  }
  double mean = 0.0;
  for (auto r : rows) mean += y[r];
  mean /= static_cast<double>(rows.size());
  double sse = 0.0;
  double sst = 0.0;
  for (auto r : rows) {
    const double e = y[r] - tree.predict_value(x.row(r));
    sse += e * e;
    sst += (y[r] - mean) * (y[r] - mean);
  }
  if (sst <= 0.0) return sse <= 1e-24 ? 1.0 : 0.0;
  return std::clamp(1.0 - sse / sst, 0.0, 1.0);
}

/// Each tree sees a seeded subsample (without replacement) of
/// ceil(train_sample_frac * n) rows and is scored on the remaining rows.
inline ForestModel train_forest(const FeatureMatrix& x, std::span<const double> y, TaskKind task, int n_classes,
                                const ForestParams& params) {
  params.validate();
  if (x.n == 0) throw DataError("forest: empty training data");
  ForestModel model;
  model.task = task;
  model.n_classes = n_classes;
  const auto t_count = static_cast<std::size_t>(params.trees);
  model.trees.resize(t_count);
  model.quality.assign(t_count, 0.0);
  model.train_rows.resize(t_count);
  model.holdout_rows.resize(t_count);
  model.majority_class.assign(t_count, 0);
  const std::size_t take = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(params.train_sample_frac * static_cast<double>(x.n))), 1, x.n);

  parallel_for(t_count, [&](std::size_t u) {
    std::mt19937_64 rng(derive_seed(params.seed, 0x5a11u, u));
    std::vector<std::size_t> rows(x.n);
    std::iota(rows.begin(), rows.end(), 0);
    detail::partial_shuffle(rows, take, rng);
    std::vector<std::size_t> train(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
    std::vector<std::size_t> held(rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end());
    std::sort(train.begin(), train.end());
    std::sort(held.begin(), held.end());
    if (task == TaskKind::kClassification) {
      std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
      for (auto r : train) ++counts[static_cast<std::size_t>(y[r])];
      model.majority_class[u] = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    }
    model.trees[u] = train_tree(x, y, train, task, n_classes, params, derive_seed(params.seed, 0x7ee5u, u));
    if (held.empty()) {
      log(LogLevel::kInfo, "forest: no held-out rows for tree " + std::to_string(u) + "; quality set to 0");
    }
    model.quality[u] = tree_quality(model.trees[u], x, y, held);
    model.train_rows[u] = std::move(train);
    model.holdout_rows[u] = std::move(held);
  });
  return model;
}

/// Inputs and target for predicting column `target` from all other columns.
struct LofoTask {
  FeatureMatrix x;
  std::vector<double> y;
  TaskKind task = TaskKind::kRegression;
  int n_classes = 0;
  std::vector<std::size_t> input_columns;  // original column index of each input
};

inline LofoTask make_lofo_task(const MixedTable& table, std::size_t target) {
  if (table.d() < 2) throw ConfigError("lofo: need at least two columns");
  LofoTask t;
  t.x.n = table.n();
  t.x.f = table.d() - 1;
  t.x.values.assign(t.x.n * t.x.f, 0.0);
  for (std::size_t j = 0; j < table.d(); ++j) {
    if (j != target) t.input_columns.push_back(j);
  }
  for (std::size_t k = 0; k < t.x.f; ++k) {
    const std::size_t j = t.input_columns[k];
    const auto& col = table.column(j);
    if (col.kind == ColumnKind::kNominal) {
      t.x.categories.push_back(static_cast<int>(col.levels().size()));
      const auto codes = table.codes(j);
      for (std::size_t i = 0; i < t.x.n; ++i) t.x.values[i * t.x.f + k] = codes[i];
    } else {
      t.x.categories.push_back(0);
      const auto scaled = scalar_column(table, j);
      for (std::size_t i = 0; i < t.x.n; ++i) t.x.values[i * t.x.f + k] = scaled.values[i];
    }
  }
  const auto& tcol = table.column(target);
  if (tcol.kind == ColumnKind::kNominal) {
    t.task = TaskKind::kClassification;
    t.n_classes = static_cast<int>(tcol.levels().size());
    const auto codes = table.codes(target);
    t.y.assign(codes.begin(), codes.end());
  } else {
    t.task = TaskKind::kRegression;
    t.y = scalar_column(table, target).values;
  }
  return t;
}

inline ForestModel train_forest(const MixedTable& table, std::size_t target, const ForestParams& params) {
  const LofoTask t = make_lofo_task(table, target);
  ForestModel model = train_forest(t.x, t.y, t.task, t.n_classes, params);
  model.target = target;
  return model;
}

/// Debug dump; not a stable format.
inline nlohmann::json to_json(const DecisionTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : tree.nodes) {
    nlohmann::json j = {{"count", n.count}};
    if (n.is_leaf()) {
      if (tree.task == TaskKind::kRegression) j["value"] = n.value; else j["probs"] = n.probs;
    } else {
      j["feature"] = n.feature;
      j["left"] = n.left;
      j["right"] = n.right;
      if (n.left_levels.empty()) j["threshold"] = n.threshold; else j["left_levels"] = n.left_levels;
    }
    nodes.push_back(std::move(j));
  }
  return {{"task", tree.task == TaskKind::kRegression ? "regression" : "classification"}, {"nodes", nodes}};
}

}  // namespace wise
