#pragma once

// Exact interventional Shapley values for a single decision tree.
//
// For one reference row z, the game is v(S) = tree(x_S, z_rest). A leaf is
// reached exactly when every split feature where x and z disagree is taken
// from the side that leads to it, so each leaf contributes to the features on
// its path with closed-form Shapley weights. Averaging over the background
// rows gives the interventional attribution.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wise/forest.hpp"
#include "wise/util.hpp"

namespace wise {

struct ShapAttribution {
  std::vector<double> phi;
  double base_value = 0.0;
};

struct GlobalAttribution {
  std::vector<double> s;  // mean |phi| per input feature
  std::size_t explained_count = 0;
};

using RowRefs = std::vector<std::span<const double>>;

namespace detail {

class InterventionalShap {
 public:
  InterventionalShap(const DecisionTree& tree, int output_class, std::size_t arity)
      : tree_(tree), output_class_(output_class), side_(arity, 0) {
    factorial_.assign(2 * arity + 2, 1.0);
    for (std::size_t i = 1; i < factorial_.size(); ++i) factorial_[i] = factorial_[i - 1] * static_cast<double>(i);
  }

  /// Adds the Shapley values of the single-reference game to phi.
  void accumulate(std::span<const double> x, std::span<const double> z, std::vector<double>& phi) {
    x_ = x;
    z_ = z;
    phi_ = &phi;
    path_.clear();
    recurse(0, 0, 0);
  }

 private:
  // side_[f]: 0 = not on the path yet, 1 = taken from x, 2 = taken from z.
  void recurse(std::size_t at, std::size_t from_x, std::size_t from_z) {
    const TreeNode& node = tree_.nodes[at];
    if (node.is_leaf()) {
      const double v = tree_.task == TaskKind::kRegression ? node.value : node.probs[static_cast<std::size_t>(output_class_)];
      if (v == 0.0) return;
      const double plus = from_x > 0 ? weight(from_x - 1, from_z) * v : 0.0;
      const double minus = from_z > 0 ? weight(from_x, from_z - 1) * v : 0.0;
      for (auto f : path_) (*phi_)[f] += side_[f] == 1 ? plus : -minus;
      return;
    }
    const auto f = static_cast<std::size_t>(node.feature);
    const std::size_t x_child = static_cast<std::size_t>(node.goes_left(x_) ? node.left : node.right);
    const std::size_t z_child = static_cast<std::size_t>(node.goes_left(z_) ? node.left : node.right);
    if (side_[f] == 1) return recurse(x_child, from_x, from_z);
    if (side_[f] == 2) return recurse(z_child, from_x, from_z);
    if (x_child == z_child) return recurse(x_child, from_x, from_z);

    path_.push_back(f);
    side_[f] = 1;
    recurse(x_child, from_x + 1, from_z);
    side_[f] = 2;
    recurse(z_child, from_x, from_z + 1);
    side_[f] = 0;
    path_.pop_back();
  }

  // s! r! / (s + r + 1)!
  double weight(std::size_t s, std::size_t r) const { return factorial_[s] * factorial_[r] / factorial_[s + r + 1]; }

  const DecisionTree& tree_;
  int output_class_;
  std::vector<std::uint8_t> side_;
  std::vector<double> factorial_;
  std::vector<std::size_t> path_;
  std::span<const double> x_;
  std::span<const double> z_;
  std::vector<double>* phi_ = nullptr;
};

inline void check_arity(const DecisionTree& tree, std::size_t arity) {
  for (const auto& node : tree.nodes) {
    if (!node.is_leaf() && static_cast<std::size_t>(node.feature) >= arity) {
      throw DataError("treeshap: tree splits on feature " + std::to_string(node.feature) + " but rows have arity " +
                      std::to_string(arity));
    }
  }
}

}  // namespace detail

/// Interventional Shapley values of `tree` at `row` against `background`.
/// Classification trees are explained through the probability of `output_class`.
inline ShapAttribution interventional_shap(const DecisionTree& tree, std::span<const double> row, const RowRefs& background,
                                           int output_class = 0) {
  if (background.empty()) throw DataError("treeshap: background set is empty");
  detail::check_arity(tree, row.size());
  ShapAttribution out;
  out.phi.assign(row.size(), 0.0);
  detail::InterventionalShap engine(tree, output_class, row.size());
  for (const auto& z : background) {
    if (z.size() != row.size()) throw DataError("treeshap: background row arity mismatch");
    engine.accumulate(row, z, out.phi);
    out.base_value += tree.predict_scalar(z, output_class);
  }
  const double scale = 1.0 / static_cast<double>(background.size());
  for (double& p : out.phi) p *= scale;
  out.base_value *= scale;
  return out;
}

/// Mean absolute attribution over the explained rows.
inline GlobalAttribution aggregate_global(const DecisionTree& tree, const RowRefs& explain, const RowRefs& background,
                                          int output_class = 0) {
  if (explain.empty()) throw DataError("treeshap: explain set is empty");
  GlobalAttribution out;
  out.s.assign(explain.front().size(), 0.0);
  for (const auto& row : explain) {
    const ShapAttribution a = interventional_shap(tree, row, background, output_class);
    for (std::size_t k = 0; k < out.s.size(); ++k) out.s[k] += std::abs(a.phi[k]);
  }
  out.explained_count = explain.size();
  for (double& v : out.s) v /= static_cast<double>(explain.size());
  return out;
}

}  // namespace wise
