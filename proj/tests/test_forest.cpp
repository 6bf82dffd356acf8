#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "wise/forest.hpp"

using namespace wise;

namespace {

FeatureMatrix matrix(std::size_t n, std::size_t f, const std::vector<int>& categories) {
  FeatureMatrix x;
  x.n = n;
  x.f = f;
  x.values.assign(n * f, 0.0);
  x.categories = categories;
  return x;
}

ForestParams full_tree() {
  ForestParams p;
  p.min_samples_leaf = 1;
  p.features_per_split = 1.0;
  p.max_depth = 20;
  return p;
}

void check_leaves(const DecisionTree& t, std::size_t min_leaf) {
  for (const auto& node : t.nodes) {
    if (node.is_leaf()) {
      EXPECT_GE(node.count, min_leaf);
    }
  }
}

}  // namespace

TEST(Tree, LearnsThresholdExactly) {
  auto x = matrix(100, 1, {0});
  std::vector<double> y(100);
  for (std::size_t i = 0; i < 100; ++i) {
    x.values[i] = i / 100.0;
    y[i] = i < 37 ? 2.0 : 5.0;
  }
  const auto t = train_tree(x, y, TaskKind::kRegression, 0, full_tree(), 1);
  ASSERT_EQ(t.nodes.size(), 3u);
  EXPECT_GT(t.nodes[0].threshold, 0.36);
  EXPECT_LT(t.nodes[0].threshold, 0.37);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(t.predict_value(x.row(i)), y[i]);
}

TEST(Tree, CategoricalMembershipSplit) {
  auto x = matrix(60, 1, {4});
  std::vector<double> y(60);
  for (std::size_t i = 0; i < 60; ++i) {
    const int level = static_cast<int>(i % 4);
    x.values[i] = level;
    y[i] = (level == 1 || level == 3) ? 1.0 : 0.0;
  }
  const auto t = train_tree(x, y, TaskKind::kClassification, 2, full_tree(), 1);
  ASSERT_FALSE(t.nodes[0].is_leaf());
  EXPECT_FALSE(t.nodes[0].left_levels.empty());
  EXPECT_EQ(t.depth(), 1u);
  for (std::size_t i = 0; i < 60; ++i) EXPECT_EQ(t.predict_class(x.row(i)), static_cast<int>(y[i]));
}

TEST(Tree, TiesPreferLowestFeature) {
  auto x = matrix(40, 3, {0, 0, 0});
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    const double v = i < 20 ? 0.0 : 1.0;
    x.values[i * 3 + 0] = 0.5;  // constant, useless
    x.values[i * 3 + 1] = v;
    x.values[i * 3 + 2] = v;    // duplicate of input 1
    y[i] = v;
  }
  const auto t = train_tree(x, y, TaskKind::kRegression, 0, full_tree(), 9);
  EXPECT_EQ(t.nodes[0].feature, 1);
}

TEST(Tree, RespectsMinLeafAndDepth) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto x = matrix(500, 4, {0, 0, 3, 0});
  std::vector<double> y(500);
  for (std::size_t i = 0; i < 500; ++i) {
    for (std::size_t k = 0; k < 4; ++k) x.values[i * 4 + k] = k == 2 ? static_cast<double>(rng() % 3) : unit(rng);
    y[i] = x.values[i * 4] + unit(rng);
  }
  ForestParams p = full_tree();
  p.min_samples_leaf = 25;
  p.max_depth = 3;
  const auto t = train_tree(x, y, TaskKind::kRegression, 0, p, 2);
  check_leaves(t, 25);
  EXPECT_LE(t.depth(), 3u);
}

TEST(Tree, FewerRowsThanMinLeafGivesLeaf) {
  auto x = matrix(5, 1, {0});
  std::vector<double> y{1, 2, 3, 4, 5};
  for (std::size_t i = 0; i < 5; ++i) x.values[i] = static_cast<double>(i);
  ForestParams p;
  p.min_samples_leaf = 50;
  const auto t = train_tree(x, y, TaskKind::kRegression, 0, p, 0);
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_DOUBLE_EQ(t.nodes[0].value, 3.0);
}

TEST(Tree, ConstantTargetIsSingleLeaf) {
  auto x = matrix(30, 2, {0, 0});
  for (std::size_t i = 0; i < 60; ++i) x.values[i] = static_cast<double>(i % 7);
  std::vector<double> y(30, 0.1);
  EXPECT_EQ(train_tree(x, y, TaskKind::kRegression, 0, full_tree(), 0).nodes.size(), 1u);
}

TEST(Quality, AccuracyAndClampedR2) {
  auto x = matrix(4, 1, {0});
  for (std::size_t i = 0; i < 4; ++i) x.values[i] = static_cast<double>(i);
  DecisionTree leaf;
  leaf.task = TaskKind::kRegression;
  leaf.nodes.emplace_back();
  leaf.nodes[0].value = 100.0;
  std::vector<double> y{0, 1, 2, 3};
  const std::vector<std::size_t> rows{0, 1, 2, 3};
  EXPECT_EQ(tree_quality(leaf, x, y, rows), 0.0);  // R^2 far below 0 is clamped
  leaf.nodes[0].value = 1.5;
  EXPECT_NEAR(tree_quality(leaf, x, y, rows), 0.0, 1e-15);

  DecisionTree cls;
  cls.task = TaskKind::kClassification;
  cls.nodes.emplace_back();
  cls.nodes[0].probs = {0.2, 0.8};
  std::vector<double> labels{1, 1, 0, 1};
  EXPECT_DOUBLE_EQ(tree_quality(cls, x, labels, rows), 0.75);
}

TEST(Forest, SubsampleAndHoldoutPartitionRows) {
  auto x = matrix(200, 2, {0, 0});
  std::vector<double> y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    x.values[i * 2] = i / 200.0;
    x.values[i * 2 + 1] = (i * 7 % 13) / 13.0;
    y[i] = x.values[i * 2];
  }
  ForestParams p;
  p.trees = 6;
  p.train_sample_frac = 0.25;
  p.min_samples_leaf = 2;
  p.features_per_split = 1.0;
  p.seed = 11;
  const auto f = train_forest(x, y, TaskKind::kRegression, 0, p);
  ASSERT_EQ(f.trees.size(), 6u);
  for (std::size_t u = 0; u < 6; ++u) {
    EXPECT_EQ(f.train_rows[u].size(), 50u);
    EXPECT_EQ(f.holdout_rows[u].size(), 150u);
    std::set<std::size_t> all(f.train_rows[u].begin(), f.train_rows[u].end());
    all.insert(f.holdout_rows[u].begin(), f.holdout_rows[u].end());
    EXPECT_EQ(all.size(), 200u);
    EXPECT_GE(f.quality[u], 0.0);
    EXPECT_LE(f.quality[u], 1.0);
    EXPECT_GT(f.quality[u], 0.8);
  }
  EXPECT_NE(f.train_rows[0], f.train_rows[1]);
}

TEST(Forest, DeterministicAcrossWorkerCounts) {
  auto x = matrix(300, 3, {0, 4, 0});
  std::vector<double> y(300);
  std::mt19937_64 rng(1);
  for (std::size_t i = 0; i < 300; ++i) {
    x.values[i * 3] = (rng() % 1000) / 1000.0;
    x.values[i * 3 + 1] = static_cast<double>(rng() % 4);
    x.values[i * 3 + 2] = (rng() % 1000) / 1000.0;
    y[i] = static_cast<double>(static_cast<int>(x.values[i * 3 + 1]) % 2);
  }
  ForestParams p;
  p.trees = 8;
  p.train_sample_frac = 0.5;
  p.min_samples_leaf = 5;
  p.seed = 4;
  set_worker_count(1);
  const auto a = train_forest(x, y, TaskKind::kClassification, 2, p);
  set_worker_count(4);
  const auto b = train_forest(x, y, TaskKind::kClassification, 2, p);
  set_worker_count(0);
  for (std::size_t u = 0; u < a.trees.size(); ++u) {
    EXPECT_EQ(to_json(a.trees[u]).dump(), to_json(b.trees[u]).dump());
    EXPECT_EQ(a.quality[u], b.quality[u]);
  }
}

TEST(Lofo, TaskKindFollowsTargetColumn) {
  std::istringstream in("a,b,c\n1,x,lo\n2,y,hi\n3,x,lo\n");
  std::vector<ColumnSchema> schema{{"a", ColumnKind::kNumeric, {}, {}},
                                   {"b", ColumnKind::kNominal, {}, {}},
                                   {"c", ColumnKind::kOrdinal, {"lo", "hi"}, {}}};
  const auto t = table_from_records(parse_csv(in), schema);
  const auto nominal = make_lofo_task(t, 1);
  EXPECT_EQ(nominal.task, TaskKind::kClassification);
  EXPECT_EQ(nominal.n_classes, 2);
  EXPECT_EQ(nominal.input_columns, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(nominal.x.categories, (std::vector<int>{0, 0}));
  EXPECT_DOUBLE_EQ(nominal.x.at(1, 0), 0.5);

  const auto numeric = make_lofo_task(t, 0);
  EXPECT_EQ(numeric.task, TaskKind::kRegression);
  EXPECT_EQ(numeric.x.categories, (std::vector<int>{2, 0}));
  EXPECT_DOUBLE_EQ(numeric.y[2], 1.0);
}
