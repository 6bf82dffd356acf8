#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "wise/io.hpp"

using namespace wise;

namespace {

std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "wise_io_test";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

}  // namespace

TEST(Config, KeysMapOntoPipeline) {
  RunConfig rc;
  apply_config(json{{"B", 16}, {"T", 12}, {"m", 3}, {"lambda_QD", 0.25}, {"k0", 7}, {"K", 5}, {"beta", 0.3},
                    {"ablation", "gaussian"}, {"nominal_mode", "hash"}, {"truth_column", "y"}, {"faithfulness", false}},
               rc);
  EXPECT_EQ(rc.pipeline.bep.bits, 16);
  EXPECT_EQ(rc.pipeline.forest.trees, 12);
  EXPECT_EQ(rc.pipeline.qd.m, 3);
  EXPECT_EQ(rc.pipeline.qd.lambda, 0.25);
  EXPECT_EQ(rc.pipeline.stage1.k0, 7);
  EXPECT_EQ(rc.pipeline.stage2.k, 5);
  EXPECT_EQ(rc.pipeline.stage2_beta(), 0.3);
  EXPECT_EQ(rc.pipeline.ablation, Ablation::kGaussian);
  EXPECT_EQ(rc.truth_column, "y");
  EXPECT_FALSE(rc.run_faithfulness);
}

TEST(Config, BetaDefaultsToStageOneValue) {
  RunConfig rc;
  apply_config(json{{"beta0", 0.2}}, rc);
  EXPECT_EQ(rc.pipeline.stage2_beta(), 0.2);
  EXPECT_EQ(config_to_json(rc)["beta"], 0.2);
}

TEST(Config, UnknownKeyAndBadTypeAreConfigErrors) {
  RunConfig rc;
  EXPECT_THROW(apply_config(json{{"bogus", 1}}, rc), ConfigError);
  EXPECT_THROW(apply_config(json{{"B", "eight"}}, rc), ConfigError);
  EXPECT_THROW(apply_config(json::array(), rc), ConfigError);
  EXPECT_THROW(load_run_config(temp_path("missing.json")), ConfigError);
}

TEST(Config, Overrides) {
  RunConfig rc;
  apply_override("K=6", rc);
  apply_override("ablation=uniform", rc);
  apply_override("faithfulness_top_k=[2,4]", rc);
  EXPECT_EQ(rc.pipeline.stage2.k, 6);
  EXPECT_EQ(rc.pipeline.ablation, Ablation::kUniform);
  EXPECT_EQ(rc.faithfulness.top_k, (std::vector<std::size_t>{2, 4}));
  EXPECT_THROW(apply_override("K", rc), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  RunConfig a;
  apply_config(json{{"B", 12}, {"seed", 99}, {"lsh_bands", 5}}, a);
  RunConfig b;
  auto doc = config_to_json(a);
  doc.erase("truth_column");
  apply_config(doc, b);
  EXPECT_EQ(config_to_json(b), config_to_json(a));
}

TEST(Artifacts, LabelsRoundTrip) {
  const std::vector<int> labels{2, 0, 1, 1, 0};
  const auto path = temp_path("labels.csv");
  write_labels(path, labels);
  EXPECT_EQ(read_labels(path), labels);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "row_index,cluster_id");
}

TEST(Artifacts, RecordsRoundTrip) {
  RecordMatrix rec(3, 2, 4);
  rec.labels = {0, 3, 1, 2, 3, 0};
  const auto path = temp_path("records.csv");
  write_records(path, rec);
  const auto back = read_records(path);
  EXPECT_EQ(back.k0, 4);
  EXPECT_EQ(back.rounds, 2u);
  EXPECT_EQ(back.labels, rec.labels);
}

TEST(Artifacts, ViewsRoundTripExactly) {
  std::vector<FeatureWeightVector> views(2);
  views[0] = {{0.0, 1.0 / 3, 2.0 / 3}, 0, 4, 0, 0.123456789012345};
  views[1] = {{0.1, 0.7, 0.2}, 1, 2, 1, 0.9};
  const auto path = temp_path("weights.csv");
  write_views(path, views, {"a", "b,c", "d"});
  std::vector<std::string> names;
  const auto back = read_views(path, &names);
  EXPECT_EQ(names, (std::vector<std::string>{"a", "b,c", "d"}));
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].w, views[i].w);
    EXPECT_EQ(back[i].target, views[i].target);
    EXPECT_EQ(back[i].tree, views[i].tree);
    EXPECT_EQ(back[i].rank, views[i].rank);
    EXPECT_EQ(back[i].quality, views[i].quality);
  }
}

TEST(Artifacts, MissingFilesAreDataErrors) {
  EXPECT_THROW(read_labels(temp_path("nope.csv")), DataError);
  EXPECT_THROW(read_records(temp_path("nope.csv")), DataError);
  EXPECT_THROW(read_views(temp_path("nope.csv")), DataError);
}

TEST(Truth, SplitGivesDenseIdsAndDropsColumn) {
  std::istringstream in("x,y\n1,b\n2,a\n3,b\n4,c\n");
  const auto table = table_from_records(parse_csv(in), {{"x", ColumnKind::kNumeric, {}, {}}, {"y", ColumnKind::kNominal, {}, {}}});
  const auto data = split_truth(table, "y");
  EXPECT_EQ(data.truth, (std::vector<int>{0, 1, 0, 2}));
  EXPECT_EQ(feature_names(data.features), (std::vector<std::string>{"x"}));
  EXPECT_THROW(split_truth(table, "z"), ConfigError);
  EXPECT_TRUE(split_truth(table, "").truth.empty());
}
