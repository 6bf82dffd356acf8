#pragma once

// File formats for configs, stage artifacts and reports.

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "wise/dfi.hpp"
#include "wise/lofo.hpp"
#include "wise/metrics.hpp"
#include "wise/pipeline.hpp"
#include "wise/util.hpp"

namespace wise {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

/// Run-level settings around a PipelineConfig.
struct RunConfig {
  PipelineConfig pipeline;
  std::string data;
  std::string schema;
  std::string output_dir = "wise_out";
  std::string truth_column;
  bool instances = false;    // include per-instance weights in explanations.json
  bool with_rounds = false;  // include the record matrix in result.json
  std::size_t top_q = 3;
  FaithfulnessParams faithfulness;
  bool run_faithfulness = true;
  std::size_t swc_subsample = 5000;
};

namespace detail {

template <typename T>
void read_key(const json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

}  // namespace detail

inline void apply_config(const json& doc, RunConfig& rc) {
  static const std::set<std::string> known = {
      "B", "nominal_mode", "hash_seed", "T", "m", "lambda_QD", "max_depth", "min_samples_leaf", "train_sample_frac",
      "features_per_split", "background_size", "explain_cap", "k0", "alpha0", "beta0", "K", "alpha", "beta", "max_iter",
      "epsilon", "seed", "ablation", "lsh_tables", "lsh_bands", "lsh_rows", "lsh_dedup", "data", "schema", "output_dir",
      "truth_column", "instances", "with_rounds", "top_q", "faithfulness_top_k", "faithfulness_trials",
      "faithfulness_depth", "faithfulness", "swc_subsample"};
  if (!doc.is_object()) throw ConfigError("config: top level must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) throw ConfigError("config: unknown key '" + key + "'");
  }
  try {
    auto& p = rc.pipeline;
    detail::read_key(doc, "B", p.bep.bits);
    if (doc.contains("nominal_mode")) p.bep.nominal_mode = parse_nominal_mode(doc["nominal_mode"].get<std::string>());
    detail::read_key(doc, "hash_seed", p.bep.hash_seed);
    detail::read_key(doc, "T", p.forest.trees);
    detail::read_key(doc, "m", p.qd.m);
    detail::read_key(doc, "lambda_QD", p.qd.lambda);
    detail::read_key(doc, "max_depth", p.forest.max_depth);
    detail::read_key(doc, "min_samples_leaf", p.forest.min_samples_leaf);
    detail::read_key(doc, "train_sample_frac", p.forest.train_sample_frac);
    detail::read_key(doc, "features_per_split", p.forest.features_per_split);
    detail::read_key(doc, "background_size", p.sense.background_size);
    detail::read_key(doc, "explain_cap", p.sense.explain_cap);
    detail::read_key(doc, "k0", p.stage1.k0);
    detail::read_key(doc, "alpha0", p.stage1.alpha0);
    detail::read_key(doc, "beta0", p.stage1.beta0);
    detail::read_key(doc, "K", p.stage2.k);
    detail::read_key(doc, "alpha", p.stage2.alpha);
    detail::read_key(doc, "beta", p.stage2.beta);
    detail::read_key(doc, "max_iter", p.max_iter);
    detail::read_key(doc, "epsilon", p.epsilon);
    detail::read_key(doc, "seed", p.seed);
    if (doc.contains("ablation")) p.ablation = parse_ablation(doc["ablation"].get<std::string>());
    detail::read_key(doc, "lsh_tables", p.lsh.tables);
    detail::read_key(doc, "lsh_bands", p.lsh.bands);
    detail::read_key(doc, "lsh_rows", p.lsh.rows_per_band);
    detail::read_key(doc, "lsh_dedup", p.lsh.dedup_distance);
    detail::read_key(doc, "data", rc.data);
    detail::read_key(doc, "schema", rc.schema);
    detail::read_key(doc, "output_dir", rc.output_dir);
    detail::read_key(doc, "truth_column", rc.truth_column);
    detail::read_key(doc, "instances", rc.instances);
    detail::read_key(doc, "with_rounds", rc.with_rounds);
    detail::read_key(doc, "top_q", rc.top_q);
    detail::read_key(doc, "faithfulness_top_k", rc.faithfulness.top_k);
    detail::read_key(doc, "faithfulness_trials", rc.faithfulness.trials);
    detail::read_key(doc, "faithfulness_depth", rc.faithfulness.max_depth);
    detail::read_key(doc, "faithfulness", rc.run_faithfulness);
    detail::read_key(doc, "swc_subsample", rc.swc_subsample);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value type: ") + e.what());
  }
}

/// "key=value" override; the value is parsed as JSON, falling back to a string.
inline void apply_override(const std::string& assignment, RunConfig& rc) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  apply_config(json{{key, value}}, rc);
}

inline RunConfig load_run_config(const std::string& path) {
  RunConfig rc;
  if (path.empty()) return rc;
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config: '" + path + "' is not valid JSON");
  apply_config(doc, rc);
  return rc;
}

inline json config_to_json(const RunConfig& rc) {
  const auto& p = rc.pipeline;
  return {{"B", p.bep.bits},
          {"nominal_mode", to_string(p.bep.nominal_mode)},
          {"hash_seed", p.bep.hash_seed},
          {"T", p.forest.trees},
          {"m", p.qd.m},
          {"lambda_QD", p.qd.lambda},
          {"max_depth", p.forest.max_depth},
          {"min_samples_leaf", p.forest.min_samples_leaf},
          {"train_sample_frac", p.forest.train_sample_frac},
          {"features_per_split", p.forest.features_per_split},
          {"background_size", p.sense.background_size},
          {"explain_cap", p.sense.explain_cap},
          {"k0", p.stage1.k0},
          {"alpha0", p.stage1.alpha0},
          {"beta0", p.stage1.beta0},
          {"K", p.stage2.k},
          {"alpha", p.stage2.alpha},
          {"beta", p.stage2_beta()},
          {"max_iter", p.max_iter},
          {"epsilon", p.epsilon},
          {"seed", p.seed},
          {"ablation", to_string(p.ablation)},
          {"lsh_tables", p.lsh.tables},
          {"lsh_bands", p.lsh.bands},
          {"lsh_rows", p.lsh.rows_per_band},
          {"lsh_dedup", p.lsh.dedup_distance},
          {"truth_column", rc.truth_column}};
}

// ---------------------------------------------------------------------------
// Datasets with an optional ground-truth column

struct Dataset {
  MixedTable features;
  std::vector<int> truth;  // empty when no truth column is named
};

/// Splits off the named truth column. Its values become dense ids in
/// first-occurrence order; the column never reaches the feature table.
inline Dataset split_truth(const MixedTable& table, const std::string& truth_column) {
  Dataset out;
  if (truth_column.empty()) {
    out.features = table;
    return out;
  }
  const auto j = table.find_column(truth_column);
  if (!j) throw ConfigError("truth column '" + truth_column + "' not found in schema");
  std::unordered_map<std::string, int> ids;
  out.truth.reserve(table.n());
  for (std::size_t i = 0; i < table.n(); ++i) {
    const auto [it, inserted] = ids.emplace(table.cell_text(i, *j), static_cast<int>(ids.size()));
    out.truth.push_back(it->second);
  }
  out.features = table.without_column(*j);
  return out;
}

inline Dataset load_dataset(const std::string& csv_path, const std::string& schema_path, const std::string& truth_column) {
  if (csv_path.empty()) throw ConfigError("no data path given");
  if (schema_path.empty()) throw ConfigError("no schema path given");
  return split_truth(load_table(csv_path, schema_path), truth_column);
}

inline std::vector<std::string> feature_names(const MixedTable& table) {
  std::vector<std::string> names;
  for (const auto& c : table.schema()) names.push_back(c.name);
  return names;
}

// ---------------------------------------------------------------------------
// Labels and record matrix

inline void write_labels(const std::string& path, std::span<const int> labels) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "row_index,cluster_id\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
}

inline std::vector<int> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open labels '" + path + "'");
  const auto records = parse_csv(in);
  if (records.empty() || records[0].size() != 2) throw DataError("labels: expected header row_index,cluster_id");
  std::vector<int> labels(records.size() - 1, -1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto i = static_cast<std::size_t>(std::stoul(records[r][0]));
    if (i >= labels.size()) throw DataError("labels: row_index out of range");
    labels[i] = std::stoi(records[r][1]);
  }
  for (int l : labels) {
    if (l < 0) throw DataError("labels: missing or negative cluster id");
  }
  return labels;
}

/// CSV with header "k0=<k0>,r0,r1,..." then one row of round labels per record.
inline void write_records(const std::string& path, const RecordMatrix& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "k0=" << records.k0;
  for (std::size_t r = 0; r < records.rounds; ++r) out << ",r" << r;
  out << '\n';
  for (std::size_t i = 0; i < records.n; ++i) {
    out << i;
    for (std::size_t r = 0; r < records.rounds; ++r) out << ',' << records.at(i, r);
    out << '\n';
  }
}

inline RecordMatrix read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open record matrix '" + path + "'");
  const auto rows = parse_csv(in);
  if (rows.empty() || rows[0].empty() || rows[0][0].rfind("k0=", 0) != 0) throw DataError("records: missing k0 header");
  RecordMatrix m(rows.size() - 1, rows[0].size() - 1, std::stoi(rows[0][0].substr(3)));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != m.rounds + 1) throw DataError("records: ragged row");
    for (std::size_t r = 0; r < m.rounds; ++r) m.at(i - 1, r) = std::stoi(rows[i][r + 1]);
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Weight views: "target,rank,tree,q,w0,...,w{d-1}" per line

inline void write_views(const std::string& path, std::span<const FeatureWeightVector> views,
                        const std::vector<std::string>& feature_names) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "target,rank,tree,q";
  for (const auto& name : feature_names) out << ',' << csv_escape(name);
  out << '\n';
  out << std::setprecision(17);
  for (const auto& v : views) {
    out << v.target << ',' << v.rank << ',' << v.tree << ',' << v.quality;
    for (double w : v.w) out << ',' << w;
    out << '\n';
  }
}

inline std::vector<FeatureWeightVector> read_views(const std::string& path, std::vector<std::string>* feature_names = nullptr) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open weights '" + path + "'");
  const auto rows = parse_csv(in);
  if (rows.empty() || rows[0].size() < 5) throw DataError("weights: malformed header");
  if (feature_names) feature_names->assign(rows[0].begin() + 4, rows[0].end());
  std::vector<FeatureWeightVector> views;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw DataError("weights: ragged row");
    FeatureWeightVector v;
    v.target = std::stoul(rows[i][0]);
    v.rank = std::stoul(rows[i][1]);
    v.tree = std::stoul(rows[i][2]);
    v.quality = std::stod(rows[i][3]);
    for (std::size_t k = 4; k < rows[i].size(); ++k) v.w.push_back(std::stod(rows[i][k]));
    views.push_back(std::move(v));
  }
  return views;
}

// ---------------------------------------------------------------------------
// Reports

inline json views_to_json(std::span<const FeatureWeightVector> views) {
  json out = json::array();
  for (const auto& v : views) out.push_back({{"target", v.target}, {"rank", v.rank}, {"tree", v.tree}, {"q", v.quality}, {"w", v.w}});
  return out;
}

inline json result_to_json(const WiseResult& r, const RunConfig& rc, const std::vector<std::string>& feature_names) {
  json out;
  json cfg = config_to_json(rc);
  out["config"] = cfg;
  out["seed"] = r.config.seed;
  out["n"] = r.labels.size();
  out["d"] = feature_names.size();
  out["R"] = r.views.size();
  out["features"] = feature_names;
  out["bits"] = r.bep.p;
  out["weights"] = views_to_json(r.views);
  out["labels"] = r.labels;
  if (rc.with_rounds) {
    json rounds = json::array();
    for (std::size_t i = 0; i < r.records.n; ++i) {
      json row = json::array();
      for (std::size_t k = 0; k < r.records.rounds; ++k) row.push_back(r.records.at(i, k));
      rounds.push_back(std::move(row));
    }
    out["round_labels"] = std::move(rounds);
  }
  return out;
}

inline json explanations_to_json(const Explanations& e, const std::vector<std::string>& feature_names, std::size_t top_q,
                                  bool instances, const FaithfulnessReport* faithfulness) {
  json out;
  const auto importance = global_dfi_importance(e.cluster.normalized, e.cluster_sizes);
  json ranking = json::array();
  for (auto k : rank_features(importance)) ranking.push_back({{"feature", feature_names[k]}, {"weight", importance[k]}});
  out["global_ranking"] = std::move(ranking);

  json clusters = json::array();
  for (std::size_t j = 0; j < e.cluster.normalized.rows; ++j) {
    const auto row = e.cluster.normalized.row(j);
    json top = json::array();
    const auto order = rank_features(row);
    for (std::size_t q = 0; q < std::min(top_q, order.size()); ++q) {
      top.push_back({{"feature", feature_names[order[q]]}, {"weight", row[order[q]]}});
    }
    std::vector<double> credits;
    for (std::size_t r = 0; r < e.scores.dfi.rounds; ++r) credits.push_back(e.scores.credit(j, r));
    clusters.push_back({{"cluster", j},
                        {"size", e.cluster_sizes[j]},
                        {"undiscriminated", static_cast<bool>(e.cluster.normalized.zero_row[j])},
                        {"top_features", std::move(top)},
                        {"weights", std::vector<double>(row.begin(), row.end())},
                        {"round_credits", std::move(credits)}});
  }
  out["clusters"] = std::move(clusters);
  out["consistency_deviation"] = e.consistency_deviation;

  if (instances) {
    json rows = json::array();
    for (std::size_t i = 0; i < e.instance.normalized.rows; ++i) {
      const auto row = e.instance.normalized.row(i);
      rows.push_back({{"row", i}, {"zero", static_cast<bool>(e.instance.normalized.zero_row[i])},
                      {"weights", std::vector<double>(row.begin(), row.end())}});
    }
    out["instances"] = std::move(rows);
  }
  if (faithfulness) {
    json table = json::array();
    for (const auto& row : faithfulness->rows) {
      table.push_back({{"subset", row.subset}, {"features", row.features}, {"accuracy", row.accuracy}, {"macro_f1", row.macro_f1}});
    }
    out["faithfulness"] = std::move(table);
  }
  out["feature_names"] = feature_names;
  return out;
}

inline json metrics_to_json(const MetricsReport& m) {
  return {{"ari", m.ari},       {"nmi", m.nmi}, {"purity", m.purity},   {"acc", m.acc},
          {"swc", m.swc},       {"n", m.n},     {"K_pred", m.k_pred},   {"K_true", m.k_true},
          {"swc_subsample", m.swc_subsample}};
}

inline void write_json(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << std::setw(2) << doc << '\n';
}

}  // namespace wise
