#pragma once

// End-to-end run: encode -> sense weights -> Stage I (one weighted
// k-FreqItems run per view) -> one-hot record matrix -> Stage II -> DFI.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wise/bep.hpp"
#include "wise/data_model.hpp"
#include "wise/dfi.hpp"
#include "wise/forest.hpp"
#include "wise/lofo.hpp"
#include "wise/util.hpp"
#include "wise/wkfreq.hpp"

namespace wise {

enum class Ablation { kNone, kUniform, kGaussian };

inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kUniform: return "uniform";
    case Ablation::kGaussian: return "gaussian";
  }
  return "?";
}

inline Ablation parse_ablation(const std::string& text) {
  if (text == "none") return Ablation::kNone;
  if (text == "uniform") return Ablation::kUniform;
  if (text == "gaussian") return Ablation::kGaussian;
  throw ConfigError("unknown ablation mode '" + text + "' (expected none, uniform or gaussian)");
}

struct StageOneParams {
  int k0 = 10;
  double alpha0 = 0.4;
  double beta0 = 0.4;
};

struct StageTwoParams {
  int k = 4;  // K
  double alpha = 0.4;
  double beta = -1.0;  // < 0: reuse beta0
};

struct PipelineConfig {
  BepConfig bep;
  ForestParams forest;
  QdParams qd;
  SenseOptions sense;
  StageOneParams stage1;
  StageTwoParams stage2;
  LshParams lsh;
  int max_iter = 50;
  double epsilon = 1e-12;
  std::uint64_t seed = 42;
  Ablation ablation = Ablation::kNone;

  void validate() const {
    bep.validate();
    forest.validate();
    qd.validate();
    lsh.validate();
    if (stage1.k0 < 1) throw ConfigError("pipeline: k0 must be >= 1");
    if (stage2.k < 1) throw ConfigError("pipeline: K must be >= 1");
    if (!(epsilon > 0.0)) throw ConfigError("pipeline: epsilon must be > 0");
    if (max_iter < 1) throw ConfigError("pipeline: max_iter must be >= 1");
    if (qd.m > forest.trees) throw ConfigError("pipeline: m must not exceed T");
  }

  double stage2_beta() const { return stage2.beta < 0.0 ? stage1.beta0 : stage2.beta; }
};

/// Every bit of feature j's group carries w[j].
inline std::vector<double> lift_weights(std::span<const double> w, std::span<const BitGroup> groups) {
  if (w.size() != groups.size()) throw ConfigError("lift_weights: weight length does not match feature count");
  std::size_t p = 0;
  for (const auto& g : groups) p = std::max<std::size_t>(p, g.start + g.width);
  std::vector<double> bits(p, 0.0);
  for (std::size_t j = 0; j < groups.size(); ++j) {
    for (std::uint32_t b = 0; b < groups[j].width; ++b) bits[groups[j].start + b] = w[j];
  }
  return bits;
}

struct StageOneResult {
  RecordMatrix records;
  std::vector<std::vector<FreqItemCenter>> centers;  // per round
};

inline std::uint64_t round_seed(std::uint64_t seed, std::size_t round) { return derive_seed(seed, 0x57a1u, round); }

inline StageOneResult stage_one(const BepMatrix& bep, std::span<const FeatureWeightVector> views, const StageOneParams& params,
                                const LshParams& lsh, int max_iter, std::uint64_t seed) {
  if (views.empty()) throw ConfigError("stage one: need at least one weight view");
  StageOneResult out;
  out.records = RecordMatrix(bep.n, views.size(), params.k0);
  out.centers.resize(views.size());
  parallel_for(views.size(), [&](std::size_t r) {
    const auto bit_weights = lift_weights(views[r].w, bep.bit_groups);
    std::vector<SparseWeightedVector> rows(bep.n);
    for (std::size_t i = 0; i < bep.n; ++i) rows[i] = reweight(bep.rows[i], bit_weights);
    ClusterParams cp;
    cp.k = params.k0;
    cp.alpha = params.alpha0;
    cp.beta = params.beta0;
    cp.max_iter = max_iter;
    cp.seed = round_seed(seed, r);
    cp.lsh = lsh;
    ClusterResult res = cluster(rows, cp);
    for (std::size_t i = 0; i < bep.n; ++i) out.records.at(i, r) = res.labels[i];
    out.centers[r] = std::move(res.centers);
  });
  out.records.validate();
  return out;
}

/// Round r occupies bits [r*k0, (r+1)*k0); one bit per round per row.
inline std::vector<BitSet> one_hot_records(const RecordMatrix& records) {
  records.validate();
  std::vector<BitSet> z(records.n);
  for (std::size_t i = 0; i < records.n; ++i) {
    z[i].resize(records.rounds);
    for (std::size_t r = 0; r < records.rounds; ++r) {
      z[i][r] = static_cast<std::uint32_t>(r * static_cast<std::size_t>(records.k0) + static_cast<std::size_t>(records.at(i, r)));
    }
  }
  return z;
}

/// Unweighted k-FreqItems on the one-hot record space.
inline ClusterResult stage_two(std::span<const BitSet> z, const StageTwoParams& params, double beta, const LshParams& lsh,
                               int max_iter, std::uint64_t seed) {
  std::vector<SparseWeightedVector> rows(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) rows[i] = SparseWeightedVector::binary(z[i]);
  ClusterParams cp;
  cp.k = params.k;
  cp.alpha = params.alpha;
  cp.beta = beta;
  cp.max_iter = max_iter;
  cp.seed = derive_seed(seed, 0x57a2u);
  cp.lsh = lsh;
  return cluster(rows, cp);
}

struct WiseResult {
  std::vector<int> labels;
  RecordMatrix records;
  std::vector<std::vector<FreqItemCenter>> round_centers;
  std::vector<FeatureWeightVector> views;
  Explanations explanations;
  BepMatrix bep;
  PipelineConfig config;
  int stage2_iterations = 0;
};

/// Weight views for a table under the configured ablation mode.
inline std::vector<FeatureWeightVector> weight_views(const MixedTable& table, const PipelineConfig& config) {
  const std::size_t count = table.d() * static_cast<std::size_t>(config.qd.m);
  switch (config.ablation) {
    case Ablation::kUniform: return uniform_views(table.d(), count);
    case Ablation::kGaussian: return gaussian_views(table.d(), count, derive_seed(config.seed, 0x6au));
    case Ablation::kNone: break;
  }
  ForestParams fp = config.forest;
  fp.seed = derive_seed(config.seed, 0xf0u);
  return sense_all(table, fp, config.qd, config.sense);
}

inline WiseResult run_wise(const MixedTable& table, const PipelineConfig& config) {
  config.validate();
  if (table.d() < 2) throw ConfigError("pipeline: need at least two feature columns");
  if (table.n() < static_cast<std::size_t>(std::max(config.stage1.k0, config.stage2.k))) {
    throw DataError("pipeline: fewer rows than clusters requested");
  }
  WiseResult result;
  result.config = config;
  result.bep = encode_table(table, config.bep);
  log(LogLevel::kDebug, "encoded " + std::to_string(result.bep.n) + " rows into " + std::to_string(result.bep.p) + " bits");
  result.views = weight_views(table, config);
  log(LogLevel::kDebug, "sensed " + std::to_string(result.views.size()) + " weight views");

  StageOneResult s1 = stage_one(result.bep, result.views, config.stage1, config.lsh, config.max_iter, config.seed);
  result.records = std::move(s1.records);
  result.round_centers = std::move(s1.centers);

  const auto z = one_hot_records(result.records);
  ClusterResult s2 = stage_two(z, config.stage2, config.stage2_beta(), config.lsh, config.max_iter, config.seed);
  result.labels = std::move(s2.labels);
  result.stage2_iterations = s2.iterations;

  result.explanations = explain(result.records, result.labels, config.stage2.k, result.views, config.epsilon);
  return result;
}

}  // namespace wise
