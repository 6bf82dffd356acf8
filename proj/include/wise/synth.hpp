#pragma once

// Planted mixed-type clusters. Each cluster fixes one level of every
// informative nominal column and a disjoint band of every informative numeric
// column; noise columns are uniform. With probability noise_level an
// informative cell is redrawn uniformly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "wise/data_model.hpp"
#include "wise/util.hpp"

namespace wise {

struct SynthParams {
  std::size_t n = 3000;
  int clusters = 3;
  int informative_nominal = 2;
  int informative_numeric = 2;
  int noise_nominal = 2;
  int noise_numeric = 2;
  int levels = 4;  // nominal levels per column (raised to `clusters` if smaller)
  double noise_level = 0.1;
  std::uint64_t seed = 7;
  std::string truth_column = "cluster";

  void validate() const {
    if (n < 1) throw ConfigError("synth: n must be >= 1");
    if (clusters < 1) throw ConfigError("synth: clusters must be >= 1");
    if (informative_nominal < 0 || informative_numeric < 0 || noise_nominal < 0 || noise_numeric < 0) {
      throw ConfigError("synth: feature counts must be >= 0");
    }
    if (informative_nominal + informative_numeric + noise_nominal + noise_numeric < 2) {
      throw ConfigError("synth: need at least two feature columns");
    }
    if (levels < 1) throw ConfigError("synth: levels must be >= 1");
    if (!(noise_level >= 0.0 && noise_level <= 1.0)) throw ConfigError("synth: noise_level must be in [0,1]");
    if (n < static_cast<std::size_t>(clusters)) throw ConfigError("synth: n must be >= clusters");
  }
};

/// Generated table; the truth column is the last column (nominal, labels "c<id>").
inline MixedTable synthesize(const SynthParams& params, std::vector<int>* truth = nullptr) {
  params.validate();
  const int levels = std::max(params.levels, params.clusters);
  std::vector<ColumnSchema> schema;
  auto add = [&](const std::string& name, ColumnKind kind) {
    ColumnSchema c;
    c.name = name;
    c.kind = kind;
    schema.push_back(std::move(c));
  };
  for (int f = 0; f < params.informative_nominal; ++f) add("inf_nom_" + std::to_string(f), ColumnKind::kNominal);
  for (int f = 0; f < params.informative_numeric; ++f) add("inf_num_" + std::to_string(f), ColumnKind::kNumeric);
  for (int f = 0; f < params.noise_nominal; ++f) add("noise_nom_" + std::to_string(f), ColumnKind::kNominal);
  for (int f = 0; f < params.noise_numeric; ++f) add("noise_num_" + std::to_string(f), ColumnKind::kNumeric);
  add(params.truth_column, ColumnKind::kNominal);

  // Nominal level codes are assigned in first-occurrence order after generation.
  std::mt19937_64 rng(derive_seed(params.seed, 0x5e7u));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t d = schema.size();
  std::vector<std::vector<std::string>> cells(params.n, std::vector<std::string>(d));
  std::vector<int> planted(params.n);
  const double band = 1.0 / params.clusters;
  auto fmt = [](double v) {
    // Four decimals keep the CSV text exact on reload.
    const double rounded = std::round(v * 1e4) / 1e4;
    std::ostringstream os;
    os.precision(17);
    os << rounded;
    return os.str();
  };
  for (std::size_t i = 0; i < params.n; ++i) {
    // Balanced assignment, then shuffled below.
    const int c = static_cast<int>(i % static_cast<std::size_t>(params.clusters));
    planted[i] = c;
  }
  for (std::size_t i = params.n; i > 1; --i) std::swap(planted[i - 1], planted[static_cast<std::size_t>(rng() % i)]);

  for (std::size_t i = 0; i < params.n; ++i) {
    const int c = planted[i];
    std::size_t col = 0;
    for (int f = 0; f < params.informative_nominal; ++f, ++col) {
      int level = (c + f) % levels;
      if (unit(rng) < params.noise_level) level = static_cast<int>(rng() % static_cast<std::uint64_t>(levels));
      cells[i][col] = "L" + std::to_string(level);
    }
    for (int f = 0; f < params.informative_numeric; ++f, ++col) {
      // Clusters occupy the middle 60% of disjoint bands of [0, 100].
      const int slot = (c + f) % params.clusters;
      double v = 100.0 * (band * (slot + 0.2) + band * 0.6 * unit(rng));
      if (unit(rng) < params.noise_level) v = 100.0 * unit(rng);
      cells[i][col] = fmt(v);
    }
    for (int f = 0; f < params.noise_nominal; ++f, ++col) {
      cells[i][col] = "L" + std::to_string(rng() % static_cast<std::uint64_t>(levels));
    }
    for (int f = 0; f < params.noise_numeric; ++f, ++col) cells[i][col] = fmt(100.0 * unit(rng));
    cells[i][col] = "c" + std::to_string(c);
  }

  std::vector<std::vector<std::string>> records;
  records.reserve(params.n + 1);
  std::vector<std::string> header;
  for (const auto& s : schema) header.push_back(s.name);
  records.push_back(std::move(header));
  for (auto& row : cells) records.push_back(std::move(row));
  if (truth) *truth = planted;
  return table_from_records(records, std::move(schema));
}

}  // namespace wise
