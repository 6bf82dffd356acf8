#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wise/data_model.hpp"
#include "wise/util.hpp"

namespace wise {

/// Counts of (predicted, true) label pairs. Labels are remapped to dense ids
/// in order of first appearance.
struct ContingencyTable {
  std::size_t rows = 0;  // predicted clusters
  std::size_t cols = 0;  // true classes
  std::vector<std::int64_t> counts;
  std::vector<std::int64_t> row_sums;
  std::vector<std::int64_t> col_sums;
  std::int64_t n = 0;

  std::int64_t at(std::size_t a, std::size_t b) const { return counts[a * cols + b]; }
};

namespace detail {

inline std::vector<std::size_t> dense_ids(std::span<const int> labels, std::size_t& count) {
  std::map<int, std::size_t> ids;
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = ids.try_emplace(labels[i], ids.size());
    out[i] = it->second;
  }
  count = ids.size();
  return out;
}

inline double choose2(std::int64_t x) { return 0.5 * static_cast<double>(x) * static_cast<double>(x - 1); }

inline void check_lengths(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw DataError("metrics: label vectors differ in length (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
}

}  // namespace detail

inline ContingencyTable contingency(std::span<const int> y_pred, std::span<const int> y_true) {
  detail::check_lengths(y_pred, y_true);
  ContingencyTable c;
  const auto p = detail::dense_ids(y_pred, c.rows);
  const auto t = detail::dense_ids(y_true, c.cols);
  c.counts.assign(c.rows * c.cols, 0);
  c.row_sums.assign(c.rows, 0);
  c.col_sums.assign(c.cols, 0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    ++c.counts[p[i] * c.cols + t[i]];
    ++c.row_sums[p[i]];
    ++c.col_sums[t[i]];
  }
  c.n = static_cast<std::int64_t>(p.size());
  return c;
}

inline double ari(std::span<const int> y_pred, std::span<const int> y_true) {
  const auto c = contingency(y_pred, y_true);
  if (c.n < 2) return 1.0;
  double index = 0.0, a = 0.0, b = 0.0;
  for (auto v : c.counts) index += detail::choose2(v);
  for (auto v : c.row_sums) a += detail::choose2(v);
  for (auto v : c.col_sums) b += detail::choose2(v);
  const double expected = a * b / detail::choose2(c.n);
  const double max_index = 0.5 * (a + b);
  // Degenerate case (both partitions trivial in the same way): perfect agreement.
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

/// I(U;V) / sqrt(H(U) H(V)), natural logs.
inline double nmi(std::span<const int> y_pred, std::span<const int> y_true) {
  const auto c = contingency(y_pred, y_true);
  if (c.n == 0) return 1.0;
  const double n = static_cast<double>(c.n);
  auto entropy = [&](const std::vector<std::int64_t>& sums) {
    double h = 0.0;
    for (auto v : sums) {
      if (v > 0) h -= (static_cast<double>(v) / n) * std::log(static_cast<double>(v) / n);
    }
    return h;
  };
  const double hu = entropy(c.row_sums);
  const double hv = entropy(c.col_sums);
  if (hu <= 0.0 || hv <= 0.0) return (c.rows == c.cols && c.rows == 1) ? 1.0 : 0.0;
  double mi = 0.0;
  for (std::size_t a = 0; a < c.rows; ++a) {
    for (std::size_t b = 0; b < c.cols; ++b) {
      const auto v = c.at(a, b);
      if (v == 0) continue;
      const double pv = static_cast<double>(v) / n;
      mi += pv * std::log(pv * n * n / (static_cast<double>(c.row_sums[a]) * static_cast<double>(c.col_sums[b])));
    }
  }
  return std::clamp(mi / std::sqrt(hu * hv), 0.0, 1.0);
}

inline double purity(std::span<const int> y_pred, std::span<const int> y_true) {
  const auto c = contingency(y_pred, y_true);
  if (c.n == 0) return 1.0;
  std::int64_t hit = 0;
  for (std::size_t a = 0; a < c.rows; ++a) {
    std::int64_t best = 0;
    for (std::size_t b = 0; b < c.cols; ++b) best = std::max(best, c.at(a, b));
    hit += best;
  }
  return static_cast<double>(hit) / static_cast<double>(c.n);
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method,
/// potentials form). Returns the column assigned to each row.
inline std::vector<std::size_t> hungarian_min_cost(const std::vector<double>& cost, std::size_t size) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(size + 1, 0.0), v(size + 1, 0.0);
  std::vector<std::size_t> p(size + 1, 0), way(size + 1, 0);
  for (std::size_t i = 1; i <= size; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(size + 1, inf);
    std::vector<bool> used(size + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= size; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * size + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= size; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(size, 0);
  for (std::size_t j = 1; j <= size; ++j) {
    if (p[j] != 0) assignment[p[j] - 1] = j - 1;
  }
  return assignment;
}

/// Accuracy under the best one-to-one matching of predicted to true labels.
inline double acc_hungarian(std::span<const int> y_pred, std::span<const int> y_true) {
  const auto c = contingency(y_pred, y_true);
  if (c.n == 0) return 1.0;
  const std::size_t size = std::max(c.rows, c.cols);
  std::vector<double> cost(size * size, 0.0);
  for (std::size_t a = 0; a < c.rows; ++a) {
    for (std::size_t b = 0; b < c.cols; ++b) cost[a * size + b] = -static_cast<double>(c.at(a, b));
  }
  const auto match = hungarian_min_cost(cost, size);
  std::int64_t hit = 0;
  for (std::size_t a = 0; a < c.rows; ++a) {
    if (match[a] < c.cols) hit += c.at(a, match[a]);
  }
  return static_cast<double>(hit) / static_cast<double>(c.n);
}

// ---------------------------------------------------------------------------
// Gower distance and silhouette

struct GowerMatrix {
  std::vector<std::size_t> rows;  // table row of each matrix index
  std::vector<double> ranges;     // per column range of the raw values (0 for nominal)
  std::vector<double> distances;  // rows.size()^2, symmetric

  double at(std::size_t a, std::size_t b) const { return distances[a * rows.size() + b]; }
};

/// Per column: |difference| of min-max scaled values for numeric/ordinal,
/// 0/1 mismatch for nominal; averaged over columns.
inline GowerMatrix gower_matrix(const MixedTable& table, std::span<const std::size_t> rows) {
  GowerMatrix g;
  g.rows.assign(rows.begin(), rows.end());
  const std::size_t m = rows.size();
  const std::size_t d = table.d();
  std::vector<std::vector<double>> scaled(d);
  g.ranges.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    if (table.column(j).kind == ColumnKind::kNominal) continue;
    const auto col = scalar_column(table, j);
    g.ranges[j] = table.column(j).kind == ColumnKind::kNumeric
                      ? col.max - col.min
                      : static_cast<double>(table.column(j).ordered_levels.size() - 1);
    scaled[j] = col.values;
  }
  g.distances.assign(m * m, 0.0);
  parallel_for(m, [&](std::size_t a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      double sum = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        if (table.column(j).kind == ColumnKind::kNominal) {
          sum += table.codes(j)[rows[a]] == table.codes(j)[rows[b]] ? 0.0 : 1.0;
        } else {
          sum += std::abs(scaled[j][rows[a]] - scaled[j][rows[b]]);
        }
      }
      g.distances[a * m + b] = sum / static_cast<double>(d);
    }
  });
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < a; ++b) g.distances[a * m + b] = g.distances[b * m + a];
  }
  return g;
}

/// Mean silhouette over a precomputed distance matrix. Members of singleton
/// clusters score 0; a point with a = b = 0 scores 0.
inline double silhouette(const GowerMatrix& g, std::span<const int> labels) {
  const std::size_t m = g.rows.size();
  std::size_t k = 0;
  const auto ids = detail::dense_ids(labels, k);
  if (k < 2) throw DataError("swc: need at least two clusters in the sample");
  std::vector<std::size_t> size(k, 0);
  for (auto id : ids) ++size[id];
  std::vector<double> score(m, 0.0);
  parallel_for(m, [&](std::size_t a) {
    if (size[ids[a]] < 2) return;
    std::vector<double> sums(k, 0.0);
    for (std::size_t b = 0; b < m; ++b) sums[ids[b]] += g.at(a, b);
    const double within = sums[ids[a]] / static_cast<double>(size[ids[a]] - 1);
    double between = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c != ids[a]) between = std::min(between, sums[c] / static_cast<double>(size[c]));
    }
    const double denom = std::max(within, between);
    score[a] = denom > 0.0 ? (between - within) / denom : 0.0;
  });
  double total = 0.0;
  for (double s : score) total += s;
  return total / static_cast<double>(m);
}

/// Silhouette under unweighted Gower distance on at most `subsample` rows
/// (seeded uniform sample without replacement when n is larger).
inline double swc_gower(const MixedTable& table, std::span<const int> labels, std::size_t subsample, std::uint64_t seed) {
  if (labels.size() != table.n()) throw DataError("swc: label count does not match table rows");
  std::vector<std::size_t> rows(table.n());
  std::iota(rows.begin(), rows.end(), 0);
  if (subsample > 0 && rows.size() > subsample) {
    std::mt19937_64 rng(derive_seed(seed, 0x53cu));
    for (std::size_t i = 0; i < subsample; ++i) std::swap(rows[i], rows[i + static_cast<std::size_t>(rng() % (rows.size() - i))]);
    rows.resize(subsample);
    std::sort(rows.begin(), rows.end());
  }
  std::vector<int> sample_labels;
  for (auto r : rows) sample_labels.push_back(labels[r]);
  return silhouette(gower_matrix(table, rows), sample_labels);
}

struct MetricsReport {
  double ari = 0.0;
  double nmi = 0.0;
  double purity = 0.0;
  double acc = 0.0;
  double swc = 0.0;
  std::size_t n = 0;
  std::size_t k_pred = 0;
  std::size_t k_true = 0;
  std::size_t swc_subsample = 0;
};

inline MetricsReport evaluate(const MixedTable& table, std::span<const int> y_pred, std::span<const int> y_true,
                              std::size_t swc_subsample = 5000, std::uint64_t seed = 0) {
  MetricsReport r;
  const auto c = contingency(y_pred, y_true);
  r.ari = ari(y_pred, y_true);
  r.nmi = nmi(y_pred, y_true);
  r.purity = purity(y_pred, y_true);
  r.acc = acc_hungarian(y_pred, y_true);
  r.n = y_pred.size();
  r.k_pred = c.rows;
  r.k_true = c.cols;
  r.swc_subsample = std::min(swc_subsample, table.n());
  r.swc = c.rows >= 2 ? swc_gower(table, y_pred, swc_subsample, seed) : 0.0;
  return r;
}

}  // namespace wise
