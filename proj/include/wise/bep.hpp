#pragma once

// Binary Encoding with Padding: maps every column of a mixed table into a
// fixed bit group so that rows become sparse binary sets.
//
//   numeric / ordinal  width 2B, a block of B ones starting at round(B*x)
//   nominal one_hot    width B, bit = level index (requires c <= B)
//   nominal hash       width B, bit = hash(label, seed) mod B
//   nominal expand     width c, bit = level index

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wise/data_model.hpp"
#include "wise/util.hpp"

namespace wise {

enum class NominalMode { kOneHot, kHash, kExpand };

inline std::string to_string(NominalMode mode) {
  switch (mode) {
    case NominalMode::kOneHot: return "one_hot";
    case NominalMode::kHash: return "hash";
    case NominalMode::kExpand: return "expand";
  }
  return "?";
}

inline NominalMode parse_nominal_mode(const std::string& text) {
  if (text == "one_hot") return NominalMode::kOneHot;
  if (text == "hash") return NominalMode::kHash;
  if (text == "expand") return NominalMode::kExpand;
  throw ConfigError("bep: unknown nominal_mode '" + text + "' (expected one_hot, hash or expand)");
}

struct BepConfig {
  int bits = 32;  // B
  NominalMode nominal_mode = NominalMode::kOneHot;
  std::uint64_t hash_seed = 0;

  void validate() const {
    if (bits < 2) throw ConfigError("bep: B must be >= 2, got " + std::to_string(bits));
  }
};

using BitSet = std::vector<std::uint32_t>;  // sorted active bit indices

struct BitGroup {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  std::uint32_t start = 0;
  std::uint32_t width = 0;
};

struct BepMatrix {
  std::size_t n = 0;
  std::size_t p = 0;
  int bits = 0;
  std::vector<BitSet> rows;
  std::vector<BitGroup> bit_groups;
};

/// A block of `bits` ones at `offset` inside a 2*bits window.
struct BlockCode {
  int offset = 0;
  int bits = 0;

  BitSet active() const {
    BitSet out(static_cast<std::size_t>(bits));
    for (int b = 0; b < bits; ++b) out[static_cast<std::size_t>(b)] = static_cast<std::uint32_t>(offset + b);
    return out;
  }
};

inline BlockCode encode_numeric_value(double x, int bits) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DataError("bep: numeric value " + std::to_string(x) + " outside [0,1]");
  }
  if (bits < 2) throw ConfigError("bep: B must be >= 2");
  // std::round rounds halfway cases away from zero.
  const int offset = static_cast<int>(std::round(static_cast<double>(bits) * x));
  return {std::clamp(offset, 0, bits), bits};
}

/// Group width of a nominal column with `levels` categories.
inline std::uint32_t nominal_group_width(std::size_t levels, NominalMode mode, int bits) {
  return mode == NominalMode::kExpand ? static_cast<std::uint32_t>(std::max<std::size_t>(levels, 1))
                                      : static_cast<std::uint32_t>(bits);
}

/// Bit index of a nominal label within its group.
inline std::uint32_t encode_nominal_value(const std::string& label, int level_index, const ColumnSchema& column,
                                          NominalMode mode, int bits, std::uint64_t hash_seed) {
  const std::size_t levels = column.levels().size();
  switch (mode) {
    case NominalMode::kOneHot:
      if (levels > static_cast<std::size_t>(bits)) {
        throw ConfigError("bep: nominal column '" + column.name + "' has " + std::to_string(levels) +
                          " categories > B=" + std::to_string(bits) +
                          "; a collision-free one-hot block is impossible, use nominal_mode hash or expand");
      }
      [[fallthrough]];
    case NominalMode::kExpand:
      if (level_index < 0 || static_cast<std::size_t>(level_index) >= levels) {
        throw DataError("bep: unknown level '" + label + "' in column '" + column.name + "'");
      }
      return static_cast<std::uint32_t>(level_index);
    case NominalMode::kHash:
      return static_cast<std::uint32_t>(splitmix64(fnv1a64(label) ^ splitmix64(hash_seed)) % static_cast<std::uint64_t>(bits));
  }
  return 0;
}

inline BepMatrix encode_table(const MixedTable& table, const BepConfig& cfg) {
  cfg.validate();
  if (table.n() == 0 || table.d() == 0) throw DataError("bep: cannot encode an empty table");

  BepMatrix out;
  out.n = table.n();
  out.bits = cfg.bits;
  out.rows.assign(table.n(), {});
  std::uint32_t cursor = 0;
  for (std::size_t j = 0; j < table.d(); ++j) {
    const auto& col = table.column(j);
    BitGroup group{col.name, col.kind, cursor, 0};
    if (col.kind == ColumnKind::kNominal) {
      group.width = nominal_group_width(col.levels().size(), cfg.nominal_mode, cfg.bits);
      const auto codes = table.codes(j);
      for (std::size_t i = 0; i < table.n(); ++i) {
        const auto& label = col.levels().at(static_cast<std::size_t>(codes[i]));
        out.rows[i].push_back(cursor + encode_nominal_value(label, codes[i], col, cfg.nominal_mode, cfg.bits, cfg.hash_seed));
      }
    } else {
      group.width = static_cast<std::uint32_t>(2 * cfg.bits);
      const NormalizedColumn scaled = scalar_column(table, j);
      for (std::size_t i = 0; i < table.n(); ++i) {
        const BlockCode code = encode_numeric_value(scaled.values[i], cfg.bits);
        for (int b = 0; b < cfg.bits; ++b) out.rows[i].push_back(cursor + static_cast<std::uint32_t>(code.offset + b));
      }
    }
    cursor += group.width;
    out.bit_groups.push_back(std::move(group));
  }
  out.p = cursor;
  return out;
}

/// 1 - |A n B| / |A u B| over sorted index sets. Two empty sets are at distance 0.
inline double jaccard_distance(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  std::size_t inter = 0;
  std::size_t i = 0;
  std::size_t k = 0;
  while (i < a.size() && k < b.size()) {
    if (a[i] < b[k]) {
      ++i;
    } else if (b[k] < a[i]) {
      ++k;
    } else {
      ++inter;
      ++i;
      ++k;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  if (uni == 0) return 0.0;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

struct JaccardBracket {
  double lower = 0.0;
  double upper = 0.0;
};

/// Quantization bracket for the BEP Jaccard distance of two values |x-y| = t apart.
inline JaccardBracket quantization_bounds(double t, int bits) {
  const double step = 1.0 / static_cast<double>(bits);
  const double lo = std::max(0.0, t - step);
  const double hi = std::min(1.0, t + step);
  return {2.0 * lo / (1.0 + lo), 2.0 * hi / (1.0 + hi)};
}

// ---------------------------------------------------------------------------
// Sparse text dump:
//   # bep n=<n> p=<p> B=<B>
//   # group <kind> <start> <width> <name>      (one per feature, in order)
//   <ascending active bit indices, space separated>  (one line per row)

inline void write_bep(const BepMatrix& m, std::ostream& out) {
  out << "# bep n=" << m.n << " p=" << m.p << " B=" << m.bits << '\n';
  for (const auto& g : m.bit_groups) {
    out << "# group " << to_string(g.kind) << ' ' << g.start << ' ' << g.width << ' ' << g.name << '\n';
  }
  for (const auto& row : m.rows) {
    for (std::size_t b = 0; b < row.size(); ++b) out << (b ? " " : "") << row[b];
    out << '\n';
  }
}

inline BepMatrix read_bep(std::istream& in) {
  BepMatrix m;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# bep ", 0) != 0) throw DataError("bep dump: missing header");
  if (std::sscanf(line.c_str(), "# bep n=%zu p=%zu B=%d", &m.n, &m.p, &m.bits) != 3) {
    throw DataError("bep dump: malformed header '" + line + "'");
  }
  while (in.peek() == '#' && std::getline(in, line)) {
    if (line.rfind("# group ", 0) != 0) throw DataError("bep dump: malformed group line '" + line + "'");
    std::istringstream ls(line.substr(std::string("# group ").size()));
    BitGroup g;
    std::string kind;
    if (!(ls >> kind >> g.start >> g.width)) {
      throw DataError("bep dump: malformed group line '" + line + "'");
    }
    std::getline(ls >> std::ws, g.name);
    g.kind = parse_column_kind(kind);
    m.bit_groups.push_back(std::move(g));
  }
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    BitSet row{std::istream_iterator<std::uint32_t>(ls), std::istream_iterator<std::uint32_t>()};
    for (auto bit : row) {
      if (bit >= m.p) throw DataError("bep dump: bit index out of range");
    }
    m.rows.push_back(std::move(row));
  }
  if (m.rows.size() != m.n) throw DataError("bep dump: row count does not match header");
  return m;
}

}  // namespace wise
