#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "wise/bep.hpp"

using namespace wise;

namespace {

/// Set-based Jaccard distance, independent of the merge in jaccard_distance.
double set_jaccard(const BitSet& a, const BitSet& b) {
  std::set<std::uint32_t> sa(a.begin(), a.end()), sb(b.begin(), b.end()), uni = sa;
  uni.insert(sb.begin(), sb.end());
  std::size_t inter = 0;
  for (auto x : sa) inter += sb.count(x);
  return uni.empty() ? 0.0 : 1.0 - static_cast<double>(inter) / static_cast<double>(uni.size());
}

MixedTable small_table() {
  std::istringstream in("v,g,c\n0,lo,red\n0.5,mid,blue\n1,hi,red\n0.25,lo,green\n");
  std::vector<ColumnSchema> schema{{"v", ColumnKind::kNumeric, {}, {}},
                                   {"g", ColumnKind::kOrdinal, {"lo", "mid", "hi"}, {}},
                                   {"c", ColumnKind::kNominal, {}, {}}};
  return table_from_records(parse_csv(in), schema);
}

}  // namespace

TEST(NumericBlock, WorkedExampleWithFourBits) {
  // x=0.5, y=0.75 with B=4: offsets 2 and 3, 3 shared bits out of 5.
  const auto a = encode_numeric_value(0.5, 4);
  const auto b = encode_numeric_value(0.75, 4);
  EXPECT_EQ(a.offset, 2);
  EXPECT_EQ(b.offset, 3);
  EXPECT_EQ(a.active(), (BitSet{2, 3, 4, 5}));
  EXPECT_DOUBLE_EQ(jaccard_distance(a.active(), b.active()), 0.4);
}

TEST(NumericBlock, EndpointsUseFullWindow) {
  EXPECT_EQ(encode_numeric_value(0.0, 8).offset, 0);
  EXPECT_EQ(encode_numeric_value(1.0, 8).offset, 8);
  EXPECT_EQ(encode_numeric_value(1.0, 8).active().back(), 15u);
}

TEST(NumericBlock, DisjointAtExtremes) {
  EXPECT_DOUBLE_EQ(jaccard_distance(encode_numeric_value(0.0, 16).active(), encode_numeric_value(1.0, 16).active()), 1.0);
}

TEST(NumericBlock, OutOfRangeValueIsDataError) {
  EXPECT_THROW(encode_numeric_value(1.5, 8), DataError);
  EXPECT_THROW(encode_numeric_value(-0.1, 8), DataError);
}

TEST(NumericBlock, TooFewBitsIsConfigError) { EXPECT_THROW(encode_numeric_value(0.5, 1), ConfigError); }

TEST(Jaccard, MatchesSetOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    BitSet a, b;
    for (std::uint32_t t = 0; t < 40; ++t) {
      if (rng() % 3 == 0) a.push_back(t);
      if (rng() % 4 == 0) b.push_back(t);
    }
    EXPECT_DOUBLE_EQ(jaccard_distance(a, b), set_jaccard(a, b));
  }
}

TEST(Jaccard, EmptySetsAreIdentical) { EXPECT_EQ(jaccard_distance(BitSet{}, BitSet{}), 0.0); }

TEST(Quantization, BracketHoldsOnGrid) {
  for (int bits : {2, 3, 5, 8, 13, 32}) {
    for (int i = 0; i <= 40; ++i) {
      for (int k = 0; k <= 40; ++k) {
        const double x = i / 40.0, y = k / 40.0;
        const double d = jaccard_distance(encode_numeric_value(x, bits).active(), encode_numeric_value(y, bits).active());
        const auto br = quantization_bounds(std::abs(x - y), bits);
        EXPECT_LE(br.lower, d + 1e-15);
        EXPECT_GE(br.upper, d - 1e-15);
      }
    }
  }
}

TEST(Quantization, ClosedFormForOffsetGap) {
  const int bits = 10;
  for (int gap = 0; gap <= bits; ++gap) {
    const BlockCode a{0, bits}, b{gap, bits};
    const double tau = static_cast<double>(gap) / bits;
    EXPECT_DOUBLE_EQ(jaccard_distance(a.active(), b.active()), 2 * tau / (1 + tau));
  }
}

TEST(Nominal, OneHotUsesLevelIndex) {
  ColumnSchema col{"c", ColumnKind::kNominal, {}, {"a", "b", "c"}};
  EXPECT_EQ(encode_nominal_value("c", 2, col, NominalMode::kOneHot, 4, 0), 2u);
  EXPECT_EQ(nominal_group_width(3, NominalMode::kOneHot, 4), 4u);
}

TEST(Nominal, OneHotOverflowRecommendsAlternatives) {
  ColumnSchema col{"c", ColumnKind::kNominal, {}, {"a", "b", "c"}};
  try {
    encode_nominal_value("a", 0, col, NominalMode::kOneHot, 2, 0);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("hash"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("expand"), std::string::npos);
  }
}

TEST(Nominal, ExpandWidthIsLevelCount) {
  ColumnSchema col{"c", ColumnKind::kNominal, {}, {"a", "b", "c", "d", "e"}};
  EXPECT_EQ(nominal_group_width(5, NominalMode::kExpand, 2), 5u);
  EXPECT_EQ(encode_nominal_value("e", 4, col, NominalMode::kExpand, 2, 0), 4u);
}

TEST(Nominal, HashIsStableAndInRange) {
  ColumnSchema col{"c", ColumnKind::kNominal, {}, {}};
  for (int i = 0; i < 100; ++i) {
    const std::string label = "level" + std::to_string(i);
    const auto a = encode_nominal_value(label, -1, col, NominalMode::kHash, 7, 11);
    EXPECT_LT(a, 7u);
    EXPECT_EQ(a, encode_nominal_value(label, -1, col, NominalMode::kHash, 7, 11));
  }
}

TEST(Nominal, HashSeedChangesAssignment) {
  ColumnSchema col{"c", ColumnKind::kNominal, {}, {}};
  int moved = 0;
  for (int i = 0; i < 64; ++i) {
    const std::string label = "v" + std::to_string(i);
    moved += encode_nominal_value(label, -1, col, NominalMode::kHash, 1024, 1) !=
             encode_nominal_value(label, -1, col, NominalMode::kHash, 1024, 2);
  }
  EXPECT_GT(moved, 50);
}

TEST(EncodeTable, LayoutAndRowCardinality) {
  const auto t = small_table();
  BepConfig cfg;
  cfg.bits = 4;
  const auto m = encode_table(t, cfg);
  ASSERT_EQ(m.bit_groups.size(), 3u);
  EXPECT_EQ(m.bit_groups[0].start, 0u);
  EXPECT_EQ(m.bit_groups[1].start, 8u);
  EXPECT_EQ(m.bit_groups[2].start, 16u);
  EXPECT_EQ(m.p, 20u);
  for (const auto& row : m.rows) {
    EXPECT_EQ(row.size(), 4u + 4u + 1u);
    EXPECT_TRUE(std::is_sorted(row.begin(), row.end()));
  }
  // Row 1: v=0.5 -> offset 2; g=mid -> 0.5 -> offset 2; c=blue -> level 1.
  EXPECT_EQ(m.rows[1], (BitSet{2, 3, 4, 5, 10, 11, 12, 13, 17}));
}

TEST(EncodeTable, ExpandModeWidth) {
  const auto t = small_table();
  BepConfig cfg;
  cfg.bits = 2;
  cfg.nominal_mode = NominalMode::kExpand;
  const auto m = encode_table(t, cfg);
  EXPECT_EQ(m.bit_groups[2].width, 3u);
  EXPECT_EQ(m.p, 4u + 4u + 3u);
}

TEST(EncodeTable, OneHotTooNarrowFails) {
  BepConfig cfg;
  cfg.bits = 2;
  EXPECT_THROW(encode_table(small_table(), cfg), ConfigError);
}

TEST(Dump, RoundTrip) {
  BepConfig cfg;
  cfg.bits = 4;
  const auto m = encode_table(small_table(), cfg);
  std::stringstream io;
  write_bep(m, io);
  const auto back = read_bep(io);
  EXPECT_EQ(back.n, m.n);
  EXPECT_EQ(back.p, m.p);
  EXPECT_EQ(back.bits, m.bits);
  EXPECT_EQ(back.rows, m.rows);
  ASSERT_EQ(back.bit_groups.size(), m.bit_groups.size());
  for (std::size_t j = 0; j < m.bit_groups.size(); ++j) {
    EXPECT_EQ(back.bit_groups[j].name, m.bit_groups[j].name);
    EXPECT_EQ(back.bit_groups[j].start, m.bit_groups[j].start);
    EXPECT_EQ(back.bit_groups[j].width, m.bit_groups[j].width);
    EXPECT_EQ(back.bit_groups[j].kind, m.bit_groups[j].kind);
  }
}

TEST(Dump, RejectsOutOfRangeBit) {
  std::istringstream in("# bep n=1 p=4 B=2\n# group numeric 0 4 x\n0 9\n");
  EXPECT_THROW(read_bep(in), DataError);
}
