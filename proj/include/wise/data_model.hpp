#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "wise/util.hpp"

namespace wise {

enum class ColumnKind { kNumeric, kOrdinal, kNominal };

inline std::string to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::kNumeric: return "numeric";
    case ColumnKind::kOrdinal: return "ordinal";
    case ColumnKind::kNominal: return "nominal";
  }
  return "?";
}

inline ColumnKind parse_column_kind(const std::string& text) {
  if (text == "numeric") return ColumnKind::kNumeric;
  if (text == "ordinal") return ColumnKind::kOrdinal;
  if (text == "nominal") return ColumnKind::kNominal;
  throw ConfigError("schema: unknown column kind '" + text + "' (expected numeric, ordinal or nominal)");
}

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  // Required for ordinal columns; defines the level order.
  std::vector<std::string> ordered_levels;
  // Nominal columns: distinct labels in first-occurrence order, filled at load.
  std::vector<std::string> observed_levels;

  /// Categories of a categorical column (ordinal: declared, nominal: observed).
  const std::vector<std::string>& levels() const {
    return kind == ColumnKind::kOrdinal ? ordered_levels : observed_levels;
  }

  void validate() const {
    if (name.empty()) throw ConfigError("schema: column with empty name");
    if (kind != ColumnKind::kOrdinal) return;
    if (ordered_levels.empty()) {
      throw ConfigError("schema: ordinal column '" + name + "' needs non-empty ordered_levels");
    }
    std::unordered_map<std::string, int> seen;
    for (const auto& level : ordered_levels) {
      if (!seen.emplace(level, 0).second) {
        throw ConfigError("schema: ordinal column '" + name + "' has duplicate level '" + level + "'");
      }
    }
  }
};

/// Min-max normalized scalar column.
struct NormalizedColumn {
  std::vector<double> values;
  double min = 0.0;
  double max = 0.0;
};

/// Column-major mixed-type table. Numeric columns hold their parsed reals;
/// ordinal and nominal columns hold level indices into ColumnSchema::levels().
class MixedTable {
 public:
  MixedTable() = default;

  MixedTable(std::vector<ColumnSchema> schema, std::size_t n_rows)
      : schema_(std::move(schema)), n_(n_rows), numeric_(schema_.size()), codes_(schema_.size()) {
    for (std::size_t j = 0; j < schema_.size(); ++j) {
      schema_[j].validate();
      if (schema_[j].kind == ColumnKind::kNumeric) {
        numeric_[j].assign(n_, 0.0);
      } else {
        codes_[j].assign(n_, 0);
      }
    }
  }

  std::size_t n() const { return n_; }
  std::size_t d() const { return schema_.size(); }
  const std::vector<ColumnSchema>& schema() const { return schema_; }
  const ColumnSchema& column(std::size_t j) const { return schema_.at(j); }
  ColumnSchema& mutable_column(std::size_t j) { return schema_.at(j); }

  std::span<const double> numeric(std::size_t j) const { return numeric_.at(j); }
  std::span<double> mutable_numeric(std::size_t j) { return numeric_.at(j); }
  std::span<const int> codes(std::size_t j) const { return codes_.at(j); }
  std::span<int> mutable_codes(std::size_t j) { return codes_.at(j); }

  /// Cell rendered as text (numeric at round-trip precision).
  std::string cell_text(std::size_t i, std::size_t j) const {
    const auto& col = schema_.at(j);
    if (col.kind == ColumnKind::kNumeric) {
      std::ostringstream os;
      os.precision(17);
      os << numeric_[j][i];
      return os.str();
    }
    return col.levels().at(static_cast<std::size_t>(codes_[j][i]));
  }

  std::optional<std::size_t> find_column(const std::string& name) const {
    for (std::size_t j = 0; j < schema_.size(); ++j) {
      if (schema_[j].name == name) return j;
    }
    return std::nullopt;
  }

  /// Table without column j.
  MixedTable without_column(std::size_t j) const {
    MixedTable out = *this;
    out.schema_.erase(out.schema_.begin() + static_cast<std::ptrdiff_t>(j));
    out.numeric_.erase(out.numeric_.begin() + static_cast<std::ptrdiff_t>(j));
    out.codes_.erase(out.codes_.begin() + static_cast<std::ptrdiff_t>(j));
    return out;
  }

 private:
  std::vector<ColumnSchema> schema_;
  std::size_t n_ = 0;
  std::vector<std::vector<double>> numeric_;
  std::vector<std::vector<int>> codes_;
};

// ---------------------------------------------------------------------------
// Normalization

inline NormalizedColumn normalize_numeric(std::span<const double> values) {
  NormalizedColumn out;
  out.values.assign(values.size(), 0.0);
  if (values.empty()) return out;
  out.min = values[0];
  out.max = values[0];
  for (double v : values) {
    out.min = std::min(out.min, v);
    out.max = std::max(out.max, v);
  }
  const double range = out.max - out.min;
  if (range > 0.0) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      // Clamp guards the last ulp; (max-min)/(max-min) is exactly 1 anyway.
      out.values[i] = std::clamp((values[i] - out.min) / range, 0.0, 1.0);
    }
  }
  return out;
}

/// Ordinal level indices -> min-max scaled scalars.
inline NormalizedColumn ordinal_to_scalar(std::span<const int> level_indices, const ColumnSchema& schema) {
  if (schema.kind != ColumnKind::kOrdinal) {
    throw ConfigError("ordinal_to_scalar: column '" + schema.name + "' is not ordinal");
  }
  std::vector<double> as_real(level_indices.size());
  for (std::size_t i = 0; i < level_indices.size(); ++i) {
    const int code = level_indices[i];
    if (code < 0 || static_cast<std::size_t>(code) >= schema.ordered_levels.size()) {
      throw DataError("ordinal column '" + schema.name + "': level index out of range");
    }
    as_real[i] = static_cast<double>(code);
  }
  return normalize_numeric(as_real);
}

/// Ordinal labels -> min-max scaled scalars.
inline NormalizedColumn ordinal_to_scalar(const std::vector<std::string>& labels, const ColumnSchema& schema) {
  if (schema.kind != ColumnKind::kOrdinal) {
    throw ConfigError("ordinal_to_scalar: column '" + schema.name + "' is not ordinal");
  }
  std::unordered_map<std::string, int> index;
  for (std::size_t l = 0; l < schema.ordered_levels.size(); ++l) index.emplace(schema.ordered_levels[l], static_cast<int>(l));
  std::vector<int> codes(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = index.find(labels[i]);
    if (it == index.end()) {
      throw DataError("ordinal column '" + schema.name + "': value '" + labels[i] + "' not in ordered_levels");
    }
    codes[i] = it->second;
  }
  return ordinal_to_scalar(std::span<const int>(codes), schema);
}

/// Normalized scalar view of a numeric or ordinal column.
inline NormalizedColumn scalar_column(const MixedTable& table, std::size_t j) {
  const auto& col = table.column(j);
  switch (col.kind) {
    case ColumnKind::kNumeric: return normalize_numeric(table.numeric(j));
    case ColumnKind::kOrdinal: return ordinal_to_scalar(table.codes(j), col);
    case ColumnKind::kNominal: break;
  }
  throw ConfigError("scalar_column: column '" + col.name + "' is nominal");
}

// ---------------------------------------------------------------------------
// CSV

/// Splits CSV text into records. Supports quoted fields with "" escapes and
/// embedded separators/newlines.
inline std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  char c;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_record();
    } else if (c == '\r') {
      // CRLF line endings.
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw DataError("csv: unterminated quoted field");
  if (!field.empty() || !record.empty()) end_record();
  return records;
}

inline std::string csv_escape(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline bool is_missing_token(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "?";
}

inline std::vector<ColumnSchema> parse_schema(const nlohmann::json& doc) {
  const nlohmann::json& cols = doc.is_array() ? doc : doc.at("columns");
  std::vector<ColumnSchema> schema;
  for (const auto& entry : cols) {
    ColumnSchema col;
    col.name = entry.at("name").get<std::string>();
    col.kind = parse_column_kind(entry.at("kind").get<std::string>());
    if (entry.contains("ordered_levels")) col.ordered_levels = entry["ordered_levels"].get<std::vector<std::string>>();
    col.validate();
    schema.push_back(std::move(col));
  }
  if (schema.empty()) throw ConfigError("schema: no columns");
  return schema;
}

inline std::vector<ColumnSchema> load_schema(const std::string& schema_path) {
  std::ifstream in(schema_path);
  if (!in) throw ConfigError("schema: cannot open '" + schema_path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
    return parse_schema(doc);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("schema: malformed '" + schema_path + "': " + e.what());
  }
}

inline nlohmann::json schema_to_json(const std::vector<ColumnSchema>& schema) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& col : schema) {
    nlohmann::json entry = {{"name", col.name}, {"kind", to_string(col.kind)}};
    if (col.kind == ColumnKind::kOrdinal) entry["ordered_levels"] = col.ordered_levels;
    cols.push_back(std::move(entry));
  }
  return {{"columns", cols}};
}

/// Builds a validated table from already-split records (header first).
inline MixedTable table_from_records(const std::vector<std::vector<std::string>>& records, std::vector<ColumnSchema> schema) {
  if (records.empty()) throw DataError("csv: empty input (no header)");
  const auto& header = records.front();
  // Map schema columns to CSV positions; extra CSV columns are an error.
  if (header.size() != schema.size()) {
    throw DataError("csv: header has " + std::to_string(header.size()) + " columns, schema has " + std::to_string(schema.size()));
  }
  std::vector<std::size_t> position(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    auto it = std::find(header.begin(), header.end(), schema[j].name);
    if (it == header.end()) throw DataError("csv: schema column '" + schema[j].name + "' missing from header");
    position[j] = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<std::size_t> kept;
  std::size_t dropped = 0;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != header.size()) {
      throw DataError("csv: record " + std::to_string(r) + " has " + std::to_string(rec.size()) + " cells, expected " + std::to_string(header.size()));
    }
    bool missing = false;
    for (const auto& cell : rec) missing = missing || is_missing_token(cell);
    if (missing) {
      ++dropped;
    } else {
      kept.push_back(r);
    }
  }
  if (dropped > 0) log(LogLevel::kInfo, "dropped " + std::to_string(dropped) + " rows with missing values");
  if (kept.empty()) throw DataError("csv: table has no complete rows");

  std::vector<std::unordered_map<std::string, int>> level_index(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    for (std::size_t l = 0; l < schema[j].ordered_levels.size(); ++l) level_index[j].emplace(schema[j].ordered_levels[l], static_cast<int>(l));
  }

  std::vector<std::vector<double>> numeric(schema.size());
  std::vector<std::vector<int>> codes(schema.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const auto& rec = records[kept[i]];
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const std::string& cell = rec[position[j]];
      auto& col = schema[j];
      switch (col.kind) {
        case ColumnKind::kNumeric: {
          std::size_t used = 0;
          double v = 0.0;
          try {
            v = std::stod(cell, &used);
          } catch (const std::exception&) {
            used = 0;
          }
          while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
          if (used != cell.size() || !std::isfinite(v)) {
            throw DataError("csv: unparseable numeric cell '" + cell + "' in column '" + col.name + "'");
          }
          numeric[j].push_back(v);
          break;
        }
        case ColumnKind::kOrdinal: {
          auto it = level_index[j].find(cell);
          if (it == level_index[j].end()) {
            throw DataError("csv: ordinal value '" + cell + "' not in ordered_levels of column '" + col.name + "'");
          }
          codes[j].push_back(it->second);
          break;
        }
        case ColumnKind::kNominal: {
          auto [it, inserted] = level_index[j].emplace(cell, static_cast<int>(col.observed_levels.size()));
          if (inserted) col.observed_levels.push_back(cell);
          codes[j].push_back(it->second);
          break;
        }
      }
    }
  }

  MixedTable table(std::move(schema), kept.size());
  for (std::size_t j = 0; j < table.d(); ++j) {
    if (table.column(j).kind == ColumnKind::kNumeric) {
      std::copy(numeric[j].begin(), numeric[j].end(), table.mutable_numeric(j).begin());
    } else {
      std::copy(codes[j].begin(), codes[j].end(), table.mutable_codes(j).begin());
    }
  }
  return table;
}

inline MixedTable load_table(const std::string& csv_path, const std::string& schema_path) {
  auto schema = load_schema(schema_path);
  std::ifstream in(csv_path);
  if (!in) throw DataError("csv: cannot open '" + csv_path + "'");
  return table_from_records(parse_csv(in), std::move(schema));
}

inline void write_table(const MixedTable& table, std::ostream& out) {
  for (std::size_t j = 0; j < table.d(); ++j) out << (j ? "," : "") << csv_escape(table.column(j).name);
  out << '\n';
  for (std::size_t i = 0; i < table.n(); ++i) {
    for (std::size_t j = 0; j < table.d(); ++j) out << (j ? "," : "") << csv_escape(table.cell_text(i, j));
    out << '\n';
  }
}

inline void write_table(const MixedTable& table, const std::string& csv_path) {
  std::ofstream out(csv_path);
  if (!out) throw DataError("csv: cannot write '" + csv_path + "'");
  write_table(table, out);
}

}  // namespace wise
