#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "planest/errors.hpp"

namespace planest {

enum class ColType : uint8_t { Numeric, Str };

struct TableInfo {
  std::string name;
  uint64_t row_count = 0;
};

struct ColumnInfo {
  std::string name;  // qualified, "table.column"
  std::string table;
  ColType type = ColType::Numeric;
  // Value range for numeric columns; drives the min-max normalization.
  double min = 0.0;
  double max = 0.0;
};

struct IndexInfo {
  std::string name;
  std::string column;  // qualified
};

// Fixed universe of names a workload may touch. Feature widths (metadata
// bitmap, column one-hots) are pure functions of this catalog, so reloading
// it must reproduce the exact same ordering.
struct SchemaCatalog {
  std::vector<TableInfo> tables;
  std::vector<ColumnInfo> columns;
  std::vector<IndexInfo> indexes;

  int table_id(std::string_view name) const;    // -1 when unknown
  int column_id(std::string_view name) const;   // qualified name
  int index_id(std::string_view name) const;

  const ColumnInfo& column(std::string_view name) const;  // throws data_error

  // Line-based text format, see docs/schema_format.md.
  static SchemaCatalog parse(std::string_view text);
  std::string to_text() const;
  static SchemaCatalog load(const std::string& path);
  void save(const std::string& path) const;
};

}  // namespace planest
