#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "planest/catalog.hpp"

namespace planest {

// One column of values, fully materialized. Numeric columns use `nums`,
// string columns `strs`; the other vector stays empty.
struct Column {
  ColType type = ColType::Numeric;
  std::vector<double> nums;
  std::vector<std::string> strs;

  size_t size() const {
    return type == ColType::Numeric ? nums.size() : strs.size();
  }
};

struct Table {
  std::string name;
  uint64_t rows = 0;
  std::vector<std::pair<std::string, Column>> columns;  // unqualified names

  const Column* column(std::string_view name) const;
  Column* column(std::string_view name);
};

struct Dataset {
  std::vector<Table> tables;

  const Table* table(std::string_view name) const;

  // Catalog derived from the data: row counts and numeric min/max.
  // Index declarations are appended by the generator.
  SchemaCatalog make_catalog(const std::vector<IndexInfo>& indexes = {}) const;

  // Columnar binary persistence, one .tbl file per table plus catalog.txt.
  void save(const std::string& dir,
            const std::vector<IndexInfo>& indexes = {}) const;
  static Dataset load(const std::string& dir);

  // Every string value in the dataset, deduplicated and sorted.
  std::vector<std::string> string_corpus() const;
};

// Uniform without-replacement sample of up to `sample_size` rows per table,
// stable under reload. Row order follows the seeded draw.
struct TableSample {
  std::string table;
  uint32_t sample_size = 0;  // requested S
  uint64_t seed = 0;
  std::vector<uint32_t> row_ids;                        // actual sampled rows
  std::vector<std::pair<std::string, Column>> columns;  // sampled values

  const Column* column(std::string_view name) const;
};

struct SampleStore {
  uint32_t sample_size = 0;
  uint64_t seed = 0;
  std::vector<TableSample> tables;

  const TableSample* table(std::string_view name) const;

  static SampleStore build(const Dataset& ds, uint32_t sample_size,
                           uint64_t seed);
  void save(const std::string& path) const;
  static SampleStore load(const std::string& path);
};

}  // namespace planest
