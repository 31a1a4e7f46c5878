#include "planest/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

namespace planest {

namespace fs = std::filesystem;

const Column* Table::column(std::string_view name) const {
  for (const auto& [n, c] : columns)
    if (n == name) return &c;
  return nullptr;
}

Column* Table::column(std::string_view name) {
  for (auto& [n, c] : columns)
    if (n == name) return &c;
  return nullptr;
}

const Table* Dataset::table(std::string_view name) const {
  for (const auto& t : tables)
    if (t.name == name) return &t;
  return nullptr;
}

SchemaCatalog Dataset::make_catalog(
    const std::vector<IndexInfo>& indexes) const {
  SchemaCatalog cat;
  for (const auto& t : tables) {
    cat.tables.push_back({t.name, t.rows});
    for (const auto& [name, col] : t.columns) {
      ColumnInfo info;
      info.name = t.name + "." + name;
      info.table = t.name;
      info.type = col.type;
      if (col.type == ColType::Numeric && !col.nums.empty()) {
        auto [mn, mx] = std::minmax_element(col.nums.begin(), col.nums.end());
        info.min = *mn;
        info.max = *mx;
      }
      cat.columns.push_back(std::move(info));
    }
  }
  cat.indexes = indexes;
  return cat;
}

std::vector<std::string> Dataset::string_corpus() const {
  std::set<std::string> seen;
  for (const auto& t : tables)
    for (const auto& [name, col] : t.columns)
      if (col.type == ColType::Str)
        seen.insert(col.strs.begin(), col.strs.end());
  return {seen.begin(), seen.end()};
}

// ---------------------------------------------------------------------------
// Binary io
// ---------------------------------------------------------------------------

namespace {

constexpr char kTableMagic[8] = {'P', 'L', 'N', 'T', 'B', 'L', '0', '1'};
constexpr char kSampleMagic[8] = {'P', 'L', 'N', 'S', 'M', 'P', '0', '1'};

void put_u64(std::ostream& out, uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>(v >> (8 * i));
  out.write(buf, 8);
}

uint64_t get_u64(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  if (!in) throw data_error("truncated binary file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

void put_str(std::ostream& out, std::string_view s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& in) {
  uint64_t n = get_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw data_error("truncated binary file");
  return s;
}

void write_column(std::ostream& out, const Column& col) {
  put_u64(out, col.type == ColType::Numeric ? 0 : 1);
  if (col.type == ColType::Numeric) {
    put_u64(out, col.nums.size());
    for (double v : col.nums) {
      uint64_t bits;
      std::memcpy(&bits, &v, 8);
      put_u64(out, bits);
    }
  } else {
    put_u64(out, col.strs.size());
    for (const auto& s : col.strs) put_str(out, s);
  }
}

Column read_column(std::istream& in) {
  Column col;
  col.type = get_u64(in) == 0 ? ColType::Numeric : ColType::Str;
  uint64_t n = get_u64(in);
  if (col.type == ColType::Numeric) {
    col.nums.reserve(n);
    for (uint64_t i = 0; i < n; ++i) {
      uint64_t bits = get_u64(in);
      double v;
      std::memcpy(&v, &bits, 8);
      col.nums.push_back(v);
    }
  } else {
    col.strs.reserve(n);
    for (uint64_t i = 0; i < n; ++i) col.strs.push_back(get_str(in));
  }
  return col;
}

void write_columns(std::ostream& out,
                   const std::vector<std::pair<std::string, Column>>& cols) {
  put_u64(out, cols.size());
  for (const auto& [name, col] : cols) {
    put_str(out, name);
    write_column(out, col);
  }
}

std::vector<std::pair<std::string, Column>> read_columns(std::istream& in) {
  uint64_t n = get_u64(in);
  std::vector<std::pair<std::string, Column>> cols;
  cols.reserve(n);
  for (uint64_t i = 0; i < n; ++i) {
    std::string name = get_str(in);
    cols.emplace_back(std::move(name), read_column(in));
  }
  return cols;
}

}  // namespace

void Dataset::save(const std::string& dir,
                   const std::vector<IndexInfo>& indexes) const {
  fs::create_directories(dir);
  make_catalog(indexes).save((fs::path(dir) / "catalog.txt").string());
  for (const auto& t : tables) {
    std::ofstream out(fs::path(dir) / (t.name + ".tbl"),
                      std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot write table file for " + t.name);
    out.write(kTableMagic, 8);
    put_str(out, t.name);
    put_u64(out, t.rows);
    write_columns(out, t.columns);
  }
}

Dataset Dataset::load(const std::string& dir) {
  auto cat = SchemaCatalog::load((fs::path(dir) / "catalog.txt").string());
  Dataset ds;
  for (const auto& ti : cat.tables) {
    std::ifstream in(fs::path(dir) / (ti.name + ".tbl"), std::ios::binary);
    if (!in) throw data_error("missing table file for " + ti.name);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kTableMagic, 8) != 0)
      throw data_error("bad table file magic for " + ti.name);
    Table t;
    t.name = get_str(in);
    t.rows = get_u64(in);
    t.columns = read_columns(in);
    ds.tables.push_back(std::move(t));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Sample store
// ---------------------------------------------------------------------------

const Column* TableSample::column(std::string_view name) const {
  for (const auto& [n, c] : columns)
    if (n == name) return &c;
  return nullptr;
}

const TableSample* SampleStore::table(std::string_view name) const {
  for (const auto& t : tables)
    if (t.table == name) return &t;
  return nullptr;
}

SampleStore SampleStore::build(const Dataset& ds, uint32_t sample_size,
                               uint64_t seed) {
  SampleStore store;
  store.sample_size = sample_size;
  store.seed = seed;
  for (const auto& t : ds.tables) {
    TableSample ts;
    ts.table = t.name;
    ts.sample_size = sample_size;
    ts.seed = seed;
    // Seeded Fisher-Yates prefix; per-table stream so adding a table does not
    // reshuffle the others.
    uint64_t name_h = 0xcbf29ce484222325ull;
    for (unsigned char c : t.name) {
      name_h ^= c;
      name_h *= 0x100000001b3ull;
    }
    std::seed_seq sq{seed, name_h};
    std::mt19937_64 rng(sq);
    std::vector<uint32_t> ids(t.rows);
    for (uint32_t i = 0; i < t.rows; ++i) ids[i] = i;
    uint32_t take = std::min<uint64_t>(sample_size, t.rows);
    for (uint32_t i = 0; i < take; ++i) {
      uint64_t j = i + rng() % (t.rows - i);
      std::swap(ids[i], ids[j]);
    }
    ids.resize(take);
    ts.row_ids = ids;
    for (const auto& [name, col] : t.columns) {
      Column sampled;
      sampled.type = col.type;
      for (uint32_t id : ids) {
        if (col.type == ColType::Numeric)
          sampled.nums.push_back(col.nums[id]);
        else
          sampled.strs.push_back(col.strs[id]);
      }
      ts.columns.emplace_back(name, std::move(sampled));
    }
    store.tables.push_back(std::move(ts));
  }
  return store;
}

void SampleStore::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write sample store " + path);
  out.write(kSampleMagic, 8);
  put_u64(out, sample_size);
  put_u64(out, seed);
  put_u64(out, tables.size());
  for (const auto& t : tables) {
    put_str(out, t.table);
    put_u64(out, t.sample_size);
    put_u64(out, t.seed);
    put_u64(out, t.row_ids.size());
    for (uint32_t id : t.row_ids) put_u64(out, id);
    write_columns(out, t.columns);
  }
}

SampleStore SampleStore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open sample store " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kSampleMagic, 8) != 0)
    throw data_error("bad sample store magic");
  SampleStore store;
  store.sample_size = static_cast<uint32_t>(get_u64(in));
  store.seed = get_u64(in);
  uint64_t n = get_u64(in);
  for (uint64_t i = 0; i < n; ++i) {
    TableSample t;
    t.table = get_str(in);
    t.sample_size = static_cast<uint32_t>(get_u64(in));
    t.seed = get_u64(in);
    uint64_t rows = get_u64(in);
    t.row_ids.reserve(rows);
    for (uint64_t r = 0; r < rows; ++r)
      t.row_ids.push_back(static_cast<uint32_t>(get_u64(in)));
    t.columns = read_columns(in);
    store.tables.push_back(std::move(t));
  }
  return store;
}

}  // namespace planest
