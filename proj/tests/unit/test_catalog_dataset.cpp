#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "planest/dataset.hpp"
#include "planest/trainer.hpp"

using namespace planest;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("catalog");

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("planest_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("catalog text round trips") {
  SchemaCatalog cat;
  cat.tables = {{"items", 100}, {"events", 250}};
  cat.columns = {{"items.id", "items", ColType::Numeric, 1, 100},
                 {"items.name", "items", ColType::Str, 0, 0},
                 {"events.item_id", "events", ColType::Numeric, 1, 100}};
  cat.indexes = {{"items_pk", "items.id"}};
  SchemaCatalog back = SchemaCatalog::parse(cat.to_text());
  CHECK(back.to_text() == cat.to_text());
  CHECK(back.table_id("events") == 1);
  CHECK(back.column_id("items.name") == 1);
  CHECK(back.index_id("items_pk") == 0);
  CHECK(back.column("events.item_id").max == 100);
  CHECK_THROWS_AS(back.column("nope.x"), data_error);
}

TEST_CASE("catalog parser rejects dangling references") {
  CHECK_THROWS_AS(SchemaCatalog::parse("column ghost.x numeric 0 1\n"),
                  parse_error);
  CHECK_THROWS_AS(SchemaCatalog::parse("table t 10\nindex i t.missing\n"),
                  parse_error);
  CHECK_THROWS_AS(SchemaCatalog::parse("what is this\n"), parse_error);
}

TEST_CASE("dataset persistence round trips") {
  TempDir tmp;
  DatasetConfig cfg;
  cfg.rows_main = 200;
  cfg.rows_detail = 300;
  Dataset ds = generate_dataset(cfg);
  ds.save(tmp.path.string(), default_indexes());
  Dataset back = Dataset::load(tmp.path.string());
  REQUIRE(back.tables.size() == ds.tables.size());
  for (size_t t = 0; t < ds.tables.size(); ++t) {
    CHECK(back.tables[t].name == ds.tables[t].name);
    CHECK(back.tables[t].rows == ds.tables[t].rows);
    REQUIRE(back.tables[t].columns.size() == ds.tables[t].columns.size());
    for (size_t c = 0; c < ds.tables[t].columns.size(); ++c) {
      CHECK(back.tables[t].columns[c].first == ds.tables[t].columns[c].first);
      CHECK(back.tables[t].columns[c].second.nums ==
            ds.tables[t].columns[c].second.nums);
      CHECK(back.tables[t].columns[c].second.strs ==
            ds.tables[t].columns[c].second.strs);
    }
  }
}

TEST_CASE("samples are seeded and stable under reload") {
  TempDir tmp;
  DatasetConfig cfg;
  cfg.rows_main = 500;
  cfg.rows_detail = 40;
  Dataset ds = generate_dataset(cfg);

  SampleStore a = SampleStore::build(ds, 64, 9);
  SampleStore b = SampleStore::build(ds, 64, 9);
  REQUIRE(a.tables.size() == b.tables.size());
  for (size_t i = 0; i < a.tables.size(); ++i) {
    CHECK(a.tables[i].row_ids == b.tables[i].row_ids);
    CHECK(a.tables[i].row_ids.size() <= 64);
  }
  CHECK(a.table("items")->row_ids.size() == 64);
  // Tables under the sample size are taken whole.
  CHECK(a.table("events")->row_ids.size() == 40);

  std::string path = (tmp.path / "samples.bin").string();
  a.save(path);
  SampleStore c = SampleStore::load(path);
  CHECK(c.sample_size == a.sample_size);
  CHECK(c.seed == a.seed);
  for (size_t i = 0; i < a.tables.size(); ++i) {
    CHECK(c.tables[i].table == a.tables[i].table);
    CHECK(c.tables[i].row_ids == a.tables[i].row_ids);
    for (size_t k = 0; k < a.tables[i].columns.size(); ++k) {
      CHECK(c.tables[i].columns[k].second.nums ==
            a.tables[i].columns[k].second.nums);
      CHECK(c.tables[i].columns[k].second.strs ==
            a.tables[i].columns[k].second.strs);
    }
  }
}

TEST_SUITE_END();
