#include "planest/catalog.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace planest {

int SchemaCatalog::table_id(std::string_view name) const {
  for (size_t i = 0; i < tables.size(); ++i)
    if (tables[i].name == name) return static_cast<int>(i);
  return -1;
}

int SchemaCatalog::column_id(std::string_view name) const {
  for (size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == name) return static_cast<int>(i);
  return -1;
}

int SchemaCatalog::index_id(std::string_view name) const {
  for (size_t i = 0; i < indexes.size(); ++i)
    if (indexes[i].name == name) return static_cast<int>(i);
  return -1;
}

const ColumnInfo& SchemaCatalog::column(std::string_view name) const {
  int id = column_id(name);
  if (id < 0) throw data_error("unknown column \"" + std::string(name) + "\"");
  return columns[id];
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double parse_num(const std::string& s, int line_no) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw parse_error("bad number \"" + s + "\"", line_no, 1);
  return v;
}

}  // namespace

SchemaCatalog SchemaCatalog::parse(std::string_view text) {
  SchemaCatalog cat;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "table" && tok.size() == 3) {
      cat.tables.push_back({tok[1], static_cast<uint64_t>(
                                        parse_num(tok[2], line_no))});
    } else if (tok[0] == "column" && (tok.size() == 3 || tok.size() == 5)) {
      ColumnInfo col;
      col.name = tok[1];
      auto dot = col.name.find('.');
      if (dot == std::string::npos)
        throw parse_error("column name must be table.column", line_no, 1);
      col.table = col.name.substr(0, dot);
      if (tok[2] == "numeric" && tok.size() == 5) {
        col.type = ColType::Numeric;
        col.min = parse_num(tok[3], line_no);
        col.max = parse_num(tok[4], line_no);
      } else if (tok[2] == "string" && tok.size() == 3) {
        col.type = ColType::Str;
      } else {
        throw parse_error("bad column declaration", line_no, 1);
      }
      cat.columns.push_back(std::move(col));
    } else if (tok[0] == "index" && tok.size() == 3) {
      cat.indexes.push_back({tok[1], tok[2]});
    } else {
      throw parse_error("unrecognized catalog line \"" + line + "\"", line_no,
                        1);
    }
  }
  for (const auto& col : cat.columns)
    if (cat.table_id(col.table) < 0)
      throw parse_error("column " + col.name + " references unknown table " +
                        col.table);
  for (const auto& idx : cat.indexes)
    if (cat.column_id(idx.column) < 0)
      throw parse_error("index " + idx.name + " references unknown column " +
                        idx.column);
  return cat;
}

std::string SchemaCatalog::to_text() const {
  std::string out = "# planest schema catalog v1\n";
  char buf[128];
  for (const auto& t : tables) {
    std::snprintf(buf, sizeof buf, "table %s %llu\n", t.name.c_str(),
                  static_cast<unsigned long long>(t.row_count));
    out += buf;
  }
  for (const auto& c : columns) {
    if (c.type == ColType::Numeric) {
      std::snprintf(buf, sizeof buf, "column %s numeric %.17g %.17g\n",
                    c.name.c_str(), c.min, c.max);
      out += buf;
    } else {
      out += "column " + c.name + " string\n";
    }
  }
  for (const auto& i : indexes) out += "index " + i.name + " " + i.column + "\n";
  return out;
}

SchemaCatalog SchemaCatalog::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open catalog file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void SchemaCatalog::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write catalog file " + path);
  out << to_text();
}

}  // namespace planest
