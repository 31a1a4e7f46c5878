#include "planest/strings.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "planest/binio.hpp"

namespace planest {

std::vector<float> hash_bitmap(std::string_view s, int len) {
  if (len < 1) throw data_error("hash bitmap length must be >= 1");
  std::vector<float> bits(len, 0.0f);
  for (unsigned char c : s) {
    // Single-byte FNV-1a, fixed for the life of the file formats.
    uint64_t h = (0xcbf29ce484222325ull ^ c) * 0x100000001b3ull;
    bits[h % static_cast<uint64_t>(len)] = 1.0f;
  }
  return bits;
}

// ---------------------------------------------------------------------------
// Tokens and rules
// ---------------------------------------------------------------------------

namespace {

using Kind = PatternToken::Kind;

// ASCII character classes; anything else only matches literally.
Kind char_class(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  if (u >= 'A' && u <= 'Z') return Kind::Upper;
  if (u >= 'a' && u <= 'z') return Kind::Lower;
  if (u >= '0' && u <= '9') return Kind::Digit;
  if (std::isspace(u)) return Kind::Space;
  return Kind::Literal;  // "other": no class token covers it
}

bool is_class_kind(Kind k) { return k != Kind::Literal; }

// End of the maximal same-class stretch starting at i.
size_t stretch_end(std::string_view v, size_t i) {
  Kind k = char_class(v[i]);
  if (k == Kind::Literal) return i + 1;
  size_t j = i + 1;
  while (j < v.size() && char_class(v[j]) == k) ++j;
  return j;
}

// Start of the maximal same-class stretch ending at i (inclusive).
size_t stretch_start(std::string_view v, size_t i) {
  Kind k = char_class(v[i]);
  if (k == Kind::Literal) return i;
  size_t j = i;
  while (j > 0 && char_class(v[j - 1]) == k) --j;
  return j;
}

}  // namespace

std::string to_string(const PatternToken& t) {
  switch (t.kind) {
    case Kind::Upper:
      return "P_C";
    case Kind::Lower:
      return "P_l";
    case Kind::Digit:
      return "P_n";
    case Kind::Space:
      return "P_s";
    case Kind::Literal: {
      std::string out = "P_t(";
      for (char c : t.literal) {
        if (c == '(' || c == ')' || c == '\\') out += '\\';
        out += c;
      }
      out += ')';
      return out;
    }
  }
  return {};
}

std::string pattern_to_string(const std::vector<PatternToken>& pattern) {
  std::string out;
  for (const auto& t : pattern) out += to_string(t);
  return out;
}

std::string to_string(const Rule& r) {
  std::string out = r.func == StrFunc::Prefix ? "Prefix" : "Suffix";
  out += '\t';
  out += pattern_to_string(r.pattern);
  out += '\t';
  out += std::to_string(r.length);
  return out;
}

Rule rule_from_string(std::string_view line) {
  auto t1 = line.find('\t');
  auto t2 = line.rfind('\t');
  if (t1 == std::string_view::npos || t2 == t1)
    throw parse_error("rule line needs three tab-separated fields");
  Rule r;
  std::string_view func = line.substr(0, t1);
  if (func == "Prefix")
    r.func = StrFunc::Prefix;
  else if (func == "Suffix")
    r.func = StrFunc::Suffix;
  else
    throw parse_error("unknown string function \"" + std::string(func) + "\"");

  std::string_view pat = line.substr(t1 + 1, t2 - t1 - 1);
  size_t i = 0;
  while (i < pat.size()) {
    if (pat.compare(i, 2, "P_") != 0 || i + 2 >= pat.size())
      throw parse_error("bad pattern token near \"" + std::string(pat) + "\"");
    char k = pat[i + 2];
    i += 3;
    PatternToken tok;
    switch (k) {
      case 'C':
        tok.kind = Kind::Upper;
        break;
      case 'l':
        tok.kind = Kind::Lower;
        break;
      case 'n':
        tok.kind = Kind::Digit;
        break;
      case 's':
        tok.kind = Kind::Space;
        break;
      case 't': {
        tok.kind = Kind::Literal;
        if (i >= pat.size() || pat[i] != '(')
          throw parse_error("P_t needs a parenthesized literal");
        ++i;
        bool closed = false;
        while (i < pat.size()) {
          char c = pat[i++];
          if (c == '\\' && i < pat.size()) {
            tok.literal += pat[i++];
          } else if (c == ')') {
            closed = true;
            break;
          } else {
            tok.literal += c;
          }
        }
        if (!closed) throw parse_error("unterminated P_t literal");
        if (tok.literal.empty()) throw parse_error("empty P_t literal");
        break;
      }
      default:
        throw parse_error(std::string("unknown pattern token P_") + k);
    }
    r.pattern.push_back(std::move(tok));
  }
  if (r.pattern.empty()) throw parse_error("rule has an empty pattern");

  std::string_view len = line.substr(t2 + 1);
  r.length = std::atoi(std::string(len).c_str());
  if (r.length < 1) throw parse_error("rule length must be >= 1");
  return r;
}

void save_rules(const std::vector<Rule>& rules, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write rules file " + path);
  for (const auto& r : rules) out << to_string(r) << "\n";
}

std::vector<Rule> load_rules(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open rules file " + path);
  std::vector<Rule> rules;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    rules.push_back(rule_from_string(line));
  }
  return rules;
}

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

namespace {

// Greedy match of the token sequence at position s; npos on failure.
size_t match_at(const std::vector<PatternToken>& pattern, std::string_view v,
                size_t s) {
  // Left-maximality of a leading class token.
  if (is_class_kind(pattern[0].kind) && s > 0 &&
      char_class(v[s - 1]) == pattern[0].kind)
    return std::string_view::npos;
  size_t pos = s;
  for (const auto& tok : pattern) {
    if (tok.kind == Kind::Literal) {
      if (v.compare(pos, tok.literal.size(), tok.literal) != 0)
        return std::string_view::npos;
      pos += tok.literal.size();
    } else {
      if (pos >= v.size() || char_class(v[pos]) != tok.kind)
        return std::string_view::npos;
      pos = stretch_end(v, pos);
    }
  }
  return pos;
}

}  // namespace

std::vector<std::pair<size_t, size_t>> find_matches(
    const std::vector<PatternToken>& pattern, std::string_view value) {
  std::vector<std::pair<size_t, size_t>> out;
  if (pattern.empty()) return out;
  for (size_t s = 0; s < value.size(); ++s) {
    size_t e = match_at(pattern, value, s);
    if (e != std::string_view::npos) out.emplace_back(s, e);
  }
  return out;
}

std::vector<std::string> apply_rule(const Rule& r, std::string_view value) {
  std::set<std::string> out;
  for (auto [s, e] : find_matches(r.pattern, value)) {
    size_t len = e - s;
    if (len < static_cast<size_t>(r.length)) continue;
    if (r.func == StrFunc::Prefix)
      out.insert(std::string(value.substr(s, r.length)));
    else
      out.insert(std::string(value.substr(e - r.length, r.length)));
  }
  return {out.begin(), out.end()};
}

// ---------------------------------------------------------------------------
// Candidate generation
// ---------------------------------------------------------------------------

namespace {

constexpr int kMaxPatternTokens = 8;
constexpr int kMaxContextWords = 2;
constexpr size_t kMaxRegionLen = 40;
constexpr size_t kMaxRulesPerPair = 200;

// Region end points for rightward extension: the query boundary, then one
// maximal run at a time, crossing at most kMaxContextWords space runs.
std::vector<size_t> right_extension_points(std::string_view v, size_t from) {
  std::vector<size_t> pts{from};
  size_t e = from;
  int spaces = 0;
  while (e < v.size()) {
    if (char_class(v[e]) == Kind::Space && ++spaces > kMaxContextWords) break;
    e = stretch_end(v, e);
    pts.push_back(e);
  }
  return pts;
}

std::vector<size_t> left_extension_points(std::string_view v, size_t from) {
  std::vector<size_t> pts{from};
  size_t s = from;
  int spaces = 0;
  while (s > 0) {
    if (char_class(v[s - 1]) == Kind::Space && ++spaces > kMaxContextWords)
      break;
    s = stretch_start(v, s - 1);
    pts.push_back(s);
  }
  return pts;
}

// All token segmentations of value[rs, re): class tokens cover maximal
// stretches, literals end on stretch boundaries (or the query boundary), and
// two literals never touch (the merged form is generated instead).
void enumerate_patterns(std::string_view v, size_t rs, size_t re,
                        size_t q_boundary,
                        std::vector<std::vector<PatternToken>>& out) {
  std::vector<size_t> ends;
  for (size_t b = rs; b < re;) {
    size_t e = std::min(stretch_end(v, b), re);
    ends.push_back(e);
    b = e;
  }
  if (q_boundary > rs && q_boundary < re) ends.push_back(q_boundary);
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());

  std::vector<PatternToken> acc;
  auto rec = [&](auto&& self, size_t a, bool last_literal) -> void {
    if (out.size() >= kMaxRulesPerPair) return;
    if (a == re) {
      if (!acc.empty()) out.push_back(acc);
      return;
    }
    if (acc.size() >= kMaxPatternTokens) return;
    Kind k = char_class(v[a]);
    if (is_class_kind(k)) {
      size_t end = stretch_end(v, a);
      bool left_ok = a != rs || rs == 0 || char_class(v[rs - 1]) != k;
      if (end <= re && left_ok) {
        acc.push_back({k, {}});
        self(self, end, false);
        acc.pop_back();
      }
    }
    if (!last_literal) {
      for (size_t end : ends) {
        if (end <= a) continue;
        acc.push_back({Kind::Literal, std::string(v.substr(a, end - a))});
        self(self, end, true);
        acc.pop_back();
      }
    }
  };
  rec(rec, rs, false);
}

}  // namespace

std::vector<Rule> generate_candidate_rules(std::string_view query,
                                           std::string_view matched_value,
                                           SearchKind kind) {
  if (query.empty()) throw data_error("query string is empty");
  std::vector<size_t> occurrences;
  switch (kind) {
    case SearchKind::PrefixSearch:
      if (matched_value.substr(0, query.size()) != query)
        throw data_error("value does not start with the query string");
      occurrences.push_back(0);
      break;
    case SearchKind::SuffixSearch:
      if (matched_value.size() < query.size() ||
          matched_value.substr(matched_value.size() - query.size()) != query)
        throw data_error("value does not end with the query string");
      occurrences.push_back(matched_value.size() - query.size());
      break;
    case SearchKind::SubstringSearch: {
      for (size_t p = matched_value.find(query); p != std::string_view::npos;
           p = matched_value.find(query, p + 1))
        occurrences.push_back(p);
      if (occurrences.empty())
        throw data_error("query string not found in the value");
      break;
    }
  }

  std::set<std::string> seen;
  std::vector<Rule> rules;
  auto add = [&](StrFunc func, std::vector<PatternToken> pattern) {
    Rule r{func, std::move(pattern), static_cast<int>(query.size())};
    if (seen.insert(to_string(r)).second) rules.push_back(std::move(r));
  };

  for (size_t p : occurrences) {
    size_t qe = p + query.size();
    if (kind != SearchKind::SuffixSearch) {
      for (size_t e : right_extension_points(matched_value, qe)) {
        if (e - p > kMaxRegionLen) break;
        std::vector<std::vector<PatternToken>> pats;
        enumerate_patterns(matched_value, p, e, qe, pats);
        for (auto& pat : pats) add(StrFunc::Prefix, std::move(pat));
      }
    }
    if (kind != SearchKind::PrefixSearch) {
      for (size_t s : left_extension_points(matched_value, p)) {
        if (qe - s > kMaxRegionLen) break;
        std::vector<std::vector<PatternToken>> pats;
        enumerate_patterns(matched_value, s, qe, p, pats);
        for (auto& pat : pats) add(StrFunc::Suffix, std::move(pat));
      }
    }
  }
  return rules;
}

// ---------------------------------------------------------------------------
// Rule selection
// ---------------------------------------------------------------------------

namespace {

struct Candidate {
  Rule rule;
  std::string key;                  // to_string, for deterministic ordering
  std::set<std::string> extracted;  // S_r over the corpus
  size_t covered = 0;               // |S_r intersect S_W|
};

}  // namespace

std::vector<Rule> select_rules(std::vector<Rule> candidate_rules,
                               const std::vector<std::string>& workload,
                               const std::vector<std::string>& corpus,
                               size_t budget) {
  std::set<std::string> want(workload.begin(), workload.end());

  // Rules sharing a pattern share their match scan over the corpus.
  std::map<std::string, std::vector<size_t>> by_pattern;
  std::vector<Candidate> cands(candidate_rules.size());
  for (size_t i = 0; i < candidate_rules.size(); ++i) {
    cands[i].rule = std::move(candidate_rules[i]);
    cands[i].key = to_string(cands[i].rule);
    by_pattern[pattern_to_string(cands[i].rule.pattern)].push_back(i);
  }
  for (auto& [pat, ids] : by_pattern) {
    const auto& pattern = cands[ids[0]].rule.pattern;
    for (const auto& value : corpus) {
      auto matches = find_matches(pattern, value);
      if (matches.empty()) continue;
      for (size_t id : ids) {
        Candidate& c = cands[id];
        size_t L = static_cast<size_t>(c.rule.length);
        for (auto [s, e] : matches) {
          if (e - s < L) continue;
          c.extracted.insert(std::string(
              c.rule.func == StrFunc::Prefix
                  ? value.substr(s, L)
                  : value.substr(e - L, L)));
        }
      }
    }
  }
  for (auto& c : cands)
    for (const auto& s : c.extracted) c.covered += want.count(s);

  // Coverage-first order: most workload strings first, then fewest extracted
  // substrings (budget pressure), then the textual form for determinism.
  std::sort(cands.begin(), cands.end(), [](const Candidate& a,
                                           const Candidate& b) {
    if (a.covered != b.covered) return a.covered > b.covered;
    if (a.extracted.size() != b.extracted.size())
      return a.extracted.size() < b.extracted.size();
    return a.key < b.key;
  });

  std::vector<const Candidate*> chosen;
  std::set<std::string> extracted_union;
  auto covered_all = [&] {
    for (const auto& w : want)
      if (!extracted_union.count(w)) return false;
    return true;
  };
  auto rebuild_union = [&] {
    extracted_union.clear();
    for (const auto* c : chosen)
      extracted_union.insert(c->extracted.begin(), c->extracted.end());
  };

  size_t next = 0;
  while (!covered_all() && next < cands.size()) {
    const Candidate* c = &cands[next++];
    // A rule whose useful extractions are all covered already cannot help;
    // adding it would only burn budget.
    bool adds = false;
    for (const auto& s : c->extracted)
      if (want.count(s) && !extracted_union.count(s)) {
        adds = true;
        break;
      }
    if (!adds) continue;
    chosen.push_back(c);
    extracted_union.insert(c->extracted.begin(), c->extracted.end());
    if (extracted_union.size() >= budget) {
      // Evict the least precise rule: smallest useful fraction, then the
      // larger extraction set, then textual order.
      auto worst = std::min_element(
          chosen.begin(), chosen.end(), [](const Candidate* a,
                                           const Candidate* b) {
            double pa = a->extracted.empty()
                            ? 0.0
                            : double(a->covered) / double(a->extracted.size());
            double pb = b->extracted.empty()
                            ? 0.0
                            : double(b->covered) / double(b->extracted.size());
            if (pa != pb) return pa < pb;
            if (a->extracted.size() != b->extracted.size())
              return a->extracted.size() > b->extracted.size();
            return a->key > b->key;
          });
      chosen.erase(worst);
      rebuild_union();
    }
  }

  std::vector<std::string> uncovered;
  for (const auto& w : want)
    if (!extracted_union.count(w)) uncovered.push_back(w);
  if (!uncovered.empty()) {
    std::string msg =
        "workload not coverable within budget " + std::to_string(budget) +
        "; uncovered:";
    for (const auto& s : uncovered) msg += " \"" + s + "\"";
    throw data_error(msg);
  }
  if (extracted_union.size() >= budget)
    throw data_error("rule selection exceeds substring budget " +
                     std::to_string(budget) + " (would extract " +
                     std::to_string(extracted_union.size()) + ")");

  std::vector<Rule> out;
  out.reserve(chosen.size());
  for (const auto* c : chosen) out.push_back(c->rule);
  return out;
}

// ---------------------------------------------------------------------------
// Dictionary
// ---------------------------------------------------------------------------

int SubstringDictionary::find(std::string_view key) const {
  auto it = std::lower_bound(
      entries.begin(), entries.end(), key,
      [](const Entry& e, std::string_view k) { return e.key < k; });
  if (it == entries.end() || it->key != key) return -1;
  return static_cast<int>(it - entries.begin());
}

SubstringDictionary build_dictionary(const std::vector<Rule>& rules,
                                     const std::vector<std::string>& corpus,
                                     int dim, size_t budget) {
  std::map<std::string, std::pair<bool, bool>> keys;  // key -> provenance
  for (const auto& r : rules) {
    for (const auto& value : corpus) {
      for (const auto& s : apply_rule(r, value)) {
        auto& flags = keys[s];
        if (r.func == StrFunc::Prefix)
          flags.first = true;
        else
          flags.second = true;
      }
    }
  }
  if (keys.size() >= budget && budget > 0)
    throw data_error("dictionary of " + std::to_string(keys.size()) +
                     " entries exceeds budget " + std::to_string(budget));
  SubstringDictionary dict;
  dict.dim = dim;
  for (auto& [key, flags] : keys)
    dict.entries.push_back({key, flags.first, flags.second, {}});
  return dict;
}

namespace {
constexpr char kDictMagic[8] = {'P', 'L', 'N', 'D', 'C', 'T', '0', '1'};
}

void SubstringDictionary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write dictionary " + path);
  out.write(kDictMagic, 8);
  binio::put_u32(out, 1);  // version
  binio::put_u32(out, static_cast<uint32_t>(dim));
  binio::put_u64(out, entries.size());
  for (const auto& e : entries) {
    binio::put_str(out, e.key);
    out.put(static_cast<char>((e.from_prefix ? 1 : 0) |
                              (e.from_suffix ? 2 : 0)));
    binio::put_u32(out, static_cast<uint32_t>(e.vec.size()));
    out.write(reinterpret_cast<const char*>(e.vec.data()),
              static_cast<std::streamsize>(e.vec.size() * sizeof(float)));
  }
}

SubstringDictionary SubstringDictionary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open dictionary " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kDictMagic, 8) != 0)
    throw data_error("bad dictionary magic");
  if (binio::get_u32(in) != 1) throw data_error("bad dictionary version");
  SubstringDictionary dict;
  dict.dim = static_cast<int>(binio::get_u32(in));
  uint64_t n = binio::get_u64(in);
  for (uint64_t i = 0; i < n; ++i) {
    Entry e;
    e.key = binio::get_str(in);
    int flags = in.get();
    if (flags == EOF) throw data_error("truncated dictionary");
    e.from_prefix = flags & 1;
    e.from_suffix = flags & 2;
    uint32_t len = binio::get_u32(in);
    e.vec.resize(len);
    in.read(reinterpret_cast<char*>(e.vec.data()),
            static_cast<std::streamsize>(len * sizeof(float)));
    if (!in) throw data_error("truncated dictionary");
    dict.entries.push_back(std::move(e));
  }
  return dict;
}

}  // namespace planest
