#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "planest/nn.hpp"
#include "planest/strings.hpp"
#include "support/oracles.hpp"

using namespace planest;
namespace ts = planest::testsupport;

TEST_SUITE_BEGIN("strings");

namespace {

Rule parse_rule(const std::string& text) { return rule_from_string(text); }

bool contains_rule(const std::vector<Rule>& rules, const std::string& text) {
  Rule want = parse_rule(text);
  return std::find(rules.begin(), rules.end(), want) != rules.end();
}

std::string random_word(std::mt19937_64& rng, int max_len = 10) {
  static const char* alphabet = "abcXYZ012 -(";
  int len = 1 + static_cast<int>(unit_uniform(rng) * max_len);
  std::string s;
  for (int i = 0; i < len; ++i)
    s += alphabet[static_cast<size_t>(unit_uniform(rng) * 12)];
  return s;
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("hash bitmap reflects the character set only") {
  CHECK(hash_bitmap("", 32) == std::vector<float>(32, 0.0f));
  CHECK(hash_bitmap("ab", 32) == hash_bitmap("ba", 32));
  CHECK(hash_bitmap("ab", 32) == hash_bitmap("aab", 32));
  CHECK(hash_bitmap("ab", 32) != hash_bitmap("ac", 32));
  CHECK_THROWS_AS(hash_bitmap("x", 0), data_error);
}

TEST_CASE("hash bitmap is monotone under character-set inclusion") {
  std::mt19937_64 rng(15);
  for (int i = 0; i < 300; ++i) {
    std::string s2 = random_word(rng);
    // s1: random subsequence of s2, so chars(s1) is a subset of chars(s2).
    std::string s1;
    for (char c : s2)
      if (unit_uniform(rng) < 0.5) s1 += c;
    auto b1 = hash_bitmap(s1, 16), b2 = hash_bitmap(s2, 16);
    for (size_t k = 0; k < b1.size(); ++k)
      CHECK(std::min(b1[k], b2[k]) == b1[k]);
  }
}

TEST_CASE("rule text form round trips") {
  for (const char* text :
       {"Prefix\tP_t(Din)\t3", "Suffix\tP_t(\\()P_nP_t(-)P_n\t2",
        "Prefix\tP_CP_lP_sP_l\t5"}) {
    Rule r = parse_rule(text);
    CHECK(to_string(r) == text);
  }
  CHECK_THROWS_AS(parse_rule("Wat\tP_n\t2"), parse_error);
  CHECK_THROWS_AS(parse_rule("Prefix\tP_x\t2"), parse_error);
  CHECK_THROWS_AS(parse_rule("Prefix\tP_n\t0"), parse_error);
}

TEST_CASE("class tokens match maximal runs") {
  Rule digits = parse_rule("Prefix\tP_n\t2");
  auto matches = find_matches(digits.pattern, "(2002-06-29)");
  REQUIRE(matches.size() == 3);
  CHECK(matches[0] == std::pair<size_t, size_t>{1, 5});
  CHECK(matches[1] == std::pair<size_t, size_t>{6, 8});
  CHECK(matches[2] == std::pair<size_t, size_t>{9, 11});
}

TEST_CASE("rule application extracts fixed-length prefixes and suffixes") {
  CHECK(apply_rule(parse_rule("Prefix\tP_t(Din)\t3"), "Dinos in Kas") ==
        std::vector<std::string>{"Din"});
  CHECK(apply_rule(parse_rule("Prefix\tP_n\t2"), "(2002-06-29)") ==
        std::vector<std::string>{"06", "20", "29"});
  // Matches shorter than the extraction length are dropped.
  CHECK(apply_rule(parse_rule("Prefix\tP_n\t5"), "(2002-06-29)").empty());
  CHECK(apply_rule(parse_rule("Suffix\tP_nP_t(-)P_n\t2"), "(2002-06-29)") ==
        std::vector<std::string>{"06", "29"});
}

TEST_CASE("prefix search candidates include literal and generalized rules") {
  auto rules = generate_candidate_rules("Din", "Dinos in Kas",
                                        SearchKind::PrefixSearch);
  CHECK(contains_rule(rules, "Prefix\tP_t(Din)\t3"));
  CHECK(contains_rule(rules, "Prefix\tP_CP_t(in)\t3"));
  CHECK(contains_rule(rules, "Prefix\tP_CP_l\t3"));
  CHECK(contains_rule(rules, "Prefix\tP_t(D)P_l\t3"));
  CHECK(contains_rule(rules, "Prefix\tP_CP_lP_sP_l\t3"));
  for (const auto& r : rules) CHECK(r.func == StrFunc::Prefix);
}

TEST_CASE("substring search candidates cover both directions") {
  auto rules = generate_candidate_rules("06", "(2002-06-29)",
                                        SearchKind::SubstringSearch);
  CHECK(contains_rule(rules, "Prefix\tP_nP_t(-)P_n\t2"));
  CHECK(contains_rule(rules, "Suffix\tP_nP_t(-)P_n\t2"));
  CHECK(contains_rule(rules, "Prefix\tP_t(06)\t2"));
  CHECK(contains_rule(rules, "Suffix\tP_t(\\()P_nP_t(-)P_n\t2"));
  CHECK(contains_rule(rules, "Prefix\tP_n\t2"));
}

TEST_CASE("a whole-value query always admits the exact literal rule") {
  auto rules = generate_candidate_rules("(2002-06-29)", "(2002-06-29)",
                                        SearchKind::SubstringSearch);
  CHECK(contains_rule(rules, "Prefix\tP_t(\\(2002-06-29\\))\t12"));
}

TEST_CASE("candidate rules are sound: each one extracts the query") {
  std::mt19937_64 rng(33);
  int rounds = 0;
  while (rounds < 60) {
    std::string value = random_word(rng, 14);
    if (value.size() < 3) continue;
    size_t start = static_cast<size_t>(unit_uniform(rng) *
                                       (value.size() - 2));
    size_t len = 1 + static_cast<size_t>(
                         unit_uniform(rng) * (value.size() - start - 1));
    std::string query = value.substr(start, len);
    auto rules = generate_candidate_rules(query, value,
                                          SearchKind::SubstringSearch);
    REQUIRE(!rules.empty());
    for (const auto& r : rules) {
      auto extracted = apply_rule(r, value);
      INFO("rule " << to_string(r) << " on \"" << value << "\" for \""
                   << query << "\"");
      CHECK(std::find(extracted.begin(), extracted.end(), query) !=
            extracted.end());
    }
    ++rounds;
  }
}

TEST_CASE("candidate generation rejects inconsistent inputs") {
  CHECK_THROWS_AS(
      generate_candidate_rules("xyz", "Dinos", SearchKind::SubstringSearch),
      data_error);
  CHECK_THROWS_AS(
      generate_candidate_rules("nos", "Dinos", SearchKind::PrefixSearch),
      data_error);
}

TEST_CASE("the general low-yield rule wins on the date fixture") {
  // Three candidates over two date strings; the workload needs {06, 08}.
  // The narrow literal covers one string, the bare digit rule floods the
  // budget, and the anchored date rule extracts exactly the two wanted
  // substrings. Selection must return the anchored rule alone.
  std::vector<std::string> corpus{"(2002-06-29)", "(2014-08-26)"};
  std::vector<std::string> workload{"06", "08"};
  std::vector<Rule> candidates{
      parse_rule("Prefix\tP_t(06)\t2"),
      parse_rule("Prefix\tP_n\t2"),
      parse_rule("Suffix\tP_t(\\()P_nP_t(-)P_n\t2"),
  };
  auto chosen = select_rules(candidates, workload, corpus, 3);
  REQUIRE(chosen.size() == 1);
  CHECK(to_string(chosen[0]) == "Suffix\tP_t(\\()P_nP_t(-)P_n\t2");
}

TEST_CASE("a single covering rule is selected under a loose budget") {
  std::vector<std::string> corpus{"Dinos in Kas", "Dinar"};
  std::vector<std::string> workload{"Din"};
  auto chosen = select_rules({parse_rule("Prefix\tP_t(Din)\t3")}, workload,
                             corpus, 1000);
  CHECK(chosen.size() == 1);
}

TEST_CASE("selection errors list what cannot be covered") {
  std::vector<std::string> corpus{"abc"};
  std::vector<std::string> workload{"abc", "zzz"};
  try {
    select_rules({parse_rule("Prefix\tP_t(abc)\t3")}, workload, corpus, 100);
    FAIL("expected an error");
  } catch (const data_error& e) {
    CHECK(std::string(e.what()).find("zzz") != std::string::npos);
  }
}

TEST_CASE("greedy selection covers whenever the exhaustive oracle can") {
  std::mt19937_64 rng(44);
  int feasible_seen = 0;
  int attempts = 0;
  while (feasible_seen < 30 && attempts < 4000) {
    ++attempts;
    // Random instance: a small corpus of random words, workload strings drawn
    // from them, candidates mined from the pairs.
    std::vector<std::string> corpus;
    for (int i = 0; i < 4; ++i) corpus.push_back(random_word(rng, 10));
    std::set<std::string> workload_set;
    for (int i = 0; i < 3; ++i) {
      const std::string& v = corpus[static_cast<size_t>(
          unit_uniform(rng) * corpus.size())];
      if (v.size() < 2) continue;
      size_t len = 1 + static_cast<size_t>(unit_uniform(rng) *
                                           std::min<size_t>(3, v.size() - 1));
      size_t at = static_cast<size_t>(unit_uniform(rng) *
                                      (v.size() - len + 1));
      workload_set.insert(v.substr(at, len));
    }
    if (workload_set.empty()) continue;
    std::vector<std::string> workload(workload_set.begin(),
                                      workload_set.end());

    std::vector<Rule> candidates;
    std::set<std::string> seen;
    for (const auto& w : workload)
      for (const auto& v : corpus) {
        if (v.find(w) == std::string::npos) continue;
        for (auto& r :
             generate_candidate_rules(w, v, SearchKind::SubstringSearch))
          if (seen.insert(to_string(r)).second && candidates.size() < 6)
            candidates.push_back(r);
      }
    if (candidates.empty() || candidates.size() > 6) continue;

    std::vector<std::set<std::string>> extracted;
    for (const auto& r : candidates) {
      std::set<std::string> s;
      for (const auto& v : corpus) {
        auto got = apply_rule(r, v);
        s.insert(got.begin(), got.end());
      }
      extracted.push_back(std::move(s));
    }
    size_t budget = 2 + static_cast<size_t>(unit_uniform(rng) * 24);
    bool feasible = ts::exhaustive_cover_exists(
        extracted, {workload.begin(), workload.end()}, budget);
    if (!feasible) continue;
    ++feasible_seen;

    auto chosen = select_rules(candidates, workload, corpus, budget);
    std::set<std::string> covered;
    for (const auto& r : chosen)
      for (const auto& v : corpus) {
        auto got = apply_rule(r, v);
        covered.insert(got.begin(), got.end());
      }
    CHECK(covered.size() < budget);
    for (const auto& w : workload) CHECK(covered.count(w) == 1);
  }
  CHECK(feasible_seen == 30);
}

TEST_CASE("dictionaries are rule-application unions") {
  std::vector<std::string> corpus{"(2002-06-29)", "(2014-08-26)"};
  std::vector<Rule> rules{parse_rule("Prefix\tP_n\t2"),
                          parse_rule("Suffix\tP_t(\\()P_nP_t(-)P_n\t2")};
  auto dict = build_dictionary(rules, corpus, 8, 100);
  std::set<std::string> keys;
  for (const auto& e : dict.entries) keys.insert(e.key);
  CHECK(keys == std::set<std::string>{"20", "06", "29", "08", "26"});
  // 06 and 08 were extracted by both rule kinds.
  CHECK(dict.entries[dict.find("06")].from_prefix);
  CHECK(dict.entries[dict.find("06")].from_suffix);
  CHECK(dict.entries[dict.find("20")].from_prefix);
  CHECK_FALSE(dict.entries[dict.find("20")].from_suffix);

  CHECK(build_dictionary({}, corpus, 8, 100).entries.empty());
  CHECK_THROWS_AS(build_dictionary(rules, corpus, 8, 5), data_error);
}

TEST_CASE("dictionary files round trip") {
  std::vector<std::string> corpus{"(2002-06-29)"};
  auto dict = build_dictionary({parse_rule("Prefix\tP_n\t2")}, corpus, 4, 50);
  train_skipgram({{"20", "06"}}, dict, {.epochs = 1, .seed = 5});
  auto path = std::filesystem::temp_directory_path() / "planest_dict_test.bin";
  dict.save(path.string());
  auto back = SubstringDictionary::load(path.string());
  std::filesystem::remove(path);
  REQUIRE(back.entries.size() == dict.entries.size());
  CHECK(back.dim == dict.dim);
  for (size_t i = 0; i < dict.entries.size(); ++i) {
    CHECK(back.entries[i].key == dict.entries[i].key);
    CHECK(back.entries[i].vec == dict.entries[i].vec);
    CHECK(back.entries[i].from_prefix == dict.entries[i].from_prefix);
  }
}

TEST_CASE("skip-gram pulls co-occurring tokens together") {
  // A and B always share a sentence; C never appears with them.
  SubstringDictionary dict;
  dict.dim = 16;
  dict.entries = {{"aa", true, false, {}},
                  {"bb", true, false, {}},
                  {"cc", true, false, {}}};
  std::vector<std::vector<std::string>> sentences;
  for (int i = 0; i < 200; ++i) {
    sentences.push_back({"aa", "bb"});
    sentences.push_back({"cc", "row" + std::to_string(i)});
  }
  train_skipgram(sentences, dict, {.epochs = 10, .seed = 3});
  const auto& va = dict.entries[dict.find("aa")].vec;
  const auto& vb = dict.entries[dict.find("bb")].vec;
  const auto& vc = dict.entries[dict.find("cc")].vec;
  CHECK(cosine(va, vb) > cosine(va, vc));
  CHECK(cosine(va, vb) > 0.3);
}

TEST_CASE("zero skip-gram epochs leave the seeded initialization") {
  SubstringDictionary a, b;
  a.dim = b.dim = 8;
  a.entries = {{"xx", true, false, {}}, {"yy", true, false, {}}};
  b.entries = a.entries;
  train_skipgram({{"xx", "yy"}}, a, {.epochs = 0, .seed = 9});
  train_skipgram({{"xx", "yy"}, {"yy", "xx"}}, b, {.epochs = 0, .seed = 9});
  REQUIRE(a.entries[0].vec.size() == 8);
  // Initialization depends only on the seed and vocabulary order.
  CHECK(a.entries[0].vec == b.entries[0].vec);
  CHECK(a.entries[1].vec == b.entries[1].vec);
  for (float v : a.entries[0].vec) CHECK(std::isfinite(v));
}

TEST_CASE("tries resolve longest matches like a linear scan") {
  std::mt19937_64 rng(71);
  SubstringDictionary dict;
  dict.dim = 4;
  std::set<std::string> keys;
  while (keys.size() < 1000) keys.insert(random_word(rng, 8));
  for (const auto& k : keys) {
    bool p = unit_uniform(rng) < 0.7;
    bool s = !p || unit_uniform(rng) < 0.4;
    dict.entries.push_back({k, p, s, {0, 0, 0, 0}});
  }
  TriePair tries = build_tries(dict);

  size_t want_prefix = 0, want_suffix = 0;
  for (const auto& e : dict.entries) {
    want_prefix += e.from_prefix;
    want_suffix += e.from_suffix;
  }
  CHECK(tries.prefix_trie.terminal_count() == want_prefix);
  CHECK(tries.suffix_trie.terminal_count() == want_suffix);
  for (const auto& e : dict.entries) {
    if (e.from_prefix) CHECK(tries.prefix_trie.contains(e.key));
    if (e.from_suffix) {
      std::string rev(e.key.rbegin(), e.key.rend());
      CHECK(tries.suffix_trie.contains(rev));
    }
  }

  for (int i = 0; i < 10000; ++i) {
    std::string q = random_word(rng, 10);
    auto hit_p = lookup(q, LookupMode::Prefix, tries);
    int oracle_p = ts::scan_longest(dict, q, true);
    CHECK(hit_p.entry == oracle_p);
    auto hit_s = lookup(q, LookupMode::Suffix, tries);
    int oracle_s = ts::scan_longest(dict, q, false);
    CHECK(hit_s.entry == oracle_s);
  }
}

TEST_CASE("lookup falls back on a total miss and prefers prefixes on ties") {
  SubstringDictionary dict;
  dict.dim = 2;
  dict.entries = {{"Din", true, false, {1, 0}}, {"nos", false, true, {0, 1}}};
  TriePair tries = build_tries(dict);

  auto hit = lookup("Dino", LookupMode::Prefix, tries);
  CHECK(hit.entry == dict.find("Din"));
  CHECK(hit.matched_len == 3);
  CHECK_FALSE(hit.fallback);

  auto exact = lookup("Din", LookupMode::Exact, tries);
  CHECK(exact.entry == dict.find("Din"));

  // "Dinos": prefix side matches "Din" (3), suffix side "nos" (3): tie goes
  // to the prefix side.
  auto tie = lookup("Dinos", LookupMode::Contains, tries);
  CHECK(tie.entry == dict.find("Din"));

  auto miss = lookup("zzz", LookupMode::Contains, tries);
  CHECK(miss.fallback);
  CHECK(miss.entry == -1);
}

TEST_SUITE_END();
