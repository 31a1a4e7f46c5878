#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "planest/errors.hpp"

namespace planest {

// Character-level hashed signature: bit (hash(c) mod len) is set for every
// character of s. Order- and multiplicity-free by construction.
std::vector<float> hash_bitmap(std::string_view s, int len);

// ---------------------------------------------------------------------------
// Extraction rules
// ---------------------------------------------------------------------------

struct PatternToken {
  enum class Kind : uint8_t { Upper, Lower, Digit, Space, Literal };
  Kind kind = Kind::Literal;
  std::string literal;  // Literal only

  friend bool operator==(const PatternToken&, const PatternToken&) = default;
};

enum class StrFunc : uint8_t { Prefix, Suffix };

// <string function, pattern, extraction length>. Class tokens match maximal
// character runs (greedy); Literal matches its text exactly.
struct Rule {
  StrFunc func = StrFunc::Prefix;
  std::vector<PatternToken> pattern;
  int length = 1;

  friend bool operator==(const Rule&, const Rule&) = default;
};

std::string to_string(const PatternToken& t);
std::string pattern_to_string(const std::vector<PatternToken>& pattern);
std::string to_string(const Rule& r);
Rule rule_from_string(std::string_view line);  // throws parse_error

// One rule per line in the text form produced by to_string.
void save_rules(const std::vector<Rule>& rules, const std::string& path);
std::vector<Rule> load_rules(const std::string& path);

// Match regions of the pattern inside value, greedy left-to-right. A match
// starting with a class token must be left-maximal (the preceding character,
// if any, is outside the class).
std::vector<std::pair<size_t, size_t>> find_matches(
    const std::vector<PatternToken>& pattern, std::string_view value);

// First (Prefix) or last (Suffix) `length` characters of every match region,
// deduplicated and sorted; regions shorter than `length` are dropped.
std::vector<std::string> apply_rule(const Rule& r, std::string_view value);

enum class SearchKind : uint8_t { PrefixSearch, SuffixSearch, SubstringSearch };

// All rules (bounded enumeration, see docs) that extract `query` from
// `matched_value`. Throws data_error when the query does not occur in the
// value consistently with the search kind.
std::vector<Rule> generate_candidate_rules(std::string_view query,
                                           std::string_view matched_value,
                                           SearchKind kind);

// Greedy coverage-first selection under a substring budget. Returns the
// chosen rules; throws data_error (listing uncovered strings) when the
// workload cannot be covered within the budget.
std::vector<Rule> select_rules(std::vector<Rule> candidates,
                               const std::vector<std::string>& workload,
                               const std::vector<std::string>& corpus,
                               size_t budget);

// ---------------------------------------------------------------------------
// Substring dictionary
// ---------------------------------------------------------------------------

struct SubstringDictionary {
  struct Entry {
    std::string key;
    bool from_prefix = false;  // provenance: some Prefix rule extracted it
    bool from_suffix = false;
    std::vector<float> vec;    // set by train_skipgram
  };
  int dim = 0;
  std::vector<Entry> entries;  // sorted by key

  int find(std::string_view key) const;  // -1 when absent

  void save(const std::string& path) const;
  static SubstringDictionary load(const std::string& path);
};

// Union of rule applications over the corpus; vectors are left unset.
SubstringDictionary build_dictionary(const std::vector<Rule>& rules,
                                     const std::vector<std::string>& corpus,
                                     int dim, size_t budget);

// ---------------------------------------------------------------------------
// Skip-gram embedding
// ---------------------------------------------------------------------------

struct SkipGramConfig {
  int epochs = 5;
  int negatives = 5;
  double lr = 0.025;  // linearly decayed
  uint64_t seed = 42;
};

// Trains dict.dim-sized vectors with skip-gram + negative sampling. One
// sentence per input row; the window spans the whole sentence. Deterministic
// under the seed; zero epochs leaves the seeded initialization in place.
void train_skipgram(const std::vector<std::vector<std::string>>& sentences,
                    SubstringDictionary& dict, const SkipGramConfig& cfg);

// ---------------------------------------------------------------------------
// Trie index
// ---------------------------------------------------------------------------

class Trie {
 public:
  Trie() : nodes_(1) {}
  void insert(std::string_view key, int32_t entry);
  // Deepest terminal on the path spelled by q; returns entry id or -1.
  int32_t longest_match(std::string_view q, int* match_len = nullptr) const;
  bool contains(std::string_view key) const;
  size_t terminal_count() const;

 private:
  struct Node {
    std::vector<std::pair<char, int32_t>> next;  // sorted by char
    int32_t entry = -1;
  };
  std::vector<Node> nodes_;
  int32_t child(int32_t node, char c) const;
};

struct TriePair {
  Trie prefix_trie;  // prefix-provenance keys, stored forward
  Trie suffix_trie;  // suffix-provenance keys, stored reversed
};

TriePair build_tries(const SubstringDictionary& dict);

enum class LookupMode : uint8_t { Prefix, Suffix, Contains, Exact };

struct LookupResult {
  int entry = -1;       // dictionary entry id, -1 on miss
  int matched_len = 0;  // characters of q covered by the match
  bool fallback = false;  // no match anywhere: caller may hash-encode instead
};

// Longest-prefix / longest-suffix resolution per mode; Contains and Exact
// take the longer of the two candidates, ties won by the prefix side.
LookupResult lookup(std::string_view q, LookupMode mode, const TriePair& tries);

}  // namespace planest
