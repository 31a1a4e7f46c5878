#include <algorithm>

#include "planest/strings.hpp"

namespace planest {

int32_t Trie::child(int32_t node, char c) const {
  const auto& next = nodes_[node].next;
  auto it = std::lower_bound(
      next.begin(), next.end(), c,
      [](const std::pair<char, int32_t>& e, char k) { return e.first < k; });
  if (it == next.end() || it->first != c) return -1;
  return it->second;
}

void Trie::insert(std::string_view key, int32_t entry) {
  int32_t node = 0;
  for (char c : key) {
    int32_t nx = child(node, c);
    if (nx < 0) {
      nx = static_cast<int32_t>(nodes_.size());
      auto& next = nodes_[node].next;
      next.insert(std::upper_bound(next.begin(), next.end(), c,
                                   [](char k, const std::pair<char, int32_t>&
                                          e) { return k < e.first; }),
                  {c, nx});
      nodes_.emplace_back();
    }
    node = nx;
  }
  nodes_[node].entry = entry;
}

int32_t Trie::longest_match(std::string_view q, int* match_len) const {
  int32_t node = 0, best = nodes_[0].entry;
  int best_len = 0;
  for (size_t i = 0; i < q.size(); ++i) {
    node = child(node, q[i]);
    if (node < 0) break;
    if (nodes_[node].entry >= 0) {
      best = nodes_[node].entry;
      best_len = static_cast<int>(i) + 1;
    }
  }
  if (match_len) *match_len = best_len;
  return best;
}

bool Trie::contains(std::string_view key) const {
  int32_t node = 0;
  for (char c : key) {
    node = child(node, c);
    if (node < 0) return false;
  }
  return nodes_[node].entry >= 0;
}

size_t Trie::terminal_count() const {
  size_t n = 0;
  for (const auto& node : nodes_) n += node.entry >= 0;
  return n;
}

TriePair build_tries(const SubstringDictionary& dict) {
  TriePair tries;
  for (size_t i = 0; i < dict.entries.size(); ++i) {
    const auto& e = dict.entries[i];
    if (e.from_prefix)
      tries.prefix_trie.insert(e.key, static_cast<int32_t>(i));
    if (e.from_suffix) {
      std::string rev(e.key.rbegin(), e.key.rend());
      tries.suffix_trie.insert(rev, static_cast<int32_t>(i));
    }
  }
  return tries;
}

LookupResult lookup(std::string_view q, LookupMode mode,
                    const TriePair& tries) {
  auto prefix_side = [&] {
    LookupResult r;
    r.entry = tries.prefix_trie.longest_match(q, &r.matched_len);
    return r;
  };
  auto suffix_side = [&] {
    std::string rev(q.rbegin(), q.rend());
    LookupResult r;
    r.entry = tries.suffix_trie.longest_match(rev, &r.matched_len);
    return r;
  };

  LookupResult best;
  switch (mode) {
    case LookupMode::Prefix:
      best = prefix_side();
      break;
    case LookupMode::Suffix:
      best = suffix_side();
      break;
    case LookupMode::Contains:
    case LookupMode::Exact: {
      LookupResult p = prefix_side(), s = suffix_side();
      // Longer match wins; the prefix side wins ties.
      best = (s.entry >= 0 && s.matched_len > p.matched_len) ? s : p;
      if (p.entry < 0 && s.entry >= 0) best = s;
      break;
    }
  }
  if (best.entry < 0) {
    best.matched_len = 0;
    best.fallback = true;
  }
  return best;
}

}  // namespace planest
