#pragma once

#include <list>
#include <optional>
#include <unordered_map>

#include "planest/model.hpp"
#include "planest/plan.hpp"

namespace planest {

// LRU cache from canonical sub-plan digests to representation states and the
// estimates derived from them. A hit returns exactly what recomputation
// would produce; the digest ignores labels, so reload the pool (it is cheap)
// whenever the checkpoint or dataset changes.
class MemoryPool {
 public:
  struct Entry {
    RepState state;
    double cost = 0, card = 0;
    bool has_estimates = false;
  };

  explicit MemoryPool(size_t capacity) : capacity_(capacity) {}

  std::optional<Entry> get(const PlanDigest& digest) {
    auto it = index_.find(digest);
    if (it == index_.end()) {
      ++misses_;
      return std::nullopt;
    }
    ++hits_;
    lru_.splice(lru_.begin(), lru_, it->second);
    return it->second->second;
  }

  void put(const PlanDigest& digest, Entry entry) {
    auto it = index_.find(digest);
    if (it != index_.end()) {
      it->second->second = std::move(entry);
      lru_.splice(lru_.begin(), lru_, it->second);
      return;
    }
    if (capacity_ == 0) return;
    if (lru_.size() >= capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    lru_.emplace_front(digest, std::move(entry));
    index_[digest] = lru_.begin();
  }

  size_t size() const { return lru_.size(); }
  size_t capacity() const { return capacity_; }
  uint64_t hits() const { return hits_; }
  uint64_t misses() const { return misses_; }

 private:
  size_t capacity_;
  std::list<std::pair<PlanDigest, Entry>> lru_;
  std::unordered_map<PlanDigest, decltype(lru_)::iterator, PlanDigestHash>
      index_;
  uint64_t hits_ = 0, misses_ = 0;
};

}  // namespace planest
