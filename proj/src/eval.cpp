#include "planest/eval.hpp"

namespace planest {

bool like_match(std::string_view value, std::string_view pattern) {
  // Split on '%': the first piece anchors at the front, the last at the back,
  // the middle pieces match greedily left to right.
  size_t vpos = 0;
  bool first = true;
  size_t i = 0;
  while (i <= pattern.size()) {
    size_t next = pattern.find('%', i);
    bool last = next == std::string_view::npos;
    std::string_view piece = pattern.substr(i, last ? next : next - i);
    if (first && last)  // no wildcard at all: exact match
      return value == piece;
    if (first) {
      if (value.substr(0, piece.size()) != piece) return false;
      vpos = piece.size();
    } else if (last) {
      if (piece.empty()) return true;
      if (value.size() < vpos + piece.size()) return false;
      return value.substr(value.size() - piece.size()) == piece;
    } else if (!piece.empty()) {
      size_t found = value.find(piece, vpos);
      if (found == std::string_view::npos) return false;
      vpos = found + piece.size();
    }
    if (last) break;
    i = next + 1;
    first = false;
  }
  return true;
}

}  // namespace planest
