#pragma once

#include <algorithm>
#include <string_view>
#include <variant>

#include "planest/catalog.hpp"
#include "planest/plan.hpp"

namespace planest {

// SQL LIKE with % wildcards (zero or more characters). No escapes, no '_'.
bool like_match(std::string_view value, std::string_view pattern);

// A column value as seen by predicate evaluation.
struct CellValue {
  ColType type = ColType::Numeric;
  double num = 0.0;
  std::string_view str;

  static CellValue of(double v) { return {ColType::Numeric, v, {}}; }
  static CellValue of(std::string_view s) { return {ColType::Str, 0.0, s}; }
};

namespace detail {

template <class Getter>
bool eval_expr(const PredicateNode& p, Getter&& get) {
  CellValue lhs = get(p.column);
  // Column-to-column comparison (join conditions).
  if (const auto* ref = std::get_if<ColumnRef>(&p.operand)) {
    CellValue rhs = get(ref->name);
    if (lhs.type != rhs.type)
      throw data_error("type mismatch comparing " + p.column + " and " +
                       ref->name);
    bool eq = lhs.type == ColType::Numeric ? lhs.num == rhs.num
                                           : lhs.str == rhs.str;
    bool lt = lhs.type == ColType::Numeric ? lhs.num < rhs.num
                                           : lhs.str < rhs.str;
    switch (p.op) {
      case CmpOp::Eq:
        return eq;
      case CmpOp::Ne:
        return !eq;
      case CmpOp::Lt:
        return lt;
      case CmpOp::Gt:
        return !lt && !eq;
      default:
        throw data_error("operator not defined on column pairs");
    }
  }
  if (const auto* num = std::get_if<double>(&p.operand)) {
    if (lhs.type != ColType::Numeric)
      throw data_error("numeric operand on string column " + p.column);
    switch (p.op) {
      case CmpOp::Eq:
        return lhs.num == *num;
      case CmpOp::Ne:
        return lhs.num != *num;
      case CmpOp::Gt:
        return lhs.num > *num;
      case CmpOp::Lt:
        return lhs.num < *num;
      default:
        throw data_error("operator not defined on numbers");
    }
  }
  if (const auto* s = std::get_if<std::string>(&p.operand)) {
    if (lhs.type != ColType::Str)
      throw data_error("string operand on numeric column " + p.column);
    switch (p.op) {
      case CmpOp::Eq:
        return lhs.str == *s;
      case CmpOp::Ne:
        return lhs.str != *s;
      case CmpOp::Gt:
        return lhs.str > *s;
      case CmpOp::Lt:
        return lhs.str < *s;
      case CmpOp::Like:
        return like_match(lhs.str, *s);
      case CmpOp::NotLike:
        return !like_match(lhs.str, *s);
      default:
        throw data_error("operator not defined on strings");
    }
  }
  // IN over a string set (parse rewrites these away, but hand-built trees may
  // still carry them).
  const auto& set = std::get<std::vector<std::string>>(p.operand);
  if (lhs.type != ColType::Str)
    throw data_error("IN set operand on numeric column " + p.column);
  bool found = std::find(set.begin(), set.end(), lhs.str) != set.end();
  return p.op == CmpOp::Ne ? !found : found;
}

}  // namespace detail

// Evaluates a predicate tree against one row. `get` maps a column name to its
// CellValue and may throw data_error for unknown names.
template <class Getter>
bool eval_predicate(const PredicateNode& p, Getter&& get) {
  switch (p.kind) {
    case PredicateNode::Kind::And:
      for (const auto& c : p.children)
        if (!eval_predicate(*c, get)) return false;
      return true;
    case PredicateNode::Kind::Or:
      for (const auto& c : p.children)
        if (eval_predicate(*c, get)) return true;
      return false;
    case PredicateNode::Kind::Expr:
      return detail::eval_expr(p, get);
  }
  return false;
}

}  // namespace planest
