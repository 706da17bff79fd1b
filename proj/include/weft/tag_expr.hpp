#pragma once
#include <memory>
#include <set>
#include <string>
#include <string_view>

#include "weft/tags.hpp"

namespace weft {

// Boolean expression over tag tokens. Grammar (keywords case-insensitive):
//
//   expr  := or
//   or    := and ('OR' and)*
//   and   := unary ('AND' unary)*
//   unary := 'NOT' unary | '(' expr ')' | token | 'TRUE'
//
// Tokens are [a-z0-9_]+. Immutable; cheap to copy (shared tree).
class TagExpr {
 public:
  enum class Kind { TRUE_VAL, TAG, NOT, AND, OR };

  // Defaults to TRUE.
  TagExpr();

  static TagExpr truth();
  static TagExpr tag(std::string token);
  static TagExpr negate(TagExpr e);
  static TagExpr conj(TagExpr lhs, TagExpr rhs);
  static TagExpr disj(TagExpr lhs, TagExpr rhs);

  // An expression that matches no tag set ("NOT TRUE").
  static TagExpr never();

  Kind kind() const;
  const std::string& token() const;  // TAG only
  TagExpr child() const;             // NOT only
  TagExpr lhs() const;               // AND/OR
  TagExpr rhs() const;               // AND/OR

  bool matches(const TagSet& tags) const;

  // Prints a form that reparses to a structurally equal tree.
  std::string str() const;

  // Throws ParseError (with position) on malformed input.
  static TagExpr parse(std::string_view text);

  // All TAG tokens mentioned anywhere in the tree.
  std::set<std::string> mentioned_tags() const;

  bool operator==(const TagExpr& other) const;
  bool operator!=(const TagExpr& other) const { return !(*this == other); }

  struct Node;

 private:
  explicit TagExpr(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

// Standard boolean evaluation; TAG(t) is true iff t is in `tags`.
inline bool match_tags(const TagExpr& expr, const TagSet& tags) { return expr.matches(tags); }

}  // namespace weft
