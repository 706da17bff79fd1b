#include "weft/tag_expr.hpp"

#include <cctype>
#include <utility>
#include <vector>

#include "weft/error.hpp"

namespace weft {

struct TagExpr::Node {
  Kind kind;
  std::string token;
  std::shared_ptr<const Node> a;
  std::shared_ptr<const Node> b;
};

namespace {

const std::shared_ptr<const TagExpr::Node>& true_node() {
  static const auto node =
      std::make_shared<const TagExpr::Node>(TagExpr::Node{TagExpr::Kind::TRUE_VAL, "", nullptr, nullptr});
  return node;
}

bool eval(const TagExpr::Node& n, const TagSet& tags) {
  switch (n.kind) {
    case TagExpr::Kind::TRUE_VAL: return true;
    case TagExpr::Kind::TAG: return tags.count(n.token) > 0;
    case TagExpr::Kind::NOT: return !eval(*n.a, tags);
    case TagExpr::Kind::AND: return eval(*n.a, tags) && eval(*n.b, tags);
    case TagExpr::Kind::OR: return eval(*n.a, tags) || eval(*n.b, tags);
  }
  return false;
}

bool equal(const TagExpr::Node& x, const TagExpr::Node& y) {
  if (x.kind != y.kind) return false;
  switch (x.kind) {
    case TagExpr::Kind::TRUE_VAL: return true;
    case TagExpr::Kind::TAG: return x.token == y.token;
    case TagExpr::Kind::NOT: return equal(*x.a, *y.a);
    case TagExpr::Kind::AND:
    case TagExpr::Kind::OR: return equal(*x.a, *y.a) && equal(*x.b, *y.b);
  }
  return false;
}

// Precedence: OR = 0, AND = 1, NOT = 2, atoms = 3. A child is
// parenthesized when its level is below what its slot requires; the right
// operand of a binary node requires strictly more than the node itself so
// left-associative chains print without parentheses and right-nested
// trees keep theirs.
int level(TagExpr::Kind k) {
  switch (k) {
    case TagExpr::Kind::OR: return 0;
    case TagExpr::Kind::AND: return 1;
    case TagExpr::Kind::NOT: return 2;
    default: return 3;
  }
}

void print(const TagExpr::Node& n, int min_level, std::string& out) {
  const bool parens = level(n.kind) < min_level;
  if (parens) out.push_back('(');
  switch (n.kind) {
    case TagExpr::Kind::TRUE_VAL:
      out += "TRUE";
      break;
    case TagExpr::Kind::TAG:
      out += n.token;
      break;
    case TagExpr::Kind::NOT:
      out += "NOT ";
      print(*n.a, level(TagExpr::Kind::NOT), out);
      break;
    case TagExpr::Kind::AND:
      print(*n.a, level(TagExpr::Kind::AND), out);
      out += " AND ";
      print(*n.b, level(TagExpr::Kind::AND) + 1, out);
      break;
    case TagExpr::Kind::OR:
      print(*n.a, level(TagExpr::Kind::OR), out);
      out += " OR ";
      print(*n.b, level(TagExpr::Kind::OR) + 1, out);
      break;
  }
  if (parens) out.push_back(')');
}

void collect(const TagExpr::Node& n, std::set<std::string>& out) {
  switch (n.kind) {
    case TagExpr::Kind::TAG: out.insert(n.token); break;
    case TagExpr::Kind::NOT: collect(*n.a, out); break;
    case TagExpr::Kind::AND:
    case TagExpr::Kind::OR:
      collect(*n.a, out);
      collect(*n.b, out);
      break;
    default: break;
  }
}

struct Lexer {
  enum class Tok { TOKEN, KW_AND, KW_OR, KW_NOT, KW_TRUE, LPAREN, RPAREN, END };

  explicit Lexer(std::string_view text) : text_(text) { advance(); }

  Tok tok = Tok::END;
  std::string value;
  std::size_t tok_pos = 0;

  void advance() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    tok_pos = pos_;
    if (pos_ >= text_.size()) {
      tok = Tok::END;
      return;
    }
    const char c = text_[pos_];
    if (c == '(') {
      tok = Tok::LPAREN;
      ++pos_;
      return;
    }
    if (c == ')') {
      tok = Tok::RPAREN;
      ++pos_;
      return;
    }
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') {
      throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }
    std::string word;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      word.push_back(text_[pos_]);
      ++pos_;
    }
    std::string upper;
    for (char w : word) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(w))));
    if (upper == "AND") {
      tok = Tok::KW_AND;
    } else if (upper == "OR") {
      tok = Tok::KW_OR;
    } else if (upper == "NOT") {
      tok = Tok::KW_NOT;
    } else if (upper == "TRUE") {
      tok = Tok::KW_TRUE;
    } else {
      if (!is_tag_token(word)) {
        throw ParseError("invalid tag token '" + word + "'", tok_pos);
      }
      tok = Tok::TOKEN;
      value = word;
    }
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : lex_(text) {}

  TagExpr parse() {
    TagExpr e = parse_or();
    if (lex_.tok != Lexer::Tok::END) {
      throw ParseError("unexpected trailing input", lex_.tok_pos);
    }
    return e;
  }

 private:
  TagExpr parse_or() {
    TagExpr e = parse_and();
    while (lex_.tok == Lexer::Tok::KW_OR) {
      lex_.advance();
      e = TagExpr::disj(std::move(e), parse_and());
    }
    return e;
  }

  TagExpr parse_and() {
    TagExpr e = parse_unary();
    while (lex_.tok == Lexer::Tok::KW_AND) {
      lex_.advance();
      e = TagExpr::conj(std::move(e), parse_unary());
    }
    return e;
  }

  TagExpr parse_unary() {
    switch (lex_.tok) {
      case Lexer::Tok::KW_NOT: {
        lex_.advance();
        return TagExpr::negate(parse_unary());
      }
      case Lexer::Tok::LPAREN: {
        lex_.advance();
        TagExpr e = parse_or();
        if (lex_.tok != Lexer::Tok::RPAREN) {
          throw ParseError("expected ')'", lex_.tok_pos);
        }
        lex_.advance();
        return e;
      }
      case Lexer::Tok::KW_TRUE: {
        lex_.advance();
        return TagExpr::truth();
      }
      case Lexer::Tok::TOKEN: {
        TagExpr e = TagExpr::tag(lex_.value);
        lex_.advance();
        return e;
      }
      default:
        throw ParseError("expected expression", lex_.tok_pos);
    }
  }

  Lexer lex_;
};

}  // namespace

TagExpr::TagExpr() : node_(true_node()) {}
TagExpr::TagExpr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

TagExpr TagExpr::truth() { return TagExpr(true_node()); }

TagExpr TagExpr::tag(std::string token) {
  if (!is_tag_token(token)) throw ValidationError("invalid tag token: '" + token + "'");
  return TagExpr(std::make_shared<const Node>(Node{Kind::TAG, std::move(token), nullptr, nullptr}));
}

TagExpr TagExpr::negate(TagExpr e) {
  return TagExpr(std::make_shared<const Node>(Node{Kind::NOT, "", std::move(e.node_), nullptr}));
}

TagExpr TagExpr::conj(TagExpr lhs, TagExpr rhs) {
  return TagExpr(std::make_shared<const Node>(Node{Kind::AND, "", std::move(lhs.node_), std::move(rhs.node_)}));
}

TagExpr TagExpr::disj(TagExpr lhs, TagExpr rhs) {
  return TagExpr(std::make_shared<const Node>(Node{Kind::OR, "", std::move(lhs.node_), std::move(rhs.node_)}));
}

TagExpr TagExpr::never() { return negate(truth()); }

TagExpr::Kind TagExpr::kind() const { return node_->kind; }

const std::string& TagExpr::token() const {
  if (node_->kind != Kind::TAG) throw StateError("not a TAG node");
  return node_->token;
}

TagExpr TagExpr::child() const {
  if (node_->kind != Kind::NOT) throw StateError("not a NOT node");
  return TagExpr(node_->a);
}

TagExpr TagExpr::lhs() const {
  if (node_->kind != Kind::AND && node_->kind != Kind::OR) throw StateError("not a binary node");
  return TagExpr(node_->a);
}

TagExpr TagExpr::rhs() const {
  if (node_->kind != Kind::AND && node_->kind != Kind::OR) throw StateError("not a binary node");
  return TagExpr(node_->b);
}

bool TagExpr::matches(const TagSet& tags) const { return eval(*node_, tags); }

std::string TagExpr::str() const {
  std::string out;
  print(*node_, 0, out);
  return out;
}

TagExpr TagExpr::parse(std::string_view text) { return Parser(text).parse(); }

std::set<std::string> TagExpr::mentioned_tags() const {
  std::set<std::string> out;
  collect(*node_, out);
  return out;
}

bool TagExpr::operator==(const TagExpr& other) const { return equal(*node_, *other.node_); }

}  // namespace weft
