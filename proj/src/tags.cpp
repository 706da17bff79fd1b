#include "weft/tags.hpp"

#include <cctype>

#include "weft/error.hpp"

namespace weft {

namespace {

bool token_char(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'; }

}  // namespace

bool is_tag_token(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!token_char(c)) return false;
  }
  return true;
}

void require_tag_tokens(const TagSet& tags) {
  for (const auto& t : tags) {
    if (!is_tag_token(t)) throw ValidationError("invalid tag token: '" + t + "'");
  }
}

std::string tag_token(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  bool pending_sep = false;
  for (char c : name) {
    const char lc = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if ((lc >= 'a' && lc <= 'z') || (lc >= '0' && lc <= '9')) {
      if (pending_sep && !out.empty()) out.push_back('_');
      pending_sep = false;
      out.push_back(lc);
    } else {
      pending_sep = true;
    }
  }
  if (out.empty()) out = "_";
  return out;
}

TagSet tag_union(const TagSet& a, const TagSet& b) {
  TagSet out = a;
  out.insert(b.begin(), b.end());
  return out;
}

std::set<std::string> lex_tokens(std::string_view text) {
  std::set<std::string> out;
  std::string cur;
  for (char c : text) {
    const char lc = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if ((lc >= 'a' && lc <= 'z') || (lc >= '0' && lc <= '9')) {
      cur.push_back(lc);
    } else if (!cur.empty()) {
      out.insert(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.insert(cur);
  return out;
}

}  // namespace weft
