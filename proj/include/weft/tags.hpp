#pragma once
#include <set>
#include <string>
#include <string_view>

namespace weft {

// Tags are lowercase tokens matching [a-z0-9_]+.
using TagSet = std::set<std::string>;

bool is_tag_token(std::string_view s);

// Throws ValidationError if any entry is not a valid token.
void require_tag_tokens(const TagSet& tags);

// Reduce an arbitrary name to a tag token: lowercase, every run of
// non-[a-z0-9] characters collapsed to a single '_'.
std::string tag_token(std::string_view name);

TagSet tag_union(const TagSet& a, const TagSet& b);

// Lowercased alphanumeric runs of `text`, used for lexical search scoring.
std::set<std::string> lex_tokens(std::string_view text);

}  // namespace weft
