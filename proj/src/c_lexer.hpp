#pragma once

// A small C tokenizer for the reference analyzer. It is not a preprocessor:
// directives are dropped except object-like #defines with integer values,
// which are collected so array bounds written as macros can be evaluated.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace csc::clex {

enum class Tok { Ident, Number, String, Char, Punct };

struct Token
{
  Tok kind;
  std::string text; // string literals keep their quotes
  int line;
};

struct Lexed
{
  std::vector<Token> tokens;
  std::map<std::string, long long> int_macros;
};

Lexed lex(std::string_view source);

/// Decoded byte length of a string literal token (without the terminator).
std::size_t literal_length(std::string_view quoted);

/// Parses decimal, hex and octal literals with integer suffixes.
std::optional<long long> parse_int(std::string_view text);

} // namespace csc::clex
