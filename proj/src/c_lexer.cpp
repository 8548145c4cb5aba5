#include "c_lexer.hpp"

#include <cctype>
#include <charconv>

namespace csc::clex {

namespace {

bool ident_start(char c)
{
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool ident_char(char c)
{
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

constexpr std::string_view kPuncts3[] = {"<<=", ">>=", "..."};
constexpr std::string_view kPuncts2[] = {"->", "++", "--", "<=", ">=", "==", "!=", "&&", "||", "<<",
                                         ">>", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "##"};

class Lexer
{
public:
  explicit Lexer(std::string_view src)
    : src_(src)
  {
  }

  Lexed run()
  {
    bool line_start = true;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\n') {
        ++line_;
        ++pos_;
        line_start = true;
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
        continue;
      }
      if (c == '/' && peek(1) == '/') {
        skip_line_comment();
        continue;
      }
      if (c == '/' && peek(1) == '*') {
        skip_block_comment();
        continue;
      }
      if (c == '#' && line_start) {
        directive();
        continue;
      }
      line_start = false;
      if (ident_start(c)) {
        // Prefixed literals: L"..", u8"..", u'..'
        std::size_t start = pos_;
        while (pos_ < src_.size() && ident_char(src_[pos_]))
          ++pos_;
        std::string_view word = src_.substr(start, pos_ - start);
        if (pos_ < src_.size() && (src_[pos_] == '"' || src_[pos_] == '\'') &&
            (word == "L" || word == "u" || word == "U" || word == "u8")) {
          quoted(src_[pos_]);
          continue;
        }
        push(Tok::Ident, word);
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
        std::size_t start = pos_;
        while (pos_ < src_.size() && (ident_char(src_[pos_]) || src_[pos_] == '.' ||
                                      ((src_[pos_] == '+' || src_[pos_] == '-') &&
                                       (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E' || src_[pos_ - 1] == 'p' ||
                                        src_[pos_ - 1] == 'P'))))
          ++pos_;
        push(Tok::Number, src_.substr(start, pos_ - start));
        continue;
      }
      if (c == '"' || c == '\'') {
        quoted(c);
        continue;
      }
      punct();
    }
    return std::move(out_);
  }

private:
  char peek(std::size_t ahead) const { return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0'; }

  void push(Tok kind, std::string_view text, int line = -1)
  {
    out_.tokens.push_back({kind, std::string(text), line < 0 ? line_ : line});
  }

  void skip_line_comment()
  {
    while (pos_ < src_.size() && src_[pos_] != '\n') {
      if (src_[pos_] == '\\' && peek(1) == '\n') {
        ++line_;
        pos_ += 2;
        continue;
      }
      ++pos_;
    }
  }

  void skip_block_comment()
  {
    pos_ += 2;
    while (pos_ < src_.size() && !(src_[pos_] == '*' && peek(1) == '/')) {
      if (src_[pos_] == '\n')
        ++line_;
      ++pos_;
    }
    pos_ = std::min(src_.size(), pos_ + 2);
  }

  void quoted(char quote)
  {
    int line = line_;
    std::size_t start = pos_++;
    while (pos_ < src_.size() && src_[pos_] != quote && src_[pos_] != '\n') {
      if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) {
        if (src_[pos_ + 1] == '\n')
          ++line_;
        pos_ += 2;
        continue;
      }
      ++pos_;
    }
    if (pos_ < src_.size() && src_[pos_] == quote)
      ++pos_;
    push(quote == '"' ? Tok::String : Tok::Char, src_.substr(start, pos_ - start), line);
  }

  void punct()
  {
    for (auto p : kPuncts3) {
      if (src_.substr(pos_, 3) == p) {
        push(Tok::Punct, p);
        pos_ += 3;
        return;
      }
    }
    for (auto p : kPuncts2) {
      if (src_.substr(pos_, 2) == p) {
        push(Tok::Punct, p);
        pos_ += 2;
        return;
      }
    }
    push(Tok::Punct, src_.substr(pos_, 1));
    ++pos_;
  }

  // Consumes a whole directive (with continuations). Records
  // `#define NAME <int>` and `#define NAME (<int>)`.
  void directive()
  {
    std::string text;
    while (pos_ < src_.size() && src_[pos_] != '\n') {
      if (src_[pos_] == '\\' && peek(1) == '\n') {
        ++line_;
        pos_ += 2;
        text += ' ';
        continue;
      }
      if (src_[pos_] == '/' && peek(1) == '*') {
        skip_block_comment();
        text += ' ';
        continue;
      }
      if (src_[pos_] == '/' && peek(1) == '/') {
        skip_line_comment();
        break;
      }
      text += src_[pos_++];
    }
    Lexer inner(std::string_view(text).substr(1));
    auto toks = inner.run().tokens;
    if (toks.size() < 3 || toks[0].text != "define" || toks[1].kind != Tok::Ident)
      return;
    std::size_t i = 2;
    std::size_t end = toks.size();
    if (toks[i].text == "(" && toks[end - 1].text == ")" && end - i == 3)
      ++i, --end;
    if (end - i == 1 && toks[i].kind == Tok::Number) {
      if (auto v = parse_int(toks[i].text))
        out_.int_macros[toks[1].text] = *v;
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  Lexed out_;
};

} // namespace

Lexed lex(std::string_view source)
{
  return Lexer(source).run();
}

std::size_t literal_length(std::string_view quoted)
{
  if (quoted.size() < 2)
    return 0;
  std::size_t open = quoted.find('"');
  std::string_view body = quoted.substr(open + 1, quoted.size() - open - 2);
  std::size_t n = 0;
  for (std::size_t i = 0; i < body.size(); ++i, ++n) {
    if (body[i] != '\\' || i + 1 >= body.size())
      continue;
    char e = body[++i];
    if (e == 'x') {
      while (i + 1 < body.size() && std::isxdigit(static_cast<unsigned char>(body[i + 1])))
        ++i;
    } else if (e >= '0' && e <= '7') {
      for (int k = 0; k < 2 && i + 1 < body.size() && body[i + 1] >= '0' && body[i + 1] <= '7'; ++k)
        ++i;
    }
  }
  return n;
}

std::optional<long long> parse_int(std::string_view text)
{
  while (!text.empty() && (text.back() == 'u' || text.back() == 'U' || text.back() == 'l' || text.back() == 'L'))
    text.remove_suffix(1);
  if (text.empty())
    return std::nullopt;
  int base = 10;
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
    base = 16;
    text.remove_prefix(2);
  } else if (text.size() > 1 && text[0] == '0') {
    base = 8;
    text.remove_prefix(1);
  }
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, base);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    return std::nullopt;
  return value;
}

} // namespace csc::clex
