// Reference static analyzer: token-level rules for the classic C string and
// memory mistakes. Precision matters more than recall here because every
// HIGH/MEDIUM finding blocks a submission.

#include "c_lexer.hpp"
#include "csc/assessment.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace csc {
namespace {

namespace fs = std::filesystem;
using clex::Tok;
using clex::Token;

GuidelineRef cert(std::string rule)
{
  return GuidelineRef{GuidelineSource::CERT_C, std::move(rule), std::nullopt};
}

bool analyzable(const std::string& path)
{
  auto ext = fs::path(path).extension().string();
  return ext == ".c" || ext == ".h" || ext == ".cc" || ext == ".cpp" || ext == ".cxx" || ext == ".hpp";
}

const std::set<std::string>& type_words()
{
  static const std::set<std::string> words = {
    "char", "short", "int", "long", "float", "double", "signed", "unsigned", "_Bool", "bool",
    "const", "volatile", "static", "register", "auto", "extern", "void",
  };
  return words;
}

bool is_type_word(const std::string& w)
{
  return type_words().count(w) > 0 || (w.size() > 2 && w.ends_with("_t"));
}

int elem_size_of(const std::vector<std::string>& type)
{
  bool pointer = false;
  int size = 0;
  bool longs = false;
  for (const auto& w : type) {
    if (w == "*")
      pointer = true;
    else if (w == "char" || w == "uint8_t" || w == "int8_t" || w == "_Bool" || w == "bool")
      size = std::max(size, 1);
    else if (w == "short" || w == "uint16_t" || w == "int16_t")
      size = std::max(size, 2);
    else if (w == "int" || w == "float" || w == "uint32_t" || w == "int32_t")
      size = std::max(size, 4);
    else if (w == "long") {
      size = 8;
      longs = true;
    } else if (w == "double" || w == "size_t" || w == "ssize_t" || w == "uint64_t" || w == "int64_t")
      size = std::max(size, 8);
  }
  if (pointer)
    return 8;
  if (size == 0 && longs)
    return 8;
  return size;
}

struct ArrayInfo
{
  long long count = 0;
  int elem_size = 0; // 0 when unknown
  bool char_like = false;
};

using Scope = std::map<std::string, ArrayInfo>;

class FileAnalyzer
{
public:
  FileAnalyzer(std::string file, const std::vector<Token>& tokens, const std::map<std::string, long long>& macros,
               std::vector<Finding>& out)
    : file_(std::move(file))
    , t_(tokens)
    , macros_(macros)
    , out_(out)
  {
  }

  void run()
  {
    std::vector<std::pair<std::size_t, std::size_t>> functions;
    int paren = 0;
    for (std::size_t i = 0; i < t_.size(); ++i) {
      const auto& tok = t_[i];
      if (tok.text == "(")
        ++paren;
      else if (tok.text == ")")
        --paren;
      else if (tok.text == "{" && tok.kind == Tok::Punct) {
        std::size_t close = match(i);
        if (i > 0 && t_[i - 1].text == ")" && paren == 0)
          functions.emplace_back(i, close);
        i = close;
        continue;
      }
      if (paren == 0)
        maybe_declare(i, globals_);
    }
    for (auto [b, e] : functions)
      function(b, e);
  }

private:
  // ---- token helpers ----

  bool is(std::size_t i, std::string_view text) const { return i < t_.size() && t_[i].text == text; }

  std::size_t match(std::size_t open) const
  {
    const std::string& o = t_[open].text;
    std::string c = o == "(" ? ")" : o == "[" ? "]" : "}";
    int depth = 0;
    for (std::size_t i = open; i < t_.size(); ++i) {
      if (t_[i].kind != Tok::Punct)
        continue;
      if (t_[i].text == o)
        ++depth;
      else if (t_[i].text == c && --depth == 0)
        return i;
    }
    return t_.size() - 1;
  }

  // Top-level argument ranges of the call whose '(' is at `open`.
  std::vector<std::pair<std::size_t, std::size_t>> args(std::size_t open) const
  {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t close = match(open);
    std::size_t start = open + 1;
    int depth = 0;
    for (std::size_t i = open + 1; i < close; ++i) {
      const auto& s = t_[i].text;
      if (t_[i].kind != Tok::Punct)
        continue;
      if (s == "(" || s == "[" || s == "{")
        ++depth;
      else if (s == ")" || s == "]" || s == "}")
        --depth;
      else if (s == "," && depth == 0) {
        out.emplace_back(start, i);
        start = i + 1;
      }
    }
    if (close > open + 1)
      out.emplace_back(start, close);
    return out;
  }

  std::vector<std::string> texts(std::size_t b, std::size_t e) const
  {
    std::vector<std::string> out;
    for (std::size_t i = b; i < e && i < t_.size(); ++i)
      out.push_back(t_[i].text);
    return out;
  }

  std::string joined(std::size_t b, std::size_t e) const
  {
    std::string s;
    for (std::size_t i = b; i < e; ++i)
      s += t_[i].text;
    return s;
  }

  bool member_access(std::size_t i) const { return i > 0 && (t_[i - 1].text == "." || t_[i - 1].text == "->"); }

  void report(std::string category, Severity sev, int line, std::string message, GuidelineRef guideline)
  {
    out_.push_back(make_finding(std::move(category), sev, Location{file_, line}, std::move(message), Stage::STATIC,
                                std::move(guideline)));
  }

  // ---- declarations and constants ----

  // Records `T name[expr]` at token i (the name) into `scope`.
  void maybe_declare(std::size_t i, Scope& scope)
  {
    if (t_[i].kind != Tok::Ident || !is(i + 1, "[") || i == 0 || member_access(i))
      return;
    std::vector<std::string> type;
    std::size_t j = i;
    while (j > 0) {
      const auto& prev = t_[j - 1];
      if (prev.text == "*" || (prev.kind == Tok::Ident && (is_type_word(prev.text) || (j >= 2 && (t_[j - 2].text == "struct" || t_[j - 2].text == "union" || t_[j - 2].text == "enum"))))) {
        type.push_back(prev.text);
        --j;
        continue;
      }
      if ((prev.text == "struct" || prev.text == "union" || prev.text == "enum")) {
        --j;
        continue;
      }
      break;
    }
    bool declared = std::any_of(type.begin(), type.end(), [](const std::string& w) { return w != "*"; });
    // `int a[4], b[8];`: the second declarator follows a comma in a
    // declaration statement already typed.
    if (!declared && t_[i - 1].text == "," && last_decl_elem_ >= 0) {
      declared = true;
      type = last_decl_type_;
    }
    if (!declared)
      return;
    std::size_t close = match(i + 1);
    std::optional<long long> n;
    if (close == i + 2) {
      if (is(close + 1, "=") && close + 2 < t_.size() && t_[close + 2].kind == Tok::String)
        n = static_cast<long long>(clex::literal_length(t_[close + 2].text)) + 1;
    } else {
      n = eval(i + 2, close, scope);
    }
    last_decl_type_ = type;
    last_decl_elem_ = elem_size_of(type);
    if (!n || *n <= 0)
      return;
    ArrayInfo info;
    info.count = *n;
    info.elem_size = elem_size_of(type);
    info.char_like = info.elem_size == 1 && std::find(type.begin(), type.end(), "*") == type.end();
    if (std::find(type.begin(), type.end(), "*") != type.end())
      info.elem_size = 8;
    scope[t_[i].text] = info;
  }

  const ArrayInfo* lookup(const std::string& name, const Scope& locals) const
  {
    if (auto it = locals.find(name); it != locals.end())
      return &it->second;
    if (auto it = globals_.find(name); it != globals_.end())
      return &it->second;
    return nullptr;
  }

  // Integer constant expression over literals, integer macros and sizeof of
  // known arrays. Anything else makes the expression non-constant.
  std::optional<long long> eval(std::size_t b, std::size_t e, const Scope& scope) const
  {
    std::size_t pos = b;
    auto v = eval_add(pos, e, scope);
    if (!v || pos != e)
      return std::nullopt;
    return v;
  }

  std::optional<long long> eval_add(std::size_t& pos, std::size_t e, const Scope& scope) const
  {
    auto lhs = eval_mul(pos, e, scope);
    while (lhs && pos < e && (t_[pos].text == "+" || t_[pos].text == "-")) {
      bool plus = t_[pos++].text == "+";
      auto rhs = eval_mul(pos, e, scope);
      if (!rhs)
        return std::nullopt;
      lhs = plus ? *lhs + *rhs : *lhs - *rhs;
    }
    return lhs;
  }

  std::optional<long long> eval_mul(std::size_t& pos, std::size_t e, const Scope& scope) const
  {
    auto lhs = eval_unary(pos, e, scope);
    while (lhs && pos < e && (t_[pos].text == "*" || t_[pos].text == "/")) {
      bool times = t_[pos++].text == "*";
      auto rhs = eval_unary(pos, e, scope);
      if (!rhs || (!times && *rhs == 0))
        return std::nullopt;
      lhs = times ? *lhs * *rhs : *lhs / *rhs;
    }
    return lhs;
  }

  std::optional<long long> eval_unary(std::size_t& pos, std::size_t e, const Scope& scope) const
  {
    if (pos >= e)
      return std::nullopt;
    const Token& tok = t_[pos];
    if (tok.text == "-") {
      ++pos;
      auto v = eval_unary(pos, e, scope);
      return v ? std::optional(-*v) : std::nullopt;
    }
    if (tok.text == "(") {
      std::size_t close = match(pos);
      if (close >= e)
        return std::nullopt;
      // A cast such as (size_t)N: skip the type.
      if (close == pos + 2 && t_[pos + 1].kind == Tok::Ident && is_type_word(t_[pos + 1].text)) {
        pos = close + 1;
        return eval_unary(pos, e, scope);
      }
      auto v = eval(pos + 1, close, scope);
      pos = close + 1;
      return v;
    }
    if (tok.kind == Tok::Number) {
      ++pos;
      return clex::parse_int(tok.text);
    }
    if (tok.text == "sizeof") {
      ++pos;
      bool paren = is(pos, "(");
      std::size_t b = paren ? pos + 1 : pos;
      std::size_t end = paren ? match(pos) : pos + 1;
      // sizeof x[0]
      if (!paren && is(pos + 1, "["))
        end = match(pos + 1) + 1;
      pos = paren ? end + 1 : end;
      return sizeof_of(b, end, scope);
    }
    if (tok.kind == Tok::Ident) {
      ++pos;
      if (auto it = macros_.find(tok.text); it != macros_.end())
        return it->second;
      return std::nullopt;
    }
    return std::nullopt;
  }

  std::optional<long long> sizeof_of(std::size_t b, std::size_t e, const Scope& scope) const
  {
    if (e == b + 1 && t_[b].kind == Tok::Ident) {
      if (const ArrayInfo* a = lookup(t_[b].text, scope); a && a->elem_size > 0)
        return a->count * a->elem_size;
      std::vector<std::string> type{t_[b].text};
      if (is_type_word(t_[b].text) && elem_size_of(type) > 0)
        return elem_size_of(type);
      return std::nullopt;
    }
    // sizeof x[0]
    if (e == b + 4 && t_[b].kind == Tok::Ident && t_[b + 1].text == "[" && t_[b + 3].text == "]") {
      if (const ArrayInfo* a = lookup(t_[b].text, scope); a && a->elem_size > 0)
        return a->elem_size;
    }
    std::vector<std::string> type = texts(b, e);
    if (std::all_of(type.begin(), type.end(), [](const std::string& w) { return w == "*" || is_type_word(w); }) &&
        elem_size_of(type) > 0)
      return elem_size_of(type);
    return std::nullopt;
  }

  // ---- per-function rules ----

  void function(std::size_t fb, std::size_t fe)
  {
    Scope locals;
    last_decl_elem_ = -1;
    for (std::size_t i = fb + 1; i < fe; ++i) {
      if (t_[i].text == ";" || t_[i].text == "{" || t_[i].text == "}")
        last_decl_elem_ = -1;
      maybe_declare(i, locals);
    }
    std::set<std::string> tainted = taint(fb, fe);

    for (std::size_t i = fb + 1; i < fe; ++i) {
      const Token& tok = t_[i];
      if (tok.kind == Tok::Ident && is(i + 1, "(") && !member_access(i))
        call(i, fb, fe, locals, tainted);
      if (tok.text == "for" && is(i + 1, "("))
        for_loop(i, locals);
      if (tok.kind == Tok::Ident && is(i + 1, "[") && !member_access(i) && !is_declaration(i))
        constant_index(i, locals);
    }
  }

  bool is_declaration(std::size_t i) const
  {
    return i > 0 && (is_type_word(t_[i - 1].text) || (t_[i - 1].text == "*" && i > 1 && is_type_word(t_[i - 2].text)));
  }

  // Identifiers that may hold attacker-controlled text.
  std::set<std::string> taint(std::size_t fb, std::size_t fe) const
  {
    std::set<std::string> tainted{"argv"};
    auto mark = [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        if (t_[k].kind == Tok::Ident && t_[k].text != "sizeof" && !macros_.count(t_[k].text)) {
          tainted.insert(t_[k].text);
          return;
        }
      }
    };
    auto mentions_taint = [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k)
        if (t_[k].kind == Tok::Ident && tainted.count(t_[k].text))
          return true;
      return false;
    };
    // Two passes let taint flow through copies written before their source.
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = fb + 1; i < fe; ++i) {
        const std::string& s = t_[i].text;
        if (t_[i].kind == Tok::Ident && is(i + 1, "(") && !member_access(i)) {
          auto a = args(i + 1);
          if ((s == "fgets" || s == "gets" || s == "getline" || s == "getdelim") && !a.empty())
            mark(a[0].first, a[0].second);
          else if ((s == "read" || s == "recv" || s == "fread") && a.size() >= 2)
            mark(s == "fread" ? a[0].first : a[1].first, s == "fread" ? a[0].second : a[1].second);
          else if (s == "scanf" || s == "fscanf" || s == "sscanf") {
            std::size_t first = s == "scanf" ? 1 : 2;
            if (s == "sscanf" && !a.empty() && !mentions_taint(a[0].first, a[0].second))
              continue;
            for (std::size_t k = first; k < a.size(); ++k)
              mark(a[k].first, a[k].second);
          } else if ((s == "strcpy" || s == "strncpy" || s == "strcat" || s == "strncat" || s == "memcpy" ||
                      s == "sprintf" || s == "snprintf") &&
                     a.size() >= 2) {
            bool from_taint = false;
            for (std::size_t k = 1; k < a.size(); ++k)
              from_taint = from_taint || mentions_taint(a[k].first, a[k].second);
            if (from_taint)
              mark(a[0].first, a[0].second);
          }
        }
        // x = <tainted expr> ;  or  x = getenv(...)
        if (s == "=" && i > fb + 1 && t_[i - 1].kind == Tok::Ident) {
          std::size_t end = i + 1;
          while (end < fe && t_[end].text != ";" && t_[end].text != ",")
            ++end;
          bool source = mentions_taint(i + 1, end);
          for (std::size_t k = i + 1; k < end; ++k)
            source = source || t_[k].text == "getenv";
          if (source)
            tainted.insert(t_[i - 1].text);
        }
      }
    }
    return tainted;
  }

  void call(std::size_t i, std::size_t fb, std::size_t fe, const Scope& locals, const std::set<std::string>& tainted)
  {
    const std::string& fn = t_[i].text;
    const int line = t_[i].line;
    auto a = args(i + 1);

    if (fn == "gets") {
      report("BANNED_FUNCTION", Severity::HIGH, line,
             "gets() cannot limit how much it reads; use fgets() with the buffer size", cert("MSC24-C"));
      return;
    }

    if ((fn == "strcpy" || fn == "strcat") && a.size() == 2) {
      if (!bounded_copy(fn, a, fb, i, locals))
        report("BUFFER_OVERFLOW", Severity::HIGH, line,
               fn + "() writes '" + joined(a[1].first, a[1].second) + "' into '" + joined(a[0].first, a[0].second) +
                 "' without checking its length",
               cert("STR31-C"));
    }

    if (fn == "sprintf" || fn == "vsprintf")
      report("BUFFER_OVERFLOW", Severity::HIGH, line,
             fn + "() has no output bound; use snprintf() with the buffer size", cert("STR31-C"));

    static const std::map<std::string, std::size_t> format_arg = {
      {"printf", 0}, {"vprintf", 0}, {"fprintf", 1}, {"vfprintf", 1}, {"dprintf", 1}, {"sprintf", 1},
      {"vsprintf", 1}, {"snprintf", 2}, {"vsnprintf", 2}, {"syslog", 1},
    };
    if (auto it = format_arg.find(fn); it != format_arg.end() && a.size() > it->second) {
      auto [b, e] = a[it->second];
      if (t_[b].kind != Tok::String) {
        bool from_user = false;
        for (std::size_t k = b; k < e; ++k)
          from_user = from_user || (t_[k].kind == Tok::Ident && tainted.count(t_[k].text));
        report("FORMAT_STRING", from_user ? Severity::HIGH : Severity::MEDIUM, line,
               fn + "() uses '" + joined(b, e) + "' as its format string" +
                 (from_user ? ", which carries user input" : ""),
               cert("FIO30-C"));
      }
    }

    if ((fn == "scanf" || fn == "fscanf" || fn == "sscanf") && !a.empty()) {
      std::size_t k = fn == "scanf" ? 0 : 1;
      if (k < a.size() && t_[a[k].first].kind == Tok::String && unbounded_scan(t_[a[k].first].text))
        report("BUFFER_OVERFLOW", Severity::HIGH, line, fn + "() reads a string with no field width",
               cert("STR31-C"));
    }

    sized_call(fn, a, line, locals);

    if ((fn == "malloc" || fn == "calloc" || fn == "realloc") && !member_access(i))
      allocation(i, fe);
  }

  static bool unbounded_scan(std::string_view fmt)
  {
    for (std::size_t p = fmt.find('%'); p != std::string_view::npos; p = fmt.find('%', p + 1)) {
      std::size_t q = p + 1;
      if (q < fmt.size() && fmt[q] == '%') {
        p = q;
        continue;
      }
      if (q < fmt.size() && fmt[q] == '*')
        continue;
      bool width = false;
      while (q < fmt.size() && std::isdigit(static_cast<unsigned char>(fmt[q]))) {
        width = true;
        ++q;
      }
      if (q < fmt.size() && (fmt[q] == 's' || fmt[q] == '[') && !width)
        return true;
    }
    return false;
  }

  // strcpy/strcat is safe when the source is a literal that fits, or when a
  // comparison on strlen(source) precedes the call in the same function.
  bool bounded_copy(const std::string& fn, const std::vector<std::pair<std::size_t, std::size_t>>& a, std::size_t fb,
                    std::size_t call_at, const Scope& locals) const
  {
    auto dst = a[0];
    auto src = a[1];
    if (fn == "strcpy" && src.second == src.first + 1 && t_[src.first].kind == Tok::String && dst.second == dst.first + 1) {
      if (const ArrayInfo* arr = lookup(t_[dst.first].text, locals); arr && arr->char_like)
        return static_cast<long long>(clex::literal_length(t_[src.first].text)) < arr->count;
    }
    auto src_text = texts(src.first, src.second);
    for (std::size_t k = fb; k + 3 < call_at; ++k) {
      if (t_[k].text != "strlen" || !is(k + 1, "("))
        continue;
      std::size_t close = match(k + 1);
      if (texts(k + 2, close) != src_text)
        continue;
      // Look for a relational operator in the enclosing condition.
      for (std::size_t m = close + 1; m < call_at && t_[m].text != ";" && t_[m].text != "{"; ++m) {
        const auto& op = t_[m].text;
        if (op == "<" || op == "<=" || op == ">" || op == ">=")
          return true;
      }
      for (std::size_t m = k; m > fb && t_[m].text != ";" && t_[m].text != "{"; --m) {
        const auto& op = t_[m].text;
        if (op == "<" || op == "<=" || op == ">" || op == ">=")
          return true;
      }
    }
    return false;
  }

  // Library calls whose size argument exceeds the destination array.
  void sized_call(const std::string& fn, const std::vector<std::pair<std::size_t, std::size_t>>& a, int line,
                  const Scope& locals)
  {
    static const std::map<std::string, std::pair<std::size_t, std::size_t>> sized = {
      // function -> (destination arg, size arg)
      {"fgets", {0, 1}},   {"memset", {0, 2}}, {"memcpy", {0, 2}}, {"memmove", {0, 2}},
      {"strncpy", {0, 2}}, {"snprintf", {0, 1}}, {"read", {1, 2}},  {"recv", {1, 2}},
    };
    auto it = sized.find(fn);
    if (it == sized.end())
      return;
    auto [dst_i, size_i] = it->second;
    if (size_i >= a.size())
      return;
    auto dst = a[dst_i];
    if (dst.second != dst.first + 1 || t_[dst.first].kind != Tok::Ident)
      return;
    const ArrayInfo* arr = lookup(t_[dst.first].text, locals);
    if (!arr || arr->elem_size == 0)
      return;
    auto n = eval(a[size_i].first, a[size_i].second, locals);
    long long bytes = arr->count * arr->elem_size;
    if (n && *n > bytes)
      report("BUFFER_OVERFLOW", Severity::HIGH, line,
             fn + "() may write " + std::to_string(*n) + " bytes into '" + t_[dst.first].text + "', which holds " +
               std::to_string(bytes),
             cert("ARR38-C"));
  }

  // `lvalue = [cast] malloc(...)` must be followed by a null check before the
  // pointer is dereferenced or handed to a copying function.
  void allocation(std::size_t call_at, std::size_t fe)
  {
    std::size_t j = call_at;
    // Skip a cast: = (T *) malloc
    if (j > 0 && t_[j - 1].text == ")") {
      std::size_t k = j - 1;
      int depth = 0;
      while (k > 0) {
        if (t_[k].text == ")")
          ++depth;
        else if (t_[k].text == "(" && --depth == 0)
          break;
        --k;
      }
      j = k;
    }
    if (j == 0 || t_[j - 1].text != "=")
      return;
    std::size_t eq = j - 1;
    // lvalue: ident ((.|->) ident)*
    std::size_t lb = eq;
    if (lb == 0 || t_[lb - 1].kind != Tok::Ident)
      return;
    --lb;
    while (lb >= 2 && (t_[lb - 1].text == "." || t_[lb - 1].text == "->") && t_[lb - 2].kind == Tok::Ident)
      lb -= 2;
    auto lv = texts(lb, eq);
    const std::string lv_text = joined(lb, eq);

    std::size_t call_close = match(call_at + 1);
    // if ((p = malloc(n)) == NULL)
    if (lb > 0 && t_[lb - 1].text == "(") {
      std::size_t wrap = match(lb - 1);
      if (wrap == call_close + 1) {
        const auto& nx = wrap + 1 < t_.size() ? t_[wrap + 1].text : std::string();
        if (nx == "==" || nx == "!=" || (lb >= 2 && (t_[lb - 2].text == "!" || t_[lb - 2].text == "(")))
          return;
      }
    }

    auto at_lv = [&](std::size_t k) {
      if (k + lv.size() > fe || (k > 0 && (t_[k - 1].text == "." || t_[k - 1].text == "->")))
        return false;
      for (std::size_t m = 0; m < lv.size(); ++m)
        if (t_[k + m].text != lv[m])
          return false;
      return true;
    };
    auto null_word = [&](std::size_t k) { return is(k, "NULL") || is(k, "0") || is(k, "nullptr"); };

    static const std::set<std::string> consumers = {"strcpy", "strncpy", "strcat", "strncat", "memcpy", "memmove",
                                                    "memset", "sprintf", "snprintf", "fgets",  "read",    "fread",
                                                    "gets",   "scanf",   "sscanf",  "fscanf", "strlen",  "puts",
                                                    "printf", "fputs"};
    for (std::size_t k = call_close + 1; k < fe; ++k) {
      if (!at_lv(k))
        continue;
      std::size_t after = k + lv.size();
      bool checked = ((is(after, "==") || is(after, "!=")) && null_word(after + 1)) ||
                     (k >= 2 && (t_[k - 1].text == "==" || t_[k - 1].text == "!=") && null_word(k - 2)) ||
                     (k >= 1 && t_[k - 1].text == "!") ||
                     (k >= 2 && t_[k - 1].text == "(" && t_[k - 2].text == "!") ||
                     (k >= 2 && t_[k - 1].text == "(" &&
                      (t_[k - 2].text == "if" || t_[k - 2].text == "while" || t_[k - 2].text == "assert") &&
                      (is(after, ")") || is(after, "&&") || is(after, "||"))) ||
                     is(after, "?");
      if (checked)
        return;
      bool deref = is(after, "[") || (lv.size() >= 1 && is(after, "->")) || (k >= 1 && t_[k - 1].text == "*" &&
                                                                              (k < 2 || t_[k - 2].kind == Tok::Punct));
      bool consumed = false;
      if (k >= 2 && (t_[k - 1].text == "(" || t_[k - 1].text == ",")) {
        // Find the callee of the enclosing argument list.
        int depth = 0;
        for (std::size_t m = k - 1; m > call_close; --m) {
          const auto& s = t_[m].text;
          if (s == ")")
            ++depth;
          else if (s == "(") {
            if (depth == 0) {
              consumed = m > 0 && consumers.count(t_[m - 1].text) > 0;
              break;
            }
            --depth;
          }
        }
      }
      if (deref || consumed)
        break;
      // Reassignment ends the tracked value.
      if (is(after, "="))
        return;
    }
    report("UNCHECKED_RETURN", Severity::MEDIUM, t_[call_at].line,
           t_[call_at].text + "() result stored in '" + lv_text + "' is used without a NULL check", cert("ERR33-C"));
  }

  // for (i = a; i < N; ...) { x[i + c] }  with N + c beyond x's extent.
  void for_loop(std::size_t i, const Scope& locals)
  {
    std::size_t open = i + 1;
    std::size_t close = match(open);
    std::vector<std::size_t> semis;
    int depth = 0;
    for (std::size_t k = open + 1; k < close; ++k) {
      const auto& s = t_[k].text;
      if (s == "(" || s == "[")
        ++depth;
      else if (s == ")" || s == "]")
        --depth;
      else if (s == ";" && depth == 0)
        semis.push_back(k);
    }
    if (semis.size() != 2)
      return;
    std::size_t cb = semis[0] + 1, ce = semis[1];
    if (ce - cb < 3 || t_[cb].kind != Tok::Ident)
      return;
    const std::string var = t_[cb].text;
    const std::string op = t_[cb + 1].text;
    if (op != "<" && op != "<=")
      return;
    auto bound = eval(cb + 2, ce, locals);
    if (!bound)
      return;
    long long last = op == "<=" ? *bound : *bound - 1;

    std::size_t body_b = close + 1;
    std::size_t body_e;
    if (is(body_b, "{"))
      body_e = match(body_b);
    else {
      body_e = body_b;
      int d = 0;
      while (body_e < t_.size() && !(t_[body_e].text == ";" && d == 0)) {
        if (t_[body_e].text == "(" || t_[body_e].text == "{")
          ++d;
        else if (t_[body_e].text == ")" || t_[body_e].text == "}")
          --d;
        ++body_e;
      }
    }
    for (std::size_t k = body_b; k < body_e && k < t_.size(); ++k) {
      if (t_[k].kind != Tok::Ident || !is(k + 1, "[") || member_access(k))
        continue;
      const ArrayInfo* arr = lookup(t_[k].text, locals);
      if (!arr)
        continue;
      std::size_t ib = k + 2, ie = match(k + 1);
      if (ie == ib || t_[ib].text != var)
        continue;
      long long offset = 0;
      if (ie == ib + 1)
        offset = 0;
      else if (ie == ib + 3 && (t_[ib + 1].text == "+" || t_[ib + 1].text == "-") && t_[ib + 2].kind == Tok::Number) {
        auto c = clex::parse_int(t_[ib + 2].text);
        if (!c)
          continue;
        offset = t_[ib + 1].text == "+" ? *c : -*c;
      } else
        continue;
      long long max_index = last + offset;
      if (max_index >= arr->count)
        report("BUFFER_OVERFLOW", Severity::HIGH, t_[k].line,
               "loop reaches " + t_[k].text + "[" + std::to_string(max_index) + "] but '" + t_[k].text + "' has " +
                 std::to_string(arr->count) + " elements",
               cert("ARR30-C"));
    }
  }

  void constant_index(std::size_t i, const Scope& locals)
  {
    const ArrayInfo* arr = lookup(t_[i].text, locals);
    if (!arr || (i > 0 && t_[i - 1].text == "&"))
      return;
    std::size_t close = match(i + 1);
    auto idx = eval(i + 2, close, locals);
    if (!idx)
      return;
    if (*idx >= arr->count || *idx < 0)
      report("BUFFER_OVERFLOW", Severity::HIGH, t_[i].line,
             "index " + std::to_string(*idx) + " is outside '" + t_[i].text + "', which has " +
               std::to_string(arr->count) + " elements",
             cert("ARR30-C"));
  }

  std::string file_;
  const std::vector<Token>& t_;
  const std::map<std::string, long long>& macros_;
  std::vector<Finding>& out_;
  Scope globals_;
  std::vector<std::string> last_decl_type_;
  int last_decl_elem_ = -1;
};

} // namespace

std::vector<Finding> ReferenceAnalyzer::analyze_sources(const std::map<std::string, std::string>& files) const
{
  std::map<std::string, clex::Lexed> lexed;
  std::map<std::string, long long> macros;
  for (const auto& [path, source] : files) {
    if (!analyzable(path))
      continue;
    auto l = clex::lex(source);
    for (const auto& [k, v] : l.int_macros)
      macros.emplace(k, v);
    lexed.emplace(path, std::move(l));
  }
  std::vector<Finding> out;
  for (auto& [path, l] : lexed) {
    auto local_macros = macros;
    for (const auto& [k, v] : l.int_macros)
      local_macros[k] = v;
    FileAnalyzer(path, l.tokens, local_macros, out).run();
  }
  return normalize_findings(std::move(out));
}

std::vector<Finding> ReferenceAnalyzer::analyze(const fs::path&, const std::map<std::string, std::string>& files) const
{
  return analyze_sources(files);
}

} // namespace csc
