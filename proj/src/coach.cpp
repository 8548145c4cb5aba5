#include "csc/coach.hpp"

#include "csc/error.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <utility>

namespace csc {

namespace {

using nlohmann::json;

struct PackEntry
{
  const char* category;
  const char* level1;
  const char* level2;
  const char* level3;
};

// Level 2 texts point at the spot; level 3 texts say what to change. The
// guideline is appended to level 3 by render_hint.
constexpr PackEntry kPack[] = {
  {"BANNED_FUNCTION", "Your code calls a function that is unsafe by design and has no safe way to be used.",
   "The banned call is in {file} at line {line}.",
   "Replace the call in {file}:{line} with a bounded alternative that takes the size of the destination buffer, "
   "and handle the case where the input does not fit."},
  {"BUFFER_OVERFLOW", "Somewhere data is written or read past the end of a buffer.",
   "Check the buffer access in {file} at line {line}: {message}.",
   "At {file}:{line}, make sure the amount of data copied can never exceed the size of the destination. Compare "
   "lengths against the buffer size before copying, or use a function that takes the size and check its result."},
  {"FORMAT_STRING", "A formatted output call takes its format from data the program does not control.",
   "The format string problem is in {file} at line {line}.",
   "At {file}:{line}, pass a constant format string such as \"%s\" and give the data as an argument, or use an "
   "output function that does not interpret format directives."},
  {"UNCHECKED_RETURN", "A function that can fail is used as if it always succeeds.",
   "Look at the result of the call in {file} at line {line}.",
   "After the call at {file}:{line}, test the result for failure before using it and take an error path when it "
   "fails."},
  {"NULL_DEREFERENCE", "The program dereferences a pointer that can be NULL.",
   "The NULL pointer is used in {file} at line {line}.",
   "Before the access at {file}:{line}, check that the pointer is valid. Find where it can become NULL and handle "
   "that case there."},
  {"USE_AFTER_FREE", "Memory is used after it has been released.", "The freed memory is accessed in {file} at line {line}.",
   "At {file}:{line}, make sure the object is still alive. Free it only after its last use, and set the pointer to "
   "NULL once it is freed."},
  {"DOUBLE_FREE", "The same memory is released twice.", "The second release happens in {file} at line {line}.",
   "Give each allocation exactly one owner that frees it. Set the pointer to NULL after the free at {file}:{line}."},
  {"INVALID_FREE", "free() receives a pointer that did not come from an allocation function.",
   "The bad free() call is in {file} at line {line}.",
   "At {file}:{line}, only free pointers returned by malloc(), calloc() or realloc(), and free them unchanged."},
  {"INVALID_MEMORY_ACCESS", "The program touches memory it does not own.",
   "The invalid access happens in {file} at line {line}.",
   "At {file}:{line}, check the pointer and index arithmetic that leads to the access and bound it by the size "
   "of the object."},
  {"STACK_EXHAUSTION", "The program runs out of stack space.", "The stack overflows while running {file} line {line}.",
   "Bound the recursion depth reached from {file}:{line}, or turn the recursion into a loop, and avoid large "
   "local arrays."},
  {"MEMORY_ERROR", "The memory checker reports an error.", "The memory error is reported in {file} at line {line}.",
   "Review the lifetime and size of every object used at {file}:{line}."},
  {"DIVIDE_BY_ZERO", "A division can receive a zero divisor.", "The division is in {file} at line {line}.",
   "Before dividing at {file}:{line}, reject a zero divisor (and INT_MIN / -1 for signed values)."},
  {"INTEGER_OVERFLOW", "An integer computation can overflow.", "The overflow happens in {file} at line {line}.",
   "Check the operands at {file}:{line} against the limits of the type before computing, or use a wider type."},
  {"UNDEFINED_BEHAVIOR", "The program relies on undefined behavior.", "Undefined behavior occurs in {file} at line {line}.",
   "Rewrite the expression at {file}:{line} so it stays within the rules of the language for every input."},
  {"RESOURCE_LIMIT", "The program uses too much time or memory for at least one input.",
   "A run hit a resource limit: {message}.",
   "Make sure every loop terminates and every allocation size is bounded for the failing input, and report an "
   "error instead of trying to allocate huge amounts."},
  {"CRASH", "The program crashes for at least one input.", "The crash: {message}.",
   "Run the failing test input against your program and follow the crash back to its cause."},
  {"COMPILE_ERROR", "The code does not compile yet.", "The compiler stops in {file} at line {line}: {message}.",
   "Fix the compiler error at {file}:{line} first; the other checks only run once the project builds."},
  {"COMPILER_WARNING", "The compiler warns about your code.", "The warning is in {file} at line {line}: {message}.",
   "Warnings often point at real defects. Address the one at {file}:{line}."},
  {"ANALYZER_ERROR", "One of the analysis tools could not check your code.", "The failure: {message}.",
   "This is usually not caused by your change. Ask the organizers if it persists."},
  {"FAILED_TEST", "Your program does not yet behave as expected for test '{test}'.", "Test '{test}': {diff}.",
   "Test '{test}' fails with {diff}. Read the task again for the expected behavior on that input, including the "
   "exit status."},
  {"*", "Your code has a {category} problem.", "There is a {category} problem in {file} at line {line}.",
   "Review the code at {file}:{line} for {category} and compare it with the guideline."},
};

constexpr const char* kFileOnlyLevel2 = "The {category} problem shows up in {file}: {message}.";

std::string trim(std::string_view s)
{
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos)
    return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string guideline_text(const GuidelineRef& g)
{
  std::string out = std::string(to_string(g.source)) + " " + g.rule_id;
  if (g.url)
    out += " (" + *g.url + ")";
  return out;
}

std::optional<std::string> placeholder(std::string_view name, const Finding& f)
{
  if (name == "file")
    return f.location.file.empty() ? std::nullopt : std::optional(f.location.file);
  if (name == "line")
    return f.location.line > 0 ? std::optional(std::to_string(f.location.line)) : std::nullopt;
  if (name == "guideline")
    return f.guideline ? std::optional(guideline_text(*f.guideline)) : std::nullopt;
  if (name == "category")
    return f.category;
  if (name == "test")
    return f.test_id;
  if (name == "diff" || name == "message")
    return f.message.empty() ? std::nullopt : std::optional(f.message);
  return std::nullopt;
}

// Lines of the reference solution that a hint must never contain.
std::vector<std::string> solution_lines(const ChallengeBundle& bundle)
{
  std::vector<std::string> out;
  if (!bundle.project)
    return out;
  for (const auto& [path, content] : bundle.project->solution_files) {
    std::size_t pos = 0;
    while (pos <= content.size()) {
      std::size_t end = content.find('\n', pos);
      if (end == std::string::npos)
        end = content.size();
      if (auto line = trim(std::string_view(content).substr(pos, end - pos)); !line.empty())
        out.push_back(std::move(line));
      pos = end + 1;
    }
  }
  return out;
}

bool leaks(const std::string& text, const std::vector<std::string>& lines)
{
  return std::any_of(lines.begin(), lines.end(),
                     [&](const std::string& l) { return text.find(l) != std::string::npos; });
}

const HintTemplate* find_template(std::span<const HintTemplate> pack, std::string_view category, int level)
{
  for (const auto& t : pack)
    if (t.category == category && t.level == level)
      return &t;
  return nullptr;
}

std::string generic_text(const ChallengeBundle& bundle)
{
  std::string text = "You have seen every hint for the open problems. Review the walk-through of this challenge";
  if (!bundle.guideline_refs.empty()) {
    text += " and the guidelines it cites:";
    for (std::size_t i = 0; i < bundle.guideline_refs.size(); ++i)
      text += (i ? ", " : " ") + std::string(to_string(bundle.guideline_refs[i].source)) + " " +
              bundle.guideline_refs[i].rule_id;
  }
  return text + ".";
}

} // namespace

const std::vector<HintTemplate>& default_hint_pack()
{
  static const std::vector<HintTemplate> pack = [] {
    std::vector<HintTemplate> out;
    for (const auto& e : kPack) {
      out.push_back({e.category, 1, e.level1});
      out.push_back({e.category, 2, e.level2});
      out.push_back({e.category, 3, e.level3});
    }
    return out;
  }();
  return pack;
}

std::string render_hint(const HintTemplate& tmpl, const Finding& finding)
{
  if (tmpl.category != kAnyCategory && tmpl.category != finding.category)
    throw CoachError("CategoryMismatch",
                     "template for " + tmpl.category + " cannot render a " + finding.category + " finding");
  std::string out;
  bool cited = false;
  for (std::size_t i = 0; i < tmpl.text.size();) {
    if (tmpl.text[i] != '{') {
      out += tmpl.text[i++];
      continue;
    }
    std::size_t close = tmpl.text.find('}', i);
    if (close == std::string::npos) {
      out += tmpl.text.substr(i);
      break;
    }
    std::string name = tmpl.text.substr(i + 1, close - i - 1);
    auto value = placeholder(name, finding);
    if (!value)
      throw CoachError("MissingPlaceholderData", "finding " + finding.id + " has no data for {" + name + "}");
    cited = cited || name == "guideline";
    out += *value;
    i = close + 1;
  }
  if (tmpl.level >= 3 && finding.guideline && !cited)
    out += " See " + guideline_text(*finding.guideline) + ".";
  return out;
}

std::vector<Finding> hint_targets(const AssessmentReport& report)
{
  std::vector<Finding> out;
  for (const auto& reason : report.verdict.reasons) {
    if (const Finding* f = report.find(reason)) {
      out.push_back(*f);
    }
    else if (const FunctionalResult* r = report.functional_result(reason)) {
      Finding f;
      f.id = r->test_id;
      f.category = std::string(kFailedTestCategory);
      f.severity = Severity::MEDIUM;
      f.stage = Stage::FUNCTIONAL;
      f.message = r->diff;
      f.test_id = r->test_id;
      out.push_back(std::move(f));
    }
    else {
      Finding f;
      f.id = reason;
      f.category = "COMPILE_ERROR";
      f.severity = Severity::HIGH;
      f.stage = Stage::COMPILE;
      f.message = "the project does not build";
      out.push_back(std::move(f));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Finding& a, const Finding& b) {
    if (a.severity != b.severity)
      return a.severity > b.severity;
    if (a.stage != b.stage)
      return a.stage < b.stage;
    return a.location < b.location;
  });
  return out;
}

Hint Coach::next_hint(const AssessmentReport& report, std::span<const Hint> history, const ChallengeBundle& bundle,
                      Timestamp now) const
{
  if (report.verdict.acceptable)
    throw CoachError("AlreadyAcceptable", "the submission is acceptable; no hint needed");
  if (!history.empty()) {
    Timestamp wait = history.back().issued_at + Timestamp{config_.cooldown_seconds} * 1000 - now;
    if (wait > 0)
      throw CoachError("Cooldown", "next hint available in " + std::to_string((wait + 999) / 1000) + " s");
  }

  std::map<std::string, int> issued;
  for (const auto& h : history)
    if (h.finding_ref)
      issued[*h.finding_ref] = std::max(issued[*h.finding_ref], h.level);

  Hint hint;
  hint.issued_at = now;
  const auto targets = hint_targets(report);
  auto target = std::find_if(targets.begin(), targets.end(), [&](const Finding& f) { return issued[f.id] < 3; });
  if (target == targets.end()) {
    hint.level = 3;
    hint.text = generic_text(bundle);
    return hint;
  }
  hint.level = issued[target->id] + 1;
  hint.finding_ref = target->id;

  // Bundle ladder first, then the shipped pack, then the catch-all. A
  // template that lacks data for this finding or would quote the reference
  // solution is skipped.
  const auto forbidden = solution_lines(bundle);
  const auto& pack = default_hint_pack();
  const HintTemplate file_only{std::string(kAnyCategory), 2, kFileOnlyLevel2};
  std::vector<const HintTemplate*> candidates{
    find_template(bundle.hint_ladder, target->category, hint.level),
    find_template(pack, target->category, hint.level),
    hint.level == 2 ? &file_only : nullptr,
    find_template(pack, kAnyCategory, hint.level),
    find_template(pack, target->category, 1),
    find_template(pack, kAnyCategory, 1),
  };
  for (const HintTemplate* t : candidates) {
    if (!t)
      continue;
    try {
      std::string text = render_hint(*t, *target);
      if (!text.empty() && !leaks(text, forbidden)) {
        hint.text = std::move(text);
        return hint;
      }
    } catch (const CoachError&) {
    }
  }
  hint.text = "Your submission is not acceptable yet. Review the report for " + target->category + ".";
  return hint;
}

json to_json(const Hint& h)
{
  return {{"level", h.level},
          {"text", h.text},
          {"finding_ref", h.finding_ref ? json(*h.finding_ref) : json(nullptr)},
          {"issued_at", h.issued_at}};
}

Hint hint_from_json(const json& j)
{
  Hint h;
  h.level = j.at("level").get<int>();
  h.text = j.at("text").get<std::string>();
  if (auto it = j.find("finding_ref"); it != j.end() && !it->is_null())
    h.finding_ref = it->get<std::string>();
  h.issued_at = j.at("issued_at").get<Timestamp>();
  return h;
}

} // namespace csc
