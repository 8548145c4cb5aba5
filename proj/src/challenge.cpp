#include "csc/challenge.hpp"

#include "csc/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>
#include <utility>

namespace csc {

using nlohmann::json;

namespace {

template<class E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

constexpr NameTable<Track, 4> kTrackNames{{
  {Track::C, "C"}, {Track::CPP, "CPP"}, {Track::WEB, "WEB"}, {Track::JAVA, "JAVA"},
}};

constexpr NameTable<ChallengeKind, 6> kKindNames{{
  {ChallengeKind::SCQ, "SCQ"},
  {ChallengeKind::MCQ, "MCQ"},
  {ChallengeKind::TEQ, "TEQ"},
  {ChallengeKind::ALR, "ALR"},
  {ChallengeKind::CSC, "CSC"},
  {ChallengeKind::CEC, "CEC"},
}};

constexpr NameTable<GuidelineSource, 4> kSourceNames{{
  {GuidelineSource::CERT_C, "CERT_C"},
  {GuidelineSource::CERT_JAVA, "CERT_JAVA"},
  {GuidelineSource::OWASP, "OWASP"},
  {GuidelineSource::INTERNAL, "INTERNAL"},
}};

constexpr NameTable<Severity, 5> kSeverityNames{{
  {Severity::INFO, "INFO"},
  {Severity::LOW, "LOW"},
  {Severity::MEDIUM, "MEDIUM"},
  {Severity::HIGH, "HIGH"},
  {Severity::CRITICAL, "CRITICAL"},
}};

template<class E, std::size_t N>
std::string_view name_of(const NameTable<E, N>& table, E value)
{
  for (const auto& [e, name] : table) {
    if (e == value)
      return name;
  }
  return "?";
}

template<class E, std::size_t N>
std::optional<E> parse_name(const NameTable<E, N>& table, std::string_view text)
{
  for (const auto& [e, name] : table) {
    if (name == text)
      return e;
  }
  return std::nullopt;
}

[[noreturn]] void schema_violation(const std::string& field, const std::string& why)
{
  throw BundleError("SchemaViolation", "schema violation at '" + field + "': " + why);
}

const json& require(const json& obj, const char* key, const std::string& ctx)
{
  if (!obj.is_object())
    schema_violation(ctx, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end())
    schema_violation(ctx.empty() ? key : ctx + "." + key, "missing");
  return *it;
}

std::string field_path(const std::string& ctx, std::string_view key)
{
  return ctx.empty() ? std::string(key) : ctx + "." + std::string(key);
}

std::string require_string(const json& obj, const char* key, const std::string& ctx)
{
  const json& v = require(obj, key, ctx);
  if (!v.is_string())
    schema_violation(field_path(ctx, key), "expected a string");
  return v.get<std::string>();
}

std::string optional_string(const json& obj, const char* key, const std::string& ctx, std::string fallback = {})
{
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null())
    return fallback;
  if (!it->is_string())
    schema_violation(field_path(ctx, key), "expected a string");
  return it->get<std::string>();
}

long long require_integer(const json& obj, const char* key, const std::string& ctx)
{
  const json& v = require(obj, key, ctx);
  if (!v.is_number_integer())
    schema_violation(field_path(ctx, key), "expected an integer");
  return v.get<long long>();
}

std::vector<std::string> string_list(const json& v, const std::string& ctx)
{
  if (!v.is_array())
    schema_violation(ctx, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string())
      schema_violation(ctx + "[" + std::to_string(i) + "]", "expected a string");
    out.push_back(v[i].get<std::string>());
  }
  return out;
}

std::size_t index_value(const json& v, const std::string& ctx)
{
  if (!v.is_number_integer() || v.get<long long>() < 0)
    schema_violation(ctx, "expected a non-negative integer");
  return v.get<std::size_t>();
}

template<class E, std::size_t N>
E require_enum(const NameTable<E, N>& table, const json& obj, const char* key, const std::string& ctx)
{
  std::string text = require_string(obj, key, ctx);
  auto value = parse_name(table, text);
  if (!value)
    schema_violation(field_path(ctx, key), "unknown value '" + text + "'");
  return *value;
}

std::map<std::string, std::string> file_map(const json& v, const std::string& ctx)
{
  if (!v.is_object())
    schema_violation(ctx, "expected an object of path -> contents");
  std::map<std::string, std::string> out;
  for (const auto& [path, contents] : v.items()) {
    check_relative_path(path);
    if (!contents.is_string())
      schema_violation(ctx + "." + path, "expected file contents");
    out.emplace(path, contents.get<std::string>());
  }
  return out;
}

// ---- questions -------------------------------------------------------------

void validate_question(const Question& q, const std::string& ctx);

void validate_options(const std::vector<std::string>& options, const std::string& ctx)
{
  if (options.empty())
    schema_violation(ctx + ".options", "at least one option required");
}

void validate_question(const Question& q, const std::string& ctx)
{
  std::visit(
    [&](const auto& v) {
      using T = std::decay_t<decltype(v)>;
      if constexpr (std::is_same_v<T, SingleChoice>) {
        validate_options(v.options, ctx);
        if (v.correct >= v.options.size())
          schema_violation(ctx + ".correct", "index out of range");
      }
      else if constexpr (std::is_same_v<T, MultipleChoice>) {
        validate_options(v.options, ctx);
        if (v.correct.empty())
          schema_violation(ctx + ".correct", "at least one correct option required");
        if (*v.correct.rbegin() >= v.options.size())
          schema_violation(ctx + ".correct", "index out of range");
      }
      else if constexpr (std::is_same_v<T, TextEntry>) {
        if (v.accepted.empty())
          schema_violation(ctx + ".accepted", "at least one accepted answer required");
      }
      else if constexpr (std::is_same_v<T, AssociateLeftRight>) {
        if (v.left.empty() || v.right.empty())
          schema_violation(ctx, "left and right lists must be non-empty");
        if (v.correct_pairs.empty())
          schema_violation(ctx + ".correct_pairs", "at least one pair required");
        std::set<std::size_t> rights;
        for (const auto& [l, r] : v.correct_pairs) {
          if (l >= v.left.size() || r >= v.right.size())
            schema_violation(ctx + ".correct_pairs", "index out of range");
          if (!rights.insert(r).second)
            schema_violation(ctx + ".correct_pairs", "right item used twice");
        }
      }
      else if constexpr (std::is_same_v<T, CodeSnippet>) {
        if (v.snippet.empty())
          schema_violation(ctx + ".snippet", "empty snippet");
        std::visit([&](const auto& inner) { validate_question(Question(inner), ctx + ".inner"); }, v.inner);
      }
    },
    q);
}

} // namespace

std::string_view to_string(Track v) { return name_of(kTrackNames, v); }
std::string_view to_string(ChallengeKind v) { return name_of(kKindNames, v); }
std::string_view to_string(GuidelineSource v) { return name_of(kSourceNames, v); }
std::string_view to_string(Severity v) { return name_of(kSeverityNames, v); }

std::optional<Track> parse_track(std::string_view s) { return parse_name(kTrackNames, s); }
std::optional<ChallengeKind> parse_kind(std::string_view s) { return parse_name(kKindNames, s); }
std::optional<GuidelineSource> parse_guideline_source(std::string_view s) { return parse_name(kSourceNames, s); }
std::optional<Severity> parse_severity(std::string_view s) { return parse_name(kSeverityNames, s); }

const Phase& ChallengeBundle::phase(int index) const
{
  for (const auto& p : phases) {
    if (p.index == index)
      return p;
  }
  throw BundleError("PhaseGap", "bundle '" + id + "' has no phase " + std::to_string(index));
}

bool is_scorable(const Phase& phase)
{
  return phase.index == 2 || (phase.index == 3 && phase.question.has_value());
}

void check_relative_path(std::string_view path)
{
  auto reject = [&](const char* why) {
    throw BundleError("PathTraversal", "illegal project path '" + std::string(path) + "': " + why);
  };
  if (path.empty())
    reject("empty");
  if (path.front() == '/' || path.front() == '\\')
    reject("absolute");
  if (path.find('\0') != std::string_view::npos)
    reject("NUL byte");
  std::size_t start = 0;
  while (start <= path.size()) {
    std::size_t end = path.find_first_of("/\\", start);
    if (end == std::string_view::npos)
      end = path.size();
    std::string_view part = path.substr(start, end - start);
    if (part == "..")
      reject("parent traversal");
    if (part.empty() && end != path.size())
      reject("empty component");
    start = end + 1;
  }
}

json to_json(const Question& question)
{
  return std::visit(
    [](const auto& v) -> json {
      using T = std::decay_t<decltype(v)>;
      if constexpr (std::is_same_v<T, SingleChoice>)
        return {{"type", "SCQ"}, {"options", v.options}, {"correct", v.correct}};
      else if constexpr (std::is_same_v<T, MultipleChoice>)
        return {{"type", "MCQ"}, {"options", v.options}, {"correct", v.correct}};
      else if constexpr (std::is_same_v<T, TextEntry>)
        return {{"type", "TEQ"}, {"accepted", v.accepted}};
      else if constexpr (std::is_same_v<T, AssociateLeftRight>) {
        json pairs = json::array();
        for (const auto& [l, r] : v.correct_pairs)
          pairs.push_back({l, r});
        return {{"type", "ALR"}, {"left", v.left}, {"right", v.right}, {"correct_pairs", pairs}};
      }
      else {
        json inner = std::visit([](const auto& q) { return to_json(Question(q)); }, v.inner);
        return {{"type", "CSC"}, {"snippet", v.snippet}, {"inner", inner}};
      }
    },
    question);
}

json public_view(const Question& question)
{
  return std::visit(
    [](const auto& v) -> json {
      using T = std::decay_t<decltype(v)>;
      if constexpr (std::is_same_v<T, SingleChoice>)
        return {{"type", "SCQ"}, {"options", v.options}};
      else if constexpr (std::is_same_v<T, MultipleChoice>)
        return {{"type", "MCQ"}, {"options", v.options}};
      else if constexpr (std::is_same_v<T, TextEntry>)
        return {{"type", "TEQ"}};
      else if constexpr (std::is_same_v<T, AssociateLeftRight>)
        return {{"type", "ALR"}, {"left", v.left}, {"right", v.right}};
      else {
        json inner = std::visit([](const auto& q) { return public_view(Question(q)); }, v.inner);
        return {{"type", "CSC"}, {"snippet", v.snippet}, {"inner", inner}};
      }
    },
    question);
}

Question question_from_json(const json& j, std::string_view field)
{
  const std::string ctx(field);
  std::string type = require_string(j, "type", ctx);
  if (type == "SCQ") {
    SingleChoice q;
    q.options = string_list(require(j, "options", ctx), ctx + ".options");
    q.correct = index_value(require(j, "correct", ctx), ctx + ".correct");
    return q;
  }
  if (type == "MCQ") {
    MultipleChoice q;
    q.options = string_list(require(j, "options", ctx), ctx + ".options");
    const json& correct = require(j, "correct", ctx);
    if (!correct.is_array())
      schema_violation(ctx + ".correct", "expected an array of indices");
    for (const auto& c : correct)
      q.correct.insert(index_value(c, ctx + ".correct"));
    return q;
  }
  if (type == "TEQ") {
    TextEntry q;
    q.accepted = string_list(require(j, "accepted", ctx), ctx + ".accepted");
    return q;
  }
  if (type == "ALR") {
    AssociateLeftRight q;
    q.left = string_list(require(j, "left", ctx), ctx + ".left");
    q.right = string_list(require(j, "right", ctx), ctx + ".right");
    const json& pairs = require(j, "correct_pairs", ctx);
    if (!pairs.is_array())
      schema_violation(ctx + ".correct_pairs", "expected an array of [left, right] pairs");
    for (const auto& p : pairs) {
      if (!p.is_array() || p.size() != 2)
        schema_violation(ctx + ".correct_pairs", "expected [left, right]");
      std::size_t l = index_value(p[0], ctx + ".correct_pairs");
      std::size_t r = index_value(p[1], ctx + ".correct_pairs");
      if (!q.correct_pairs.emplace(l, r).second)
        schema_violation(ctx + ".correct_pairs", "left item used twice");
    }
    return q;
  }
  if (type == "CSC") {
    CodeSnippet q;
    q.snippet = require_string(j, "snippet", ctx);
    Question inner = question_from_json(require(j, "inner", ctx), ctx + ".inner");
    if (auto* s = std::get_if<SingleChoice>(&inner))
      q.inner = *s;
    else if (auto* m = std::get_if<MultipleChoice>(&inner))
      q.inner = *m;
    else if (auto* t = std::get_if<TextEntry>(&inner))
      q.inner = *t;
    else
      schema_violation(ctx + ".inner", "inner question must be SCQ, MCQ or TEQ");
    return q;
  }
  schema_violation(ctx + ".type", "unknown question type '" + type + "'");
}

namespace {

GuidelineRef guideline_from_json(const json& j, const std::string& ctx)
{
  GuidelineRef g;
  g.source = require_enum(kSourceNames, j, "source", ctx);
  g.rule_id = require_string(j, "rule_id", ctx);
  if (auto it = j.find("url"); it != j.end() && !it->is_null()) {
    if (!it->is_string())
      schema_violation(ctx + ".url", "expected a string");
    g.url = it->get<std::string>();
  }
  return g;
}

json guideline_to_json(const GuidelineRef& g)
{
  json j{{"source", to_string(g.source)}, {"rule_id", g.rule_id}};
  if (g.url)
    j["url"] = *g.url;
  return j;
}

CodeProject project_from_json(const json& j)
{
  const std::string ctx = "project";
  CodeProject p;
  p.files = file_map(require(j, "files", ctx), ctx + ".files");
  if (auto it = j.find("build"); it != j.end()) {
    p.build.compiler_profile = optional_string(*it, "compiler", ctx + ".build", p.build.compiler_profile);
    p.build.flags_profile = optional_string(*it, "flags", ctx + ".build", p.build.flags_profile);
    p.build.entry = optional_string(*it, "entry", ctx + ".build", p.build.entry);
  }
  const json& tests = require(j, "tests", ctx);
  if (!tests.is_array())
    schema_violation(ctx + ".tests", "expected an array");
  for (std::size_t i = 0; i < tests.size(); ++i) {
    const std::string tctx = ctx + ".tests[" + std::to_string(i) + "]";
    IoTest t;
    t.id = require_string(tests[i], "id", tctx);
    if (auto it = tests[i].find("argv"); it != tests[i].end())
      t.argv = string_list(*it, tctx + ".argv");
    t.stdin_data = optional_string(tests[i], "stdin", tctx);
    t.expected_stdout = optional_string(tests[i], "expected_stdout", tctx);
    if (auto it = tests[i].find("expected_exit"); it != tests[i].end())
      t.expected_exit = static_cast<int>(require_integer(tests[i], "expected_exit", tctx));
    p.functional_tests.push_back(std::move(t));
  }
  if (auto it = j.find("threshold"); it != j.end())
    p.banned_findings_threshold = require_enum(kSeverityNames, j, "threshold", ctx);
  if (auto it = j.find("solution"); it != j.end() && !it->is_null())
    p.solution_files = file_map(*it, ctx + ".solution");
  return p;
}

json project_to_json(const CodeProject& p)
{
  json tests = json::array();
  for (const auto& t : p.functional_tests) {
    tests.push_back({{"id", t.id},
                     {"argv", t.argv},
                     {"stdin", t.stdin_data},
                     {"expected_stdout", t.expected_stdout},
                     {"expected_exit", t.expected_exit}});
  }
  json j{{"files", p.files},
         {"build",
          {{"compiler", p.build.compiler_profile}, {"flags", p.build.flags_profile}, {"entry", p.build.entry}}},
         {"tests", tests},
         {"threshold", to_string(p.banned_findings_threshold)}};
  if (!p.solution_files.empty())
    j["solution"] = p.solution_files;
  return j;
}

bool question_matches_kind(ChallengeKind kind, const Question& q)
{
  switch (kind) {
    case ChallengeKind::SCQ: return std::holds_alternative<SingleChoice>(q);
    case ChallengeKind::MCQ: return std::holds_alternative<MultipleChoice>(q);
    case ChallengeKind::TEQ: return std::holds_alternative<TextEntry>(q);
    case ChallengeKind::ALR: return std::holds_alternative<AssociateLeftRight>(q);
    case ChallengeKind::CSC: return std::holds_alternative<CodeSnippet>(q);
    case ChallengeKind::CEC: return false;
  }
  return false;
}

constexpr double kFractionTolerance = 1e-9;

std::string read_file(const std::filesystem::path& path, const std::string& field)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    schema_violation(field, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

void validate_bundle(const ChallengeBundle& b)
{
  static const std::regex kIdPattern("[a-z0-9-]{1,64}");
  if (!std::regex_match(b.id, kIdPattern))
    schema_violation("id", "must match [a-z0-9-]{1,64}");
  if (b.title.empty())
    schema_violation("title", "empty");
  if (b.points <= 0)
    schema_violation("points", "must be positive");
  for (std::size_t i = 0; i < b.guideline_refs.size(); ++i) {
    if (b.guideline_refs[i].rule_id.empty())
      schema_violation("guidelines[" + std::to_string(i) + "].rule_id", "empty");
  }

  std::set<int> seen;
  for (const auto& p : b.phases) {
    if (p.index < 1 || p.index > 3)
      schema_violation("phases", "phase index " + std::to_string(p.index) + " outside 1..3");
    if (!seen.insert(p.index).second)
      schema_violation("phases", "duplicate phase index " + std::to_string(p.index));
  }
  for (int k = 1; k <= 3; ++k) {
    if (!seen.contains(k))
      throw BundleError("PhaseGap", "bundle '" + b.id + "' is missing phase " + std::to_string(k));
  }

  double scorable_sum = 0.0;
  for (const auto& p : b.phases) {
    const std::string ctx = "phases[" + std::to_string(p.index) + "]";
    if (p.index == 1 && p.question)
      schema_violation(ctx + ".question", "phase 1 is an introduction and cannot carry a question");
    if (p.question)
      validate_question(*p.question, ctx + ".question");
    if (is_scorable(p)) {
      if (!(p.awards_fraction > 0.0 && p.awards_fraction <= 1.0))
        schema_violation(ctx + ".awards_fraction", "must lie in (0, 1]");
      scorable_sum += p.awards_fraction;
    }
    else if (p.awards_fraction != 0.0) {
      schema_violation(ctx + ".awards_fraction", "phase has no scorable payload");
    }
  }
  if (std::abs(scorable_sum - 1.0) > kFractionTolerance)
    schema_violation("phases", "awards_fraction of scorable phases must sum to 1");

  const Phase& challenge_phase = b.phase(2);
  if (b.kind == ChallengeKind::CEC) {
    if (!b.project)
      schema_violation("project", "required for CEC bundles");
    if (challenge_phase.question)
      schema_violation("phases[2].question", "CEC phase 2 is the code project, not a question");
  }
  else {
    if (b.project)
      schema_violation("project", "only CEC bundles carry a code project");
    if (!challenge_phase.question)
      schema_violation("phases[2].question", "required for quiz kinds");
    if (!question_matches_kind(b.kind, *challenge_phase.question))
      schema_violation("phases[2].question", "question type does not match kind " + std::string(to_string(b.kind)));
    if (!b.hint_ladder.empty())
      schema_violation("hints", "hint ladders are only defined for CEC bundles");
  }

  if (b.project) {
    const CodeProject& p = *b.project;
    if (p.files.empty())
      schema_violation("project.files", "at least one file required");
    for (const auto& [path, _] : p.files)
      check_relative_path(path);
    if (p.functional_tests.empty())
      schema_violation("project.tests", "at least one functional test required");
    std::set<std::string> ids;
    for (const auto& t : p.functional_tests) {
      if (t.id.empty() || !ids.insert(t.id).second)
        schema_violation("project.tests", "test ids must be unique and non-empty");
    }
    for (const auto& [path, _] : p.solution_files) {
      check_relative_path(path);
      if (!p.files.contains(path))
        schema_violation("project.solution", "solution file '" + path + "' is not a project file");
    }
  }

  for (std::size_t i = 0; i < b.hint_ladder.size(); ++i) {
    const auto& h = b.hint_ladder[i];
    const std::string ctx = "hints[" + std::to_string(i) + "]";
    if (h.level < 1 || h.level > 3)
      schema_violation(ctx + ".level", "must be 1, 2 or 3");
    if (h.text.empty() || h.category.empty())
      schema_violation(ctx, "category and text must be non-empty");
  }
}

ChallengeBundle bundle_from_json(const json& j)
{
  if (!j.is_object())
    schema_violation("", "manifest must be a JSON object");
  ChallengeBundle b;
  b.id = require_string(j, "id", "");
  b.title = require_string(j, "title", "");
  b.track = require_enum(kTrackNames, j, "track", "");
  b.kind = require_enum(kKindNames, j, "kind", "");
  b.points = static_cast<int>(require_integer(j, "points", ""));

  if (auto it = j.find("guidelines"); it != j.end()) {
    if (!it->is_array())
      schema_violation("guidelines", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i)
      b.guideline_refs.push_back(guideline_from_json((*it)[i], "guidelines[" + std::to_string(i) + "]"));
  }

  const json& phases = require(j, "phases", "");
  if (!phases.is_array())
    schema_violation("phases", "expected an array");
  std::vector<bool> explicit_fraction;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const std::string ctx = "phases[" + std::to_string(i) + "]";
    Phase p;
    p.index = static_cast<int>(require_integer(phases[i], "index", ctx));
    p.body = optional_string(phases[i], "body", ctx);
    if (auto it = phases[i].find("question"); it != phases[i].end() && !it->is_null())
      p.question = question_from_json(*it, ctx + ".question");
    auto frac = phases[i].find("awards_fraction");
    if (frac != phases[i].end() && !frac->is_null()) {
      if (!frac->is_number())
        schema_violation(ctx + ".awards_fraction", "expected a number");
      p.awards_fraction = frac->get<double>();
      explicit_fraction.push_back(true);
    }
    else {
      explicit_fraction.push_back(false);
    }
    b.phases.push_back(std::move(p));
  }

  // Default split: phase 2 takes 0.8 and a questioned phase 3 takes 0.2;
  // phase 2 takes everything otherwise.
  bool phase3_scores = std::any_of(b.phases.begin(), b.phases.end(), [](const Phase& p) {
    return p.index == 3 && p.question.has_value();
  });
  for (std::size_t i = 0; i < b.phases.size(); ++i) {
    Phase& p = b.phases[i];
    if (explicit_fraction[i])
      continue;
    if (p.index == 2)
      p.awards_fraction = phase3_scores ? 0.8 : 1.0;
    else if (p.index == 3 && p.question)
      p.awards_fraction = 0.2;
  }
  std::stable_sort(b.phases.begin(), b.phases.end(), [](const Phase& a, const Phase& c) { return a.index < c.index; });

  if (auto it = j.find("project"); it != j.end() && !it->is_null())
    b.project = project_from_json(*it);

  if (auto it = j.find("hints"); it != j.end()) {
    if (!it->is_array())
      schema_violation("hints", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string ctx = "hints[" + std::to_string(i) + "]";
      HintTemplate h;
      h.category = require_string((*it)[i], "category", ctx);
      h.level = static_cast<int>(require_integer((*it)[i], "level", ctx));
      h.text = require_string((*it)[i], "text", ctx);
      b.hint_ladder.push_back(std::move(h));
    }
  }

  validate_bundle(b);
  return b;
}

json to_json(const GuidelineRef& g)
{
  return guideline_to_json(g);
}

GuidelineRef guideline_from_json(const json& j)
{
  return guideline_from_json(j, "guideline");
}

json to_json(const ChallengeBundle& b)
{
  json guidelines = json::array();
  for (const auto& g : b.guideline_refs)
    guidelines.push_back(guideline_to_json(g));
  json phases = json::array();
  for (const auto& p : b.phases) {
    json pj{{"index", p.index}, {"body", p.body}, {"awards_fraction", p.awards_fraction}};
    if (p.question)
      pj["question"] = to_json(*p.question);
    phases.push_back(std::move(pj));
  }
  json hints = json::array();
  for (const auto& h : b.hint_ladder)
    hints.push_back({{"category", h.category}, {"level", h.level}, {"text", h.text}});

  json j{{"id", b.id},
         {"title", b.title},
         {"track", to_string(b.track)},
         {"kind", to_string(b.kind)},
         {"points", b.points},
         {"guidelines", guidelines},
         {"phases", phases},
         {"hints", hints}};
  if (b.project)
    j["project"] = project_to_json(*b.project);
  return j;
}

ChallengeBundle load_bundle(const std::filesystem::path& root)
{
  namespace fs = std::filesystem;
  const fs::path manifest_path = root / "challenge.json";
  if (!fs::is_regular_file(manifest_path))
    throw BundleError("ManifestMissing", "no challenge.json in '" + root.string() + "'");

  json manifest;
  try {
    std::ifstream in(manifest_path);
    manifest = json::parse(in);
  }
  catch (const json::parse_error& e) {
    schema_violation("challenge.json", e.what());
  }
  if (!manifest.is_object())
    schema_violation("", "manifest must be a JSON object");

  // Inline phase bodies stored next to the manifest.
  if (auto it = manifest.find("phases"); it != manifest.end() && it->is_array()) {
    for (std::size_t i = 0; i < it->size(); ++i) {
      json& phase = (*it)[i];
      if (!phase.is_object())
        continue;
      if (auto bf = phase.find("body_file"); bf != phase.end()) {
        const std::string ctx = "phases[" + std::to_string(i) + "].body_file";
        if (!bf->is_string())
          schema_violation(ctx, "expected a string");
        std::string rel = bf->get<std::string>();
        check_relative_path(rel);
        phase["body"] = read_file(root / rel, ctx);
        phase.erase("body_file");
      }
    }
  }

  // On disk the project lists paths; inline form carries contents.
  if (auto it = manifest.find("project"); it != manifest.end() && it->is_object()) {
    json& project = *it;
    const json& files = require(project, "files", "project");
    if (!files.is_array())
      schema_violation("project.files", "expected an array of paths relative to files/");
    json inline_files = json::object();
    for (const auto& path : string_list(files, "project.files")) {
      check_relative_path(path);
      inline_files[path] = read_file(root / "files" / path, "project.files");
    }

    json inline_solution = json::object();
    if (auto sol = project.find("solution"); sol != project.end() && !sol->is_null()) {
      if (!sol->is_string())
        schema_violation("project.solution", "expected a directory name");
      std::string dir = sol->get<std::string>();
      check_relative_path(dir);
      for (const auto& path : string_list(files, "project.files")) {
        fs::path candidate = root / dir / path;
        if (fs::is_regular_file(candidate))
          inline_solution[path] = read_file(candidate, "project.solution");
      }
    }

    if (auto tests = project.find("tests"); tests != project.end() && tests->is_array()) {
      for (std::size_t i = 0; i < tests->size(); ++i) {
        json& t = (*tests)[i];
        const std::string ctx = "project.tests[" + std::to_string(i) + "]";
        for (auto [file_key, key] : {std::pair{"stdin_file", "stdin"}, std::pair{"expected_stdout_file", "expected_stdout"}}) {
          if (auto f = t.find(file_key); f != t.end()) {
            if (!f->is_string())
              schema_violation(ctx + "." + file_key, "expected a string");
            std::string rel = f->get<std::string>();
            check_relative_path(rel);
            t[key] = read_file(root / "tests" / rel, ctx + "." + file_key);
            t.erase(file_key);
          }
        }
      }
    }

    project["files"] = std::move(inline_files);
    if (inline_solution.empty())
      project.erase("solution");
    else
      project["solution"] = std::move(inline_solution);
  }

  return bundle_from_json(manifest);
}

std::vector<Phase> phase_sequence(const ChallengeBundle& bundle)
{
  std::vector<Phase> out = bundle.phases;
  std::sort(out.begin(), out.end(), [](const Phase& a, const Phase& b) { return a.index < b.index; });
  return out;
}

json ValidationReport::to_json() const
{
  json list = json::array();
  for (const auto& i : issues)
    list.push_back({{"code", i.code}, {"bundle", i.bundle_id}, {"detail", i.detail}});
  return {{"valid", valid()}, {"issues", list}};
}

ValidationReport validate_event(std::span<const ChallengeBundle> bundles, const SolutionCheck& check)
{
  ValidationReport report;
  std::map<std::string, int> counts;
  for (const auto& b : bundles)
    ++counts[b.id];
  for (const auto& [id, n] : counts) {
    if (n > 1)
      report.issues.push_back({"DuplicateId", id, std::to_string(n) + " bundles share this id"});
  }
  for (const auto& b : bundles) {
    if (b.points <= 0)
      report.issues.push_back({"ZeroPoints", b.id, "bundle awards no points"});
    if (check && b.kind == ChallengeKind::CEC && b.project && !b.project->solution_files.empty()) {
      if (auto failure = check(b))
        report.issues.push_back({"SolutionNotAcceptable", b.id, *failure});
    }
  }
  return report;
}

} // namespace csc
