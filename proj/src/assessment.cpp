#include "csc/assessment.hpp"

#include "csc/error.hpp"

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

namespace csc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kStageNames[] = {"COMPILE", "STATIC", "DYNAMIC", "FUNCTIONAL"};
constexpr std::string_view kStageStatusNames[] = {"ran", "skipped", "failed-to-run"};

GuidelineRef cert(std::string rule)
{
  return GuidelineRef{GuidelineSource::CERT_C, std::move(rule), std::nullopt};
}

std::string hex64(std::uint64_t v)
{
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool is_c_source(const std::string& path)
{
  return fs::path(path).extension() == ".c";
}

bool is_cxx_source(const std::string& path)
{
  auto ext = fs::path(path).extension();
  return ext == ".cc" || ext == ".cpp" || ext == ".cxx";
}

// Project file a tool-reported path refers to: exact match, "./" prefix, or
// an absolute path ending in "/<file>". Longest match wins.
std::optional<std::string> project_file(std::string_view reported, const std::map<std::string, std::string>& files)
{
  if (reported.starts_with("./"))
    reported.remove_prefix(2);
  if (files.count(std::string(reported)))
    return std::string(reported);
  std::optional<std::string> best;
  for (const auto& [path, _] : files) {
    if (reported.size() > path.size() && reported.ends_with(path) && reported[reported.size() - path.size() - 1] == '/')
      if (!best || path.size() > best->size())
        best = path;
  }
  return best;
}

// Where to pin findings that have no source line: the first source file.
std::string fallback_file(const std::map<std::string, std::string>& files)
{
  for (const auto& [path, _] : files)
    if (is_c_source(path) || is_cxx_source(path))
      return path;
  return files.empty() ? std::string() : files.begin()->first;
}

std::string quoted_excerpt(std::string_view s)
{
  std::string out = "\"";
  for (char c : s.substr(0, 60)) {
    if (c == '"' || c == '\\')
      out += '\\';
    if (static_cast<unsigned char>(c) < 0x20) {
      char buf[8];
      std::snprintf(buf, sizeof buf, "\\x%02x", static_cast<unsigned char>(c));
      out += buf;
      continue;
    }
    out += c;
  }
  if (s.size() > 60)
    out += "...";
  return out + "\"";
}

ExecutionRequest command(std::vector<std::string> argv)
{
  ExecutionRequest req;
  req.argv = std::move(argv);
  return req;
}

std::vector<std::string_view> split_lines(std::string_view s)
{
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < s.size()) {
    std::size_t nl = s.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(s.substr(start));
      break;
    }
    lines.push_back(s.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::string trim(std::string_view s)
{
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos)
    return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

} // namespace

// ---- enums -----------------------------------------------------------------

std::string_view to_string(Stage s)
{
  return kStageNames[static_cast<int>(s)];
}

std::optional<Stage> parse_stage(std::string_view s)
{
  for (int i = 0; i < 4; ++i)
    if (kStageNames[i] == s)
      return static_cast<Stage>(i);
  return std::nullopt;
}

std::string_view to_string(StageStatus s)
{
  return kStageStatusNames[static_cast<int>(s)];
}

// ---- findings ----------------------------------------------------------------

std::string finding_id(std::string_view category, const Location& loc)
{
  return std::string(category) + "@" + loc.file + ":" + std::to_string(loc.line);
}

Finding make_finding(std::string category, Severity severity, Location loc, std::string message, Stage stage,
                     std::optional<GuidelineRef> guideline)
{
  Finding f;
  f.id = finding_id(category, loc);
  f.category = std::move(category);
  f.severity = severity;
  f.location = std::move(loc);
  f.message = std::move(message);
  f.stage = stage;
  f.guideline = std::move(guideline);
  return f;
}

json to_json(const Finding& f)
{
  json j{{"id", f.id},
         {"category", f.category},
         {"severity", to_string(f.severity)},
         {"file", f.location.file},
         {"line", f.location.line},
         {"message", f.message},
         {"stage", to_string(f.stage)}};
  if (f.guideline)
    j["guideline"] = to_json(*f.guideline);
  if (f.test_id)
    j["test_id"] = *f.test_id;
  return j;
}

Finding finding_from_json(const json& j)
{
  try {
    Finding f;
    f.category = j.at("category").get<std::string>();
    auto sev = parse_severity(j.at("severity").get<std::string>());
    auto stage = parse_stage(j.at("stage").get<std::string>());
    if (!sev || !stage)
      throw AssessmentError("SchemaViolation", "finding has an unknown severity or stage");
    f.severity = *sev;
    f.stage = *stage;
    f.location = {j.at("file").get<std::string>(), j.at("line").get<int>()};
    f.message = j.at("message").get<std::string>();
    f.id = j.value("id", finding_id(f.category, f.location));
    if (auto it = j.find("guideline"); it != j.end())
      f.guideline = guideline_from_json(*it);
    if (auto it = j.find("test_id"); it != j.end())
      f.test_id = it->get<std::string>();
    return f;
  } catch (const json::exception& e) {
    throw AssessmentError("SchemaViolation", std::string("malformed finding: ") + e.what());
  }
}

std::vector<Finding> normalize_findings(std::vector<Finding> findings)
{
  std::sort(findings.begin(), findings.end(), [](const Finding& a, const Finding& b) {
    return std::tie(a.location, a.category, a.stage, a.severity, a.message) <
           std::tie(b.location, b.category, b.stage, b.severity, b.message);
  });
  std::vector<Finding> out;
  for (auto& f : findings) {
    if (!out.empty() && out.back().category == f.category && out.back().location == f.location) {
      Finding& kept = out.back();
      if (f.severity > kept.severity) {
        kept.severity = f.severity;
        kept.message = f.message;
      }
      if (!kept.guideline)
        kept.guideline = f.guideline;
      if (!kept.test_id)
        kept.test_id = f.test_id;
      continue;
    }
    f.id = finding_id(f.category, f.location);
    out.push_back(std::move(f));
  }
  return out;
}

// ---- verdict -------------------------------------------------------------------

Verdict verdict(std::span<const Finding> findings, std::span<const FunctionalResult> functional, Severity threshold,
                bool compile_ok)
{
  Verdict v;
  for (const auto& f : findings)
    if (f.severity >= threshold)
      v.reasons.push_back(f.id);
  for (const auto& r : functional)
    if (!r.passed)
      v.reasons.push_back(r.test_id);
  if (!compile_ok && v.reasons.empty())
    v.reasons.push_back("compile");
  v.acceptable = v.reasons.empty();
  return v;
}

const Finding* AssessmentReport::find(std::string_view id) const
{
  for (const auto& f : findings)
    if (f.id == id)
      return &f;
  return nullptr;
}

const FunctionalResult* AssessmentReport::functional_result(std::string_view test_id) const
{
  for (const auto& r : functional)
    if (r.test_id == test_id)
      return &r;
  return nullptr;
}

Verdict AssessmentReport::recompute_verdict() const
{
  return csc::verdict(findings, functional, threshold, compile_ok);
}

json to_json(const AssessmentReport& r, bool include_timings)
{
  json stages = json::array();
  for (const auto& s : r.stage_results) {
    json j{{"stage", to_string(s.stage)}, {"status", to_string(s.status)}, {"detail", s.detail}};
    if (include_timings)
      j["seconds"] = s.seconds;
    stages.push_back(std::move(j));
  }
  json findings = json::array();
  for (const auto& f : r.findings)
    findings.push_back(to_json(f));
  json functional = json::array();
  for (const auto& f : r.functional)
    functional.push_back({{"test_id", f.test_id},
                          {"passed", f.passed},
                          {"expected_exit", f.expected_exit},
                          {"actual_exit", f.actual_exit},
                          {"outcome", f.outcome},
                          {"diff", f.diff}});
  return {{"submission_id", r.submission_id},
          {"bundle_id", r.bundle_id},
          {"threshold", to_string(r.threshold)},
          {"compile_ok", r.compile_ok},
          {"stage_results", stages},
          {"findings", findings},
          {"functional", functional},
          {"verdict", {{"acceptable", r.verdict.acceptable}, {"reasons", r.verdict.reasons}}}};
}

AssessmentReport report_from_json(const json& j)
{
  try {
    AssessmentReport r;
    r.submission_id = j.at("submission_id").get<std::string>();
    r.bundle_id = j.at("bundle_id").get<std::string>();
    auto threshold = parse_severity(j.at("threshold").get<std::string>());
    if (!threshold)
      throw AssessmentError("SchemaViolation", "unknown threshold");
    r.threshold = *threshold;
    r.compile_ok = j.at("compile_ok").get<bool>();
    for (const auto& s : j.at("stage_results")) {
      StageResult sr;
      auto stage = parse_stage(s.at("stage").get<std::string>());
      if (!stage)
        throw AssessmentError("SchemaViolation", "unknown stage");
      sr.stage = *stage;
      std::string status = s.at("status").get<std::string>();
      for (int i = 0; i < 3; ++i)
        if (kStageStatusNames[i] == status)
          sr.status = static_cast<StageStatus>(i);
      sr.detail = s.value("detail", "");
      sr.seconds = s.value("seconds", 0.0);
      r.stage_results.push_back(std::move(sr));
    }
    for (const auto& f : j.at("findings"))
      r.findings.push_back(finding_from_json(f));
    for (const auto& f : j.at("functional")) {
      FunctionalResult fr;
      fr.test_id = f.at("test_id").get<std::string>();
      fr.passed = f.at("passed").get<bool>();
      fr.expected_exit = f.at("expected_exit").get<int>();
      fr.actual_exit = f.at("actual_exit").get<int>();
      fr.outcome = f.at("outcome").get<std::string>();
      fr.diff = f.at("diff").get<std::string>();
      r.functional.push_back(std::move(fr));
    }
    r.verdict.acceptable = j.at("verdict").at("acceptable").get<bool>();
    r.verdict.reasons = j.at("verdict").at("reasons").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw AssessmentError("SchemaViolation", std::string("malformed report: ") + e.what());
  }
}

std::string render_text(const AssessmentReport& r)
{
  std::ostringstream out;
  out << "bundle " << r.bundle_id << ", submission " << r.submission_id << ": "
      << (r.verdict.acceptable ? "ACCEPTABLE" : "NOT ACCEPTABLE") << "\n";
  out << "stages:";
  for (const auto& s : r.stage_results) {
    out << " " << to_string(s.stage) << "=" << to_string(s.status);
  }
  out << "\n";
  for (const auto& s : r.stage_results)
    if (!s.detail.empty() && s.status != StageStatus::Ran)
      out << "  " << to_string(s.stage) << ": " << s.detail << "\n";
  if (r.findings.empty())
    out << "findings: none\n";
  else {
    out << "findings:\n";
    for (const auto& f : r.findings) {
      char head[64];
      std::snprintf(head, sizeof head, "  %-8s %-10s ", std::string(to_string(f.severity)).c_str(),
                    std::string(to_string(f.stage)).c_str());
      out << head << f.category << " " << f.location.file << ":" << f.location.line << "  " << f.message;
      if (f.guideline)
        out << " [" << to_string(f.guideline->source) << " " << f.guideline->rule_id << "]";
      if (f.test_id)
        out << " (test " << *f.test_id << ")";
      out << "\n";
    }
  }
  if (!r.functional.empty()) {
    out << "functional tests:\n";
    for (const auto& t : r.functional) {
      out << "  " << (t.passed ? "pass " : "FAIL ") << t.test_id;
      if (!t.passed)
        out << "  " << t.diff;
      out << "\n";
    }
  }
  if (!r.verdict.acceptable) {
    out << "blocking (severity >= " << to_string(r.threshold) << "):";
    for (const auto& reason : r.verdict.reasons)
      out << " " << reason;
    out << "\n";
  }
  return out.str();
}

std::string submission_id(std::string_view bundle_id, const std::map<std::string, std::string>& files)
{
  // FNV-1a, 64 bit.
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    h ^= 0xff;
    h *= 0x100000001b3ull;
  };
  mix(bundle_id);
  for (const auto& [path, contents] : files) {
    mix(path);
    mix(contents);
  }
  return "sub-" + hex64(h);
}

// ---- adapters ------------------------------------------------------------------

std::vector<Finding> parse_adapter_output(std::string_view adapter, std::string_view ndjson,
                                          const std::map<std::string, std::string>& files)
{
  std::vector<Finding> out;
  int line_no = 0;
  for (auto line : split_lines(ndjson)) {
    ++line_no;
    if (trim(line).empty())
      continue;
    auto fail = [&](const std::string& why) {
      throw AssessmentError("AdapterCrash", "analyzer '" + std::string(adapter) + "' output line " +
                                              std::to_string(line_no) + ": " + why);
    };
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      fail("not a JSON object");
    for (const char* key : {"category", "severity", "file", "message"})
      if (!j.contains(key) || !j[key].is_string())
        fail(std::string("missing string field '") + key + "'");
    if (!j.contains("line") || !j["line"].is_number_integer() || j["line"].get<long long>() < 0)
      fail("missing non-negative integer field 'line'");
    auto sev = parse_severity(j["severity"].get<std::string>());
    if (!sev)
      fail("unknown severity '" + j["severity"].get<std::string>() + "'");
    std::string category = j["category"].get<std::string>();
    if (category.empty())
      fail("empty category");
    // Records about files outside the project (system headers) are dropped.
    auto file = project_file(j["file"].get<std::string>(), files);
    if (!file)
      continue;
    out.push_back(make_finding(std::move(category), *sev, {*file, static_cast<int>(j["line"].get<long long>())},
                               j["message"].get<std::string>(), Stage::STATIC));
  }
  return out;
}

ExternalAnalyzer::ExternalAnalyzer(std::string name, std::vector<std::string> argv, Sandbox& sandbox,
                                   ResourceLimits limits)
  : name_(std::move(name))
  , argv_(std::move(argv))
  , sandbox_(sandbox)
  , limits_(limits)
{
}

std::vector<Finding> ExternalAnalyzer::analyze(const fs::path& project_dir,
                                               const std::map<std::string, std::string>& files) const
{
  ExecutionOutcome o = sandbox_.execute(command(argv_), limits_, project_dir);
  // Linters conventionally exit 1 when they report issues.
  if (o.status != ExecStatus::Exited || o.exit_code > 1) {
    std::string why = o.status == ExecStatus::SandboxError ? o.reason : std::string(to_string(o.status));
    if (o.status == ExecStatus::Exited)
      why = "exit code " + std::to_string(o.exit_code);
    throw AssessmentError("AdapterCrash", "analyzer '" + name_ + "' failed: " + why);
  }
  return parse_adapter_output(name_, o.stdout_data, files);
}

std::vector<std::unique_ptr<Analyzer>> load_analyzer_config(const fs::path& config, Sandbox& sandbox)
{
  std::ifstream in(config);
  if (!in)
    throw AssessmentError("ConfigInvalid", "cannot read analyzer config '" + config.string() + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("analyzers") || !j["analyzers"].is_array())
    throw AssessmentError("ConfigInvalid", "analyzer config must be an object with an 'analyzers' array");
  std::vector<std::unique_ptr<Analyzer>> out;
  for (const auto& a : j["analyzers"]) {
    if (!a.is_object() || !a.contains("name") || !a["name"].is_string() || !a.contains("command") ||
        !a["command"].is_array() || a["command"].empty())
      throw AssessmentError("ConfigInvalid", "each analyzer needs a 'name' and a non-empty 'command' array");
    std::vector<std::string> argv;
    for (const auto& arg : a["command"]) {
      if (!arg.is_string())
        throw AssessmentError("ConfigInvalid", "analyzer command entries must be strings");
      argv.push_back(arg.get<std::string>());
    }
    ResourceLimits limits;
    limits.cpu_seconds = a.value("cpu_seconds", 30.0);
    limits.wall_seconds = a.value("wall_seconds", 60.0);
    limits.memory_bytes = a.value("memory_mb", 512ull) << 20;
    out.push_back(std::make_unique<ExternalAnalyzer>(a["name"].get<std::string>(), std::move(argv), sandbox, limits));
  }
  return out;
}

StaticResult run_static(const fs::path& project_dir, const std::map<std::string, std::string>& files,
                        std::span<const std::unique_ptr<Analyzer>> analyzers)
{
  StaticResult result;
  for (const auto& analyzer : analyzers) {
    try {
      auto found = analyzer->analyze(project_dir, files);
      result.findings.insert(result.findings.end(), found.begin(), found.end());
    } catch (const std::exception& e) {
      result.failures[analyzer->name()] = e.what();
      result.findings.push_back(make_finding("ANALYZER_ERROR", Severity::HIGH, {fallback_file(files), 0},
                                             "analyzer '" + analyzer->name() + "' did not complete: " + e.what(),
                                             Stage::STATIC));
    }
  }
  result.findings = normalize_findings(std::move(result.findings));
  return result;
}

// ---- compiler and runtime output -------------------------------------------------

std::vector<Finding> parse_compiler_output(std::string_view output, const std::map<std::string, std::string>& files,
                                           bool failed)
{
  static const std::regex diag(R"(^(.+?):(\d+):(?:\d+:)? (warning|error|fatal error): (.*)$)");
  std::vector<Finding> out;
  bool any_error = false;
  for (auto line : split_lines(output)) {
    std::string s(line);
    std::smatch m;
    if (!std::regex_match(s, m, diag))
      continue;
    auto file = project_file(m[1].str(), files);
    if (!file)
      continue;
    bool error = m[3].str() != "warning";
    any_error = any_error || error;
    out.push_back(make_finding(error ? "COMPILE_ERROR" : "COMPILER_WARNING", error ? Severity::HIGH : Severity::LOW,
                               {*file, std::stoi(m[2].str())}, m[4].str(), Stage::COMPILE));
  }
  if (failed && !any_error) {
    // Linker and driver errors carry no source line.
    std::string tail;
    for (auto line : split_lines(output)) {
      std::string t = trim(line);
      if (!t.empty())
        tail = t;
    }
    out.push_back(make_finding("COMPILE_ERROR", Severity::HIGH, {fallback_file(files), 0},
                               tail.empty() ? "build failed" : tail, Stage::COMPILE));
  }
  return out;
}

namespace {

struct DynamicClass
{
  std::string category;
  Severity severity;
  std::string rule;
};

DynamicClass classify_asan(const std::string& kind, const std::string& detail)
{
  if (kind.find("buffer-overflow") != std::string::npos || kind.find("buffer-underflow") != std::string::npos ||
      kind == "container-overflow" || kind == "intra-object-overflow")
    return {"BUFFER_OVERFLOW", Severity::HIGH, "ARR30-C"};
  if (kind.find("use-after") != std::string::npos)
    return {"USE_AFTER_FREE", Severity::HIGH, "MEM30-C"};
  if (kind == "attempting double-free")
    return {"DOUBLE_FREE", Severity::HIGH, "MEM30-C"};
  if (kind.find("free") != std::string::npos)
    return {"INVALID_FREE", Severity::HIGH, "MEM34-C"};
  if (kind == "stack-overflow")
    return {"STACK_EXHAUSTION", Severity::HIGH, "MEM05-C"};
  if (kind == "SEGV") {
    static const std::regex addr(R"(address (0x[0-9a-f]+))");
    std::smatch m;
    if (std::regex_search(detail, m, addr) && std::stoull(m[1].str(), nullptr, 16) < 4096)
      return {"NULL_DEREFERENCE", Severity::HIGH, "EXP34-C"};
    return {"INVALID_MEMORY_ACCESS", Severity::HIGH, "ARR30-C"};
  }
  if (kind.find("allocation-size-too-big") != std::string::npos || kind.find("out-of-memory") != std::string::npos)
    return {"RESOURCE_LIMIT", Severity::HIGH, "MEM11-C"};
  return {"MEMORY_ERROR", Severity::HIGH, "MEM30-C"};
}

DynamicClass classify_ubsan(const std::string& what)
{
  if (what.find("out of bounds") != std::string::npos || what.find("insufficient space") != std::string::npos)
    return {"BUFFER_OVERFLOW", Severity::HIGH, "ARR30-C"};
  if (what.find("null pointer") != std::string::npos)
    return {"NULL_DEREFERENCE", Severity::HIGH, "EXP34-C"};
  if (what.find("division by zero") != std::string::npos)
    return {"DIVIDE_BY_ZERO", Severity::HIGH, "INT33-C"};
  if (what.find("signed integer overflow") != std::string::npos || what.find("negation of") != std::string::npos)
    return {"INTEGER_OVERFLOW", Severity::MEDIUM, "INT32-C"};
  if (what.find("shift") != std::string::npos)
    return {"UNDEFINED_BEHAVIOR", Severity::MEDIUM, "INT34-C"};
  return {"UNDEFINED_BEHAVIOR", Severity::MEDIUM, "MSC15-C"};
}

// Addresses change between runs; reports must not.
std::string scrub_addresses(const std::string& text)
{
  static const std::regex addr("0x[0-9a-fA-F]+");
  return std::regex_replace(text, addr, "0x...");
}

} // namespace

std::vector<Finding> parse_dynamic_outcome(const ExecutionOutcome& o, const IoTest& test,
                                           const std::map<std::string, std::string>& files)
{
  std::vector<Finding> out;
  auto add = [&](const DynamicClass& c, Location loc, std::string message) {
    Finding f = make_finding(c.category, c.severity, std::move(loc), std::move(message), Stage::DYNAMIC, cert(c.rule));
    f.test_id = test.id;
    out.push_back(std::move(f));
  };
  const Location fallback{fallback_file(files), 0};

  switch (o.status) {
    case ExecStatus::CpuTimeout:
      add({"RESOURCE_LIMIT", Severity::HIGH, "MSC12-C"}, fallback,
          "test '" + test.id + "' exceeded the CPU time limit");
      return out;
    case ExecStatus::WallTimeout:
      add({"RESOURCE_LIMIT", Severity::HIGH, "MSC12-C"}, fallback,
          "test '" + test.id + "' exceeded the wall-clock limit");
      return out;
    case ExecStatus::MemoryKill:
      add({"RESOURCE_LIMIT", Severity::HIGH, "MEM11-C"}, fallback, "test '" + test.id + "' exceeded the memory limit");
      return out;
    case ExecStatus::SandboxError:
      return out;
    default:
      break;
  }

  static const std::regex asan_head(R"(ERROR: AddressSanitizer: ([A-Za-z-]+(?: [A-Za-z-]+)?)(.*))");
  static const std::regex frame(R"(^\s*#\d+ 0x[0-9a-f]+ in (\S+) (.+?):(\d+)(?::\d+)?\s*$)");
  static const std::regex ubsan(R"(^(.+?):(\d+):\d+: runtime error: (.*)$)");

  auto lines = split_lines(o.stderr_data);
  bool reported = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string s(lines[i]);
    std::smatch m;
    if (std::regex_search(s, m, asan_head)) {
      std::string kind = m[1].str();
      // "heap-buffer-overflow on" -> "heap-buffer-overflow"
      if (kind.ends_with(" on"))
        kind.resize(kind.size() - 3);
      std::string detail = m[2].str();
      std::string access;
      std::optional<Location> loc;
      for (std::size_t k = i + 1; k < lines.size() && !loc; ++k) {
        std::string fl(lines[k]);
        std::smatch fm;
        if (access.empty() && (fl.starts_with("READ") || fl.starts_with("WRITE")))
          access = trim(fl.substr(0, fl.find(" at 0x")));
        if (std::regex_match(fl, fm, frame)) {
          if (auto file = project_file(fm[2].str(), files))
            loc = Location{*file, std::stoi(fm[3].str())};
        }
        if (fl.starts_with("SUMMARY:"))
          break;
      }
      DynamicClass c = classify_asan(kind, detail);
      std::string msg = kind + (access.empty() ? "" : " (" + access + ")") + " on input of test '" + test.id + "'";
      add(c, loc.value_or(fallback), msg);
      reported = true;
      continue;
    }
    if (std::regex_match(s, m, ubsan)) {
      auto file = project_file(m[1].str(), files);
      DynamicClass c = classify_ubsan(m[3].str());
      add(c, file ? Location{*file, std::stoi(m[2].str())} : fallback,
          scrub_addresses(m[3].str()) + " on input of test '" + test.id + "'");
      reported = true;
    }
  }
  if (!reported && o.term_signal != 0)
    add({"CRASH", Severity::HIGH, "MSC15-C"}, fallback,
        "test '" + test.id + "' terminated by signal " + std::to_string(o.term_signal));
  return out;
}

FunctionalResult judge(const IoTest& test, const ExecutionOutcome& o)
{
  FunctionalResult r;
  r.test_id = test.id;
  r.expected_exit = test.expected_exit;
  r.actual_exit = o.exit_code;
  r.outcome = std::string(to_string(o.status));
  if (o.status != ExecStatus::Exited) {
    r.diff = "program ended with " + r.outcome + (o.reason.empty() ? "" : " (" + o.reason + ")");
    return r;
  }
  if (o.stdout_data != test.expected_stdout) {
    auto exp = split_lines(test.expected_stdout);
    auto got = split_lines(o.stdout_data);
    std::size_t n = std::max(exp.size(), got.size());
    for (std::size_t i = 0; i < n; ++i) {
      std::string e = i < exp.size() ? quoted_excerpt(exp[i]) : "<end of output>";
      std::string g = i < got.size() ? quoted_excerpt(got[i]) : "<end of output>";
      if (i >= exp.size() || i >= got.size() || exp[i] != got[i]) {
        r.diff = "stdout line " + std::to_string(i + 1) + ": expected " + e + ", got " + g;
        break;
      }
    }
    if (r.diff.empty())
      r.diff = "stdout differs in its trailing newline";
    return r;
  }
  if (o.exit_code != test.expected_exit) {
    r.diff = "exit code " + std::to_string(o.exit_code) + ", expected " + std::to_string(test.expected_exit);
    return r;
  }
  r.passed = true;
  return r;
}

std::vector<std::string> compile_command(const CodeProject& project, const std::map<std::string, std::string>& files,
                                         const AssessorConfig& config, const std::string& output, bool instrumented)
{
  static const std::map<std::string, std::string> c_std = {
    {"c89", "gnu89"}, {"c99", "gnu99"}, {"c11", "gnu11"}, {"c17", "gnu17"},
  };
  static const std::map<std::string, std::string> cxx_std = {
    {"c++11", "gnu++11"}, {"c++14", "gnu++14"}, {"c++17", "gnu++17"}, {"c++20", "gnu++20"},
  };
  const std::string& profile = project.build.compiler_profile;
  std::vector<std::string> cmd;
  bool cxx = false;
  if (auto it = c_std.find(profile); it != c_std.end()) {
    cmd = {config.c_compiler, "-std=" + it->second};
  } else if (auto it2 = cxx_std.find(profile); it2 != cxx_std.end()) {
    cmd = {config.cxx_compiler, "-std=" + it2->second};
    cxx = true;
  } else {
    throw AssessmentError("UnknownProfile", "unknown compiler profile '" + profile + "'");
  }

  const std::string& flags = project.build.flags_profile;
  if (flags == "strict")
    cmd.insert(cmd.end(), {"-Wall", "-Wextra", "-Wformat=2", "-Wformat-security"});
  else if (flags == "default")
    cmd.push_back("-Wall");
  else if (flags != "none")
    throw AssessmentError("UnknownProfile", "unknown flags profile '" + flags + "'");

  cmd.insert(cmd.end(), {"-pipe", "-fdiagnostics-plain-output", "-fno-diagnostics-color", "-I."});
  if (instrumented)
    cmd.insert(cmd.end(), {"-O0", "-g", "-fno-omit-frame-pointer", "-fsanitize=address,undefined"});
  else
    cmd.insert(cmd.end(), {"-O1", "-g"});
  bool any = false;
  for (const auto& [path, _] : files) {
    if (cxx ? (is_cxx_source(path) || is_c_source(path)) : is_c_source(path)) {
      cmd.push_back(path);
      any = true;
    }
  }
  if (!any)
    throw AssessmentError("EmptyProject", "project has no " + std::string(cxx ? "C++" : "C") + " sources");
  cmd.insert(cmd.end(), {"-o", output, "-lm"});
  return cmd;
}

// ---- pipeline ------------------------------------------------------------------

Assessor::Assessor(Sandbox& sandbox, AssessorConfig config)
  : sandbox_(sandbox)
  , config_(std::move(config))
{
  analyzers_.push_back(std::make_unique<ReferenceAnalyzer>());
}

void Assessor::add_analyzer(std::unique_ptr<Analyzer> analyzer)
{
  analyzers_.push_back(std::move(analyzer));
}

AssessmentReport Assessor::assess(const ChallengeBundle& bundle, const std::map<std::string, std::string>& submission) const
{
  if (bundle.kind != ChallengeKind::CEC || !bundle.project)
    throw AssessmentError("NotCodeEntry", "bundle '" + bundle.id + "' is not a code-entry challenge");
  if (bundle.track != Track::C && bundle.track != Track::CPP)
    throw AssessmentError("UnsupportedTrack", "track " + std::string(to_string(bundle.track)) +
                                                " is not assessed; only C and CPP code-entry challenges are");
  const CodeProject& project = *bundle.project;
  for (const auto& [path, _] : submission) {
    check_relative_path(path);
    if (!project.files.count(path))
      throw AssessmentError("SubmissionAddsFiles", "submission adds '" + path + "', which is not part of the project");
  }
  if (auto why = sandbox_.unavailable_reason())
    throw AssessmentError("SandboxUnavailable", *why);

  std::map<std::string, std::string> files = project.files;
  for (const auto& [path, contents] : submission)
    files[path] = contents;

  AssessmentReport report;
  report.bundle_id = bundle.id;
  report.submission_id = submission_id(bundle.id, files);
  report.threshold = project.banned_findings_threshold;

  Scratch scratch = make_scratch(files, config_.scratch_root);
  std::vector<Finding> findings;
  const std::string binary = project.build.entry;
  const std::string instrumented = project.build.entry + ".sanitized";

  auto run_checked = [&](const ExecutionRequest& req, const ResourceLimits& limits) {
    ExecutionOutcome o = sandbox_.execute(req, limits, scratch.path());
    if (o.status == ExecStatus::SandboxError)
      throw AssessmentError("SandboxUnavailable", o.reason);
    return o;
  };
  auto timed = [](auto&& fn) {
    auto start = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  // COMPILE
  StageResult compile{Stage::COMPILE, StageStatus::Ran, "", 0.0};
  compile.seconds = timed([&] {
    ExecutionOutcome o =
      run_checked(command(compile_command(project, files, config_, binary, false)), config_.compile_limits);
    report.compile_ok = o.exited_cleanly();
    if (o.status != ExecStatus::Exited && o.status != ExecStatus::OutputTruncatedExit)
      compile.detail = "compiler stopped: " + std::string(to_string(o.status));
    auto diags = parse_compiler_output(o.stderr_data + o.stdout_data, files, !report.compile_ok);
    findings.insert(findings.end(), diags.begin(), diags.end());
  });
  report.stage_results.push_back(compile);

  if (!report.compile_ok) {
    for (Stage s : {Stage::STATIC, Stage::DYNAMIC, Stage::FUNCTIONAL})
      report.stage_results.push_back({s, StageStatus::Skipped, "compilation failed", 0.0});
    report.findings = normalize_findings(std::move(findings));
    report.verdict = report.recompute_verdict();
    return report;
  }

  // STATIC
  StageResult stat{Stage::STATIC, StageStatus::Ran, "", 0.0};
  stat.seconds = timed([&] {
    StaticResult sr = run_static(scratch.path(), files, analyzers_);
    findings.insert(findings.end(), sr.findings.begin(), sr.findings.end());
    if (!sr.failures.empty()) {
      stat.status = StageStatus::FailedToRun;
      for (const auto& [name, why] : sr.failures)
        stat.detail += (stat.detail.empty() ? "" : "; ") + why;
    }
  });
  report.stage_results.push_back(stat);

  std::vector<std::pair<std::string, std::string>> sanitizer_env = {
    {"ASAN_OPTIONS", "detect_leaks=0:abort_on_error=0:allocator_may_return_null=1:symbolize=1"},
    {"UBSAN_OPTIONS", "print_stacktrace=1:halt_on_error=0"},
  };

  // DYNAMIC
  StageResult dyn{Stage::DYNAMIC, StageStatus::Ran, "", 0.0};
  dyn.seconds = timed([&] {
    ExecutionOutcome o =
      run_checked(command(compile_command(project, files, config_, instrumented, true)), config_.compile_limits);
    if (!o.exited_cleanly()) {
      dyn.status = StageStatus::FailedToRun;
      dyn.detail = "instrumented build failed: " + trim(o.stderr_data.substr(0, 400));
      return;
    }
    for (const auto& test : project.functional_tests) {
      ExecutionRequest req;
      req.argv = {"./" + instrumented};
      req.argv.insert(req.argv.end(), test.argv.begin(), test.argv.end());
      req.stdin_data = test.stdin_data;
      req.env = sanitizer_env;
      req.limit_address_space = false;
      auto found = parse_dynamic_outcome(run_checked(req, config_.test_limits), test, files);
      findings.insert(findings.end(), found.begin(), found.end());
    }
  });
  report.stage_results.push_back(dyn);

  // FUNCTIONAL
  StageResult fun{Stage::FUNCTIONAL, StageStatus::Ran, "", 0.0};
  fun.seconds = timed([&] {
    for (const auto& test : project.functional_tests) {
      ExecutionRequest req;
      req.argv = {"./" + binary};
      req.argv.insert(req.argv.end(), test.argv.begin(), test.argv.end());
      req.stdin_data = test.stdin_data;
      report.functional.push_back(judge(test, run_checked(req, config_.test_limits)));
    }
  });
  report.stage_results.push_back(fun);

  report.findings = normalize_findings(std::move(findings));
  report.verdict = report.recompute_verdict();
  return report;
}

std::optional<std::string> Assessor::check_solution(const ChallengeBundle& bundle) const
{
  if (!bundle.project || bundle.project->solution_files.empty())
    return std::nullopt;
  AssessmentReport r = assess(bundle, bundle.project->solution_files);
  if (r.verdict.acceptable)
    return std::nullopt;
  std::string why = "reference solution is not acceptable:";
  for (const auto& reason : r.verdict.reasons)
    why += " " + reason;
  return why;
}

} // namespace csc
