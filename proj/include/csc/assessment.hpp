#pragma once

#include "csc/challenge.hpp"
#include "csc/sandbox.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace csc {

/// Stages run in this order; the enum order is also the coach's priority.
enum class Stage { COMPILE, STATIC, DYNAMIC, FUNCTIONAL };

std::string_view to_string(Stage);
std::optional<Stage> parse_stage(std::string_view);

struct Location
{
  std::string file;
  int line = 0; // 0 when the tool could not attribute a line

  auto operator<=>(const Location&) const = default;
};

struct Finding
{
  std::string id; // "<category>@<file>:<line>"
  std::string category;
  Severity severity = Severity::INFO;
  Location location;
  std::string message;
  Stage stage = Stage::STATIC;
  std::optional<GuidelineRef> guideline;
  /// Functional test whose input triggered a DYNAMIC finding.
  std::optional<std::string> test_id;

  bool operator==(const Finding&) const = default;
};

std::string finding_id(std::string_view category, const Location& loc);
Finding make_finding(std::string category, Severity severity, Location loc, std::string message, Stage stage,
                     std::optional<GuidelineRef> guideline = std::nullopt);

nlohmann::json to_json(const Finding&);
Finding finding_from_json(const nlohmann::json&);

enum class StageStatus { Ran, Skipped, FailedToRun };

std::string_view to_string(StageStatus);

struct StageResult
{
  Stage stage = Stage::COMPILE;
  StageStatus status = StageStatus::Skipped;
  std::string detail;
  double seconds = 0.0;

  bool operator==(const StageResult&) const = default;
};

struct FunctionalResult
{
  std::string test_id;
  bool passed = false;
  int expected_exit = 0;
  int actual_exit = 0;
  std::string outcome; // ExecStatus name
  /// First difference between expected and actual output; empty on pass.
  std::string diff;

  bool operator==(const FunctionalResult&) const = default;
};

struct Verdict
{
  bool acceptable = false;
  /// Blocking finding ids, failed test ids, and "compile" when the build
  /// failed. Empty iff acceptable.
  std::vector<std::string> reasons;

  bool operator==(const Verdict&) const = default;
};

Verdict verdict(std::span<const Finding> findings, std::span<const FunctionalResult> functional, Severity threshold,
                bool compile_ok);

struct AssessmentReport
{
  std::string submission_id;
  std::string bundle_id;
  Severity threshold = Severity::MEDIUM;
  bool compile_ok = false;
  std::vector<StageResult> stage_results;
  std::vector<Finding> findings;
  std::vector<FunctionalResult> functional;
  Verdict verdict;

  const Finding* find(std::string_view finding_id) const;
  const FunctionalResult* functional_result(std::string_view test_id) const;
  /// Recomputes the verdict from the stored findings and test results.
  Verdict recompute_verdict() const;
};

/// `include_timings = false` gives a byte-stable document for identical
/// inputs.
nlohmann::json to_json(const AssessmentReport&, bool include_timings = true);
AssessmentReport report_from_json(const nlohmann::json&);
std::string render_text(const AssessmentReport&);

/// Deterministic id of (bundle, submission).
std::string submission_id(std::string_view bundle_id, const std::map<std::string, std::string>& files);

/// Sorts by (file, line, category, stage) and merges findings sharing
/// (category, location), keeping the earliest stage and the highest severity.
std::vector<Finding> normalize_findings(std::vector<Finding> findings);

// ---- analyzers ---------------------------------------------------------------

/// A static analyzer over a materialized project directory.
class Analyzer
{
public:
  virtual ~Analyzer() = default;
  virtual std::string name() const = 0;
  /// Throws on tool failure; the pipeline records that as a stage failure.
  virtual std::vector<Finding> analyze(const std::filesystem::path& project_dir,
                                       const std::map<std::string, std::string>& files) const = 0;
};

/// Built-in pattern rules over C sources.
class ReferenceAnalyzer final : public Analyzer
{
public:
  std::string name() const override { return "reference"; }
  std::vector<Finding> analyze(const std::filesystem::path& project_dir,
                               const std::map<std::string, std::string>& files) const override;

  /// Analyzes sources held in memory; the directory is not needed.
  std::vector<Finding> analyze_sources(const std::map<std::string, std::string>& files) const;
};

/// Runs an external tool in the sandbox with the project as its working
/// directory. The tool prints one JSON object per line:
/// {"category", "severity", "file", "line", "message"}.
class ExternalAnalyzer final : public Analyzer
{
public:
  ExternalAnalyzer(std::string name, std::vector<std::string> argv, Sandbox& sandbox, ResourceLimits limits = {});

  std::string name() const override { return name_; }
  std::vector<Finding> analyze(const std::filesystem::path& project_dir,
                               const std::map<std::string, std::string>& files) const override;

private:
  std::string name_;
  std::vector<std::string> argv_;
  Sandbox& sandbox_;
  ResourceLimits limits_;
};

/// Parses adapter output. Throws AssessmentError("AdapterCrash") on a
/// malformed record.
std::vector<Finding> parse_adapter_output(std::string_view adapter, std::string_view ndjson,
                                          const std::map<std::string, std::string>& files);

/// Reads {"analyzers": [{"name": ..., "command": [...]}]}.
std::vector<std::unique_ptr<Analyzer>> load_analyzer_config(const std::filesystem::path& config, Sandbox& sandbox);

struct StaticResult
{
  std::vector<Finding> findings;
  /// Analyzer name -> failure message.
  std::map<std::string, std::string> failures;
};

/// Runs every analyzer; a crashing adapter contributes a blocking
/// ANALYZER_ERROR finding instead of aborting the stage.
StaticResult run_static(const std::filesystem::path& project_dir, const std::map<std::string, std::string>& files,
                        std::span<const std::unique_ptr<Analyzer>> analyzers);

// ---- pipeline ------------------------------------------------------------------

struct AssessorConfig
{
  ResourceLimits compile_limits{20.0, 60.0, 512ull << 20, 16, 1u << 20};
  ResourceLimits test_limits{2.0, 10.0, 256ull << 20, 16, 1u << 20};
  std::string c_compiler = "gcc";
  std::string cxx_compiler = "g++";
  std::filesystem::path scratch_root = default_scratch_root();
};

/// Parses compiler diagnostics ("file:line:col: warning|error: ...") into
/// COMPILE findings attributed to project files.
std::vector<Finding> parse_compiler_output(std::string_view output, const std::map<std::string, std::string>& files,
                                           bool failed);

/// Parses AddressSanitizer / UBSan reports and crashes from one execution.
std::vector<Finding> parse_dynamic_outcome(const ExecutionOutcome& outcome, const IoTest& test,
                                           const std::map<std::string, std::string>& files);

/// Compares an execution against its expected output and exit code.
FunctionalResult judge(const IoTest& test, const ExecutionOutcome& outcome);

/// Compile flags for a bundle's build profile.
std::vector<std::string> compile_command(const CodeProject& project, const std::map<std::string, std::string>& files,
                                         const AssessorConfig& config, const std::string& output, bool instrumented);

class Assessor
{
public:
  explicit Assessor(Sandbox& sandbox, AssessorConfig config = {});

  /// Takes ownership; the reference analyzer is always registered first.
  void add_analyzer(std::unique_ptr<Analyzer> analyzer);
  std::span<const std::unique_ptr<Analyzer>> analyzers() const { return analyzers_; }

  /// Throws AssessmentError with code NotCodeEntry, UnsupportedTrack,
  /// SubmissionAddsFiles or SandboxUnavailable.
  AssessmentReport assess(const ChallengeBundle& bundle, const std::map<std::string, std::string>& submission) const;

  /// Assesses the bundle's reference solution; nullopt when acceptable.
  std::optional<std::string> check_solution(const ChallengeBundle& bundle) const;

private:
  Sandbox& sandbox_;
  AssessorConfig config_;
  std::vector<std::unique_ptr<Analyzer>> analyzers_;
};

} // namespace csc
