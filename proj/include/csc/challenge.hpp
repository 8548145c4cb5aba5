#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace csc {

enum class Track { C, CPP, WEB, JAVA };
enum class ChallengeKind { SCQ, MCQ, TEQ, ALR, CSC, CEC };
enum class GuidelineSource { CERT_C, CERT_JAVA, OWASP, INTERNAL };

// Ordered: comparisons follow INFO < LOW < MEDIUM < HIGH < CRITICAL.
enum class Severity { INFO = 0, LOW, MEDIUM, HIGH, CRITICAL };

std::string_view to_string(Track);
std::string_view to_string(ChallengeKind);
std::string_view to_string(GuidelineSource);
std::string_view to_string(Severity);

std::optional<Track> parse_track(std::string_view);
std::optional<ChallengeKind> parse_kind(std::string_view);
std::optional<GuidelineSource> parse_guideline_source(std::string_view);
std::optional<Severity> parse_severity(std::string_view);

struct GuidelineRef
{
  GuidelineSource source = GuidelineSource::INTERNAL;
  std::string rule_id;
  std::optional<std::string> url;

  bool operator==(const GuidelineRef&) const = default;
};

struct SingleChoice
{
  std::vector<std::string> options;
  std::size_t correct = 0;

  bool operator==(const SingleChoice&) const = default;
};

struct MultipleChoice
{
  std::vector<std::string> options;
  std::set<std::size_t> correct;

  bool operator==(const MultipleChoice&) const = default;
};

struct TextEntry
{
  std::vector<std::string> accepted;

  bool operator==(const TextEntry&) const = default;
};

struct AssociateLeftRight
{
  std::vector<std::string> left;
  std::vector<std::string> right;
  /// left index -> right index; injective.
  std::map<std::size_t, std::size_t> correct_pairs;

  bool operator==(const AssociateLeftRight&) const = default;
};

/// Read-only snippet plus an inner question about its flaw.
struct CodeSnippet
{
  std::string snippet;
  std::variant<SingleChoice, MultipleChoice, TextEntry> inner;

  bool operator==(const CodeSnippet&) const = default;
};

using Question = std::variant<SingleChoice, MultipleChoice, TextEntry, AssociateLeftRight, CodeSnippet>;

struct Phase
{
  int index = 0;
  std::string body;
  std::optional<Question> question;
  /// Fraction of the bundle points this phase yields; 0 for phases without
  /// a scorable payload.
  double awards_fraction = 0.0;

  bool operator==(const Phase&) const = default;
};

struct IoTest
{
  std::string id;
  std::vector<std::string> argv;
  std::string stdin_data;
  std::string expected_stdout;
  int expected_exit = 0;

  bool operator==(const IoTest&) const = default;
};

struct BuildSpec
{
  std::string compiler_profile = "c11";
  std::string flags_profile = "strict";
  std::string entry = "app";

  bool operator==(const BuildSpec&) const = default;
};

struct CodeProject
{
  std::map<std::string, std::string> files;
  BuildSpec build;
  std::vector<IoTest> functional_tests;
  Severity banned_findings_threshold = Severity::MEDIUM;
  /// Optional reference solution; same paths as `files` (subset).
  std::map<std::string, std::string> solution_files;

  bool operator==(const CodeProject&) const = default;
};

struct HintTemplate
{
  std::string category;
  int level = 1;
  std::string text;

  bool operator==(const HintTemplate&) const = default;
};

struct ChallengeBundle
{
  std::string id;
  std::string title;
  Track track = Track::C;
  ChallengeKind kind = ChallengeKind::SCQ;
  int points = 0;
  std::vector<GuidelineRef> guideline_refs;
  std::vector<Phase> phases;
  std::optional<CodeProject> project;
  std::vector<HintTemplate> hint_ladder;

  const Phase& phase(int index) const;
  bool operator==(const ChallengeBundle&) const = default;
};

/// True when the phase can yield points: phase 2 always, phase 3 when it
/// carries a follow-up question.
bool is_scorable(const Phase& phase);

/// Throws BundleError("PathTraversal") for absolute paths, empty paths, and
/// any `..` component.
void check_relative_path(std::string_view path);

/// Reads `challenge.json` from `root` and inlines every referenced file.
/// Throws BundleError with code ManifestMissing, SchemaViolation, PhaseGap or
/// PathTraversal.
ChallengeBundle load_bundle(const std::filesystem::path& root);

/// Parses the inline (file contents embedded) JSON form and validates it.
ChallengeBundle bundle_from_json(const nlohmann::json& j);

/// Inline JSON form; `bundle_from_json(to_json(b)) == b`.
nlohmann::json to_json(const ChallengeBundle& bundle);
nlohmann::json to_json(const Question& question);
nlohmann::json to_json(const GuidelineRef& guideline);
GuidelineRef guideline_from_json(const nlohmann::json& j);
Question question_from_json(const nlohmann::json& j, std::string_view field);

/// Question as served to players: options without the correct answers.
nlohmann::json public_view(const Question& question);

/// Checks every type invariant; throws BundleError on the first violation.
void validate_bundle(const ChallengeBundle& bundle);

/// Phases ordered 1, 2, 3. Serving phase k+1 before k was acknowledged is
/// refused by the game engine.
std::vector<Phase> phase_sequence(const ChallengeBundle& bundle);

struct ValidationIssue
{
  std::string code; // DuplicateId | ZeroPoints | SolutionNotAcceptable
  std::string bundle_id;
  std::string detail;
};

struct ValidationReport
{
  std::vector<ValidationIssue> issues;

  bool valid() const { return issues.empty(); }
  nlohmann::json to_json() const;
};

/// Returns a failure description when the bundle's reference solution is not
/// acceptable, std::nullopt otherwise. Wired to the assessment pipeline by
/// callers that have a sandbox.
using SolutionCheck = std::function<std::optional<std::string>(const ChallengeBundle&)>;

ValidationReport validate_event(std::span<const ChallengeBundle> bundles, const SolutionCheck& check = {});

} // namespace csc
