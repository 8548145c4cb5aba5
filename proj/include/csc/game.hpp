#pragma once

#include "csc/challenge.hpp"
#include "csc/coach.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace csc {

/// Milliseconds since the event clock started.
using EventTime = std::int64_t;

constexpr EventTime minutes(std::int64_t m)
{
  return m * 60'000;
}

enum class Mode { STANDALONE, WORKSHOP };
enum class BlockName { WELCOME, TEAM_BUILDING, INTRODUCTION, MAIN_EVENT, WINNER, FEEDBACK, WALKTHROUGH };

std::string_view to_string(Mode);
std::string_view to_string(BlockName);
std::optional<Mode> parse_mode(std::string_view);
std::optional<BlockName> parse_block(std::string_view);

struct AgendaBlock
{
  BlockName name = BlockName::WELCOME;
  int duration_minutes = 1;

  bool operator==(const AgendaBlock&) const = default;
};

/// WELCOME 10, TEAM_BUILDING 20, INTRODUCTION 30, MAIN_EVENT 320, WINNER 10,
/// FEEDBACK 30, WALKTHROUGH 60.
std::vector<AgendaBlock> default_agenda();

/// Replaces durations by block name; throws GameError("InvalidAgenda") for
/// non-positive durations.
std::vector<AgendaBlock> agenda_with_overrides(const std::map<BlockName, int>& durations);

struct AgendaPosition
{
  BlockName block = BlockName::WELCOME;
  EventTime start = 0;
  EventTime end = 0;
  /// The clock is past the last block; `block` is then the last block.
  bool ended = false;

  EventTime remaining(EventTime now) const { return ended ? 0 : end - now; }
};

/// The block whose [start, start + duration) holds `now`. Throws
/// GameError("NegativeClock") for now < 0.
AgendaPosition advance_agenda(std::span<const AgendaBlock> agenda, EventTime now);

/// [start, end) of the first block named `name`.
std::pair<EventTime, EventTime> block_window(std::span<const AgendaBlock> agenda, BlockName name);

// ---- quiz grading -------------------------------------------------------------

struct GradeResult
{
  bool correct = false;
  nlohmann::json normalized_answer;
};

/// SCQ takes an index, MCQ an array of indices, TEQ a string, ALR an array
/// of [left, right] pairs and CSC the payload of its inner question. Throws
/// GameError("PayloadShapeMismatch").
GradeResult grade_quiz(const Question& question, const nlohmann::json& answer);

/// Trims, collapses inner whitespace and lower-cases ASCII letters.
std::string normalize_text_answer(std::string_view text);

// ---- state --------------------------------------------------------------------

struct Team
{
  std::string id;
  std::string display_name;
  std::vector<std::string> members;

  bool operator==(const Team&) const = default;
};

struct ScoreEvent
{
  std::string team;
  std::string challenge;
  int phase = 2;
  int points = 0;
  EventTime at = 0;

  bool operator==(const ScoreEvent&) const = default;
};

struct Submission
{
  std::string submission_id;
  std::string team;
  std::string player;
  std::string challenge;
  std::map<std::string, std::string> files; // stored verbatim
  EventTime at = 0;

  bool operator==(const Submission&) const = default;
};

struct AssessmentRecord
{
  std::string submission_id;
  std::string team;
  std::string challenge;
  bool acceptable = false;
  /// Serialized AssessmentReport; null when the assessment itself failed.
  nlohmann::json report;
  std::string error;
  EventTime at = 0;

  bool operator==(const AssessmentRecord&) const = default;
};

struct HintRecord
{
  std::string player;
  std::string team;
  std::string challenge;
  Hint hint;

  bool operator==(const HintRecord&) const = default;
};

struct ErrorReport
{
  std::string player;
  std::string challenge;
  std::string text;
  int phase = 0;                  // highest acknowledged phase when reported
  std::string last_submission_id; // empty when none
  EventTime at = 0;

  bool operator==(const ErrorReport&) const = default;
};

inline constexpr std::size_t kMaxErrorReportChars = 10'000;

struct SurveyAnswer
{
  std::string qid;
  int value = 3;

  bool operator==(const SurveyAnswer&) const = default;
};

struct SurveySubmission
{
  std::string participant;
  std::vector<SurveyAnswer> answers;
  EventTime at = 0;

  bool operator==(const SurveySubmission&) const = default;
};

using TeamChallenge = std::pair<std::string, std::string>;

struct GameState
{
  std::string event_id;
  Mode mode = Mode::STANDALONE;
  std::vector<AgendaBlock> agenda = default_agenda();
  /// Unix milliseconds at which the event clock read zero.
  std::int64_t wall_start = 0;
  /// Latest event time applied; never decreases.
  EventTime clock = 0;

  std::vector<Team> teams; // registration order
  std::vector<ScoreEvent> solves;
  /// Highest acknowledged phase per (team, challenge).
  std::map<TeamChallenge, int> phase_progress;
  /// (team, challenge) pairs with an Acceptable CEC verdict.
  std::set<TeamChallenge> acceptable;
  std::map<std::string, ScoreEvent> solve_keys;
  std::vector<Submission> submissions;
  std::vector<AssessmentRecord> assessments;
  std::vector<HintRecord> hints;
  std::vector<ErrorReport> error_reports;
  std::vector<SurveySubmission> surveys;
  std::uint64_t applied = 0;

  bool operator==(const GameState&) const = default;

  const Team* team(std::string_view id) const;
  const Team* team_of(std::string_view player) const;
  int progress(const std::string& team, const std::string& challenge) const;
  bool solved(const std::string& team, const std::string& challenge, int phase) const;
  int total(const std::string& team) const;
  const Submission* submission(std::string_view submission_id) const;
  /// Latest assessment of the team's submissions for a challenge.
  const AssessmentRecord* latest_assessment(const std::string& team, const std::string& challenge) const;
  std::vector<Hint> hints_for(const std::string& player, const std::string& challenge) const;
};

nlohmann::json to_json(const GameState&);
GameState game_state_from_json(const nlohmann::json&);

// ---- events -------------------------------------------------------------------

struct TeamRegistered
{
  Team team;
  EventTime at = 0;
  bool operator==(const TeamRegistered&) const = default;
};
struct PhaseAcknowledged
{
  std::string team;
  std::string challenge;
  int phase = 1;
  EventTime at = 0;
  bool operator==(const PhaseAcknowledged&) const = default;
};
struct Solved
{
  ScoreEvent score;
  std::string request_key; // empty when the client sent none
  bool operator==(const Solved&) const = default;
};
struct Submitted
{
  Submission submission;
  bool operator==(const Submitted&) const = default;
};
struct Assessed
{
  AssessmentRecord record;
  bool operator==(const Assessed&) const = default;
};
struct HintIssued
{
  HintRecord record;
  bool operator==(const HintIssued&) const = default;
};
struct ErrorReported
{
  ErrorReport report;
  bool operator==(const ErrorReported&) const = default;
};
struct SurveySubmitted
{
  SurveySubmission survey;
  bool operator==(const SurveySubmitted&) const = default;
};
struct ClockStarted
{
  std::int64_t wall_start = 0;
  bool operator==(const ClockStarted&) const = default;
};

using GameEvent = std::variant<ClockStarted, TeamRegistered, PhaseAcknowledged, Solved, Submitted, Assessed, HintIssued,
                               ErrorReported, SurveySubmitted>;

nlohmann::json to_json(const GameEvent&);
/// Throws StorageError("StorageCorrupt") on an unknown or malformed record.
GameEvent game_event_from_json(const nlohmann::json&);
EventTime event_time(const GameEvent&);

/// The only way state changes. Pure: replaying the same events from the same
/// initial state gives an identical state.
void apply_event(GameState& state, const GameEvent& event);
GameState replay(GameState initial, std::span<const GameEvent> events);

// ---- rules --------------------------------------------------------------------

struct ScoreboardRow
{
  std::string team;
  std::string display_name;
  int points = 0;
  std::optional<EventTime> last_solve_at;

  bool operator==(const ScoreboardRow&) const = default;
};

/// Points descending, then earlier last solve, then team id.
std::vector<ScoreboardRow> scoreboard(const GameState& state);

/// Head of the scoreboard. Throws GameError NoTeams or GameNotFinished
/// (clock before the WINNER block).
Team winner(const GameState& state);

/// round(bundle points x phase fraction).
int phase_points(const ChallengeBundle& bundle, int phase);

/// Validates commands against the state, emits the resulting event to the
/// sink and applies it. Every method takes the caller's clock reading; the
/// state clock never moves backwards.
class Game
{
public:
  using Sink = std::function<void(const GameEvent&)>;

  explicit Game(GameState initial, Sink sink = {});

  const GameState& state() const { return state_; }

  /// Pins event time zero to `wall_start` (Unix ms). Only the first call
  /// records an event; later calls return the pinned value.
  std::int64_t start_clock(std::int64_t wall_start);

  /// Registration closes when MAIN_EVENT starts. Throws RegistrationClosed,
  /// DuplicateTeam, DuplicateMember or InvalidTeam.
  const Team& register_team(Team team, EventTime now);

  /// Marks phase `phase` as read. Phase k needs phase k-1 acknowledged and a
  /// scorable phase must be solved first. Returns the new progress.
  int acknowledge(const std::string& team, const ChallengeBundle& bundle, int phase, EventTime now);

  /// Throws GameClosed, UnknownTeam, PhaseNotScorable, DuplicateSolve,
  /// PhaseOrderViolation or NotAcceptable. A retry carrying the same
  /// request key returns the original event.
  ScoreEvent record_solve(const std::string& team, const ChallengeBundle& bundle, int phase, EventTime now,
                          const std::string& request_key = {});

  void record_submission(Submission submission, EventTime now);
  void record_assessment(AssessmentRecord record, EventTime now);
  void record_hint(HintRecord record, EventTime now);
  /// Throws EmptyText or TextTooLong.
  void record_error_report(ErrorReport report, EventTime now);
  /// Throws DuplicateSurvey or LikertRange.
  void record_survey(SurveySubmission survey, EventTime now);

private:
  EventTime stamp(EventTime now) const;
  void commit(const GameEvent& event);

  GameState state_;
  Sink sink_;
};

} // namespace csc
