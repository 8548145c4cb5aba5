#include "csc/game.hpp"

#include "csc/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <regex>

namespace csc {

namespace {

using nlohmann::json;

constexpr std::array<std::pair<BlockName, std::string_view>, 7> kBlockNames{{
  {BlockName::WELCOME, "WELCOME"},
  {BlockName::TEAM_BUILDING, "TEAM_BUILDING"},
  {BlockName::INTRODUCTION, "INTRODUCTION"},
  {BlockName::MAIN_EVENT, "MAIN_EVENT"},
  {BlockName::WINNER, "WINNER"},
  {BlockName::FEEDBACK, "FEEDBACK"},
  {BlockName::WALKTHROUGH, "WALKTHROUGH"},
}};

constexpr std::array<int, 7> kDefaultMinutes{10, 20, 30, 320, 10, 30, 60};

[[noreturn]] void shape_mismatch(const std::string& why)
{
  throw GameError("PayloadShapeMismatch", why);
}

std::size_t answer_index(const json& j, std::size_t options)
{
  if (!j.is_number_integer() || j.get<long long>() < 0)
    shape_mismatch("expected a non-negative option index");
  auto i = j.get<std::size_t>();
  if (i >= options)
    shape_mismatch("option index " + std::to_string(i) + " out of range");
  return i;
}

GradeResult grade_single(const SingleChoice& q, const json& answer)
{
  std::size_t i = answer_index(answer, q.options.size());
  return {i == q.correct, i};
}

GradeResult grade_multiple(const MultipleChoice& q, const json& answer)
{
  if (!answer.is_array())
    shape_mismatch("expected an array of option indices");
  std::set<std::size_t> picked;
  for (const auto& a : answer)
    picked.insert(answer_index(a, q.options.size()));
  return {picked == q.correct, json(picked)};
}

GradeResult grade_text(const TextEntry& q, const json& answer)
{
  if (!answer.is_string())
    shape_mismatch("expected a text answer");
  std::string given = normalize_text_answer(answer.get<std::string>());
  bool ok = std::any_of(q.accepted.begin(), q.accepted.end(),
                        [&](const std::string& a) { return normalize_text_answer(a) == given; });
  return {ok, given};
}

GradeResult grade_pairs(const AssociateLeftRight& q, const json& answer)
{
  if (!answer.is_array())
    shape_mismatch("expected an array of [left, right] pairs");
  std::map<std::size_t, std::size_t> pairs;
  for (const auto& p : answer) {
    if (!p.is_array() || p.size() != 2)
      shape_mismatch("expected [left, right]");
    std::size_t l = answer_index(p[0], q.left.size());
    std::size_t r = answer_index(p[1], q.right.size());
    if (!pairs.emplace(l, r).second)
      shape_mismatch("left item " + std::to_string(l) + " paired twice");
  }
  json normalized = json::array();
  for (auto [l, r] : pairs)
    normalized.push_back({l, r});
  return {pairs == q.correct_pairs, normalized};
}

std::size_t utf8_length(std::string_view s)
{
  return static_cast<std::size_t>(
    std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

// ---- json helpers ----

json team_json(const Team& t)
{
  return {{"id", t.id}, {"display_name", t.display_name}, {"members", t.members}};
}

Team team_from(const json& j)
{
  return {j.at("id").get<std::string>(), j.at("display_name").get<std::string>(),
          j.at("members").get<std::vector<std::string>>()};
}

json score_json(const ScoreEvent& s)
{
  return {{"team", s.team}, {"challenge", s.challenge}, {"phase", s.phase}, {"points", s.points}, {"at", s.at}};
}

ScoreEvent score_from(const json& j)
{
  return {j.at("team").get<std::string>(), j.at("challenge").get<std::string>(), j.at("phase").get<int>(),
          j.at("points").get<int>(), j.at("at").get<EventTime>()};
}

json submission_json(const Submission& s)
{
  return {{"submission_id", s.submission_id}, {"team", s.team},   {"player", s.player},
          {"challenge", s.challenge},         {"files", s.files}, {"at", s.at}};
}

Submission submission_from(const json& j)
{
  return {j.at("submission_id").get<std::string>(),
          j.at("team").get<std::string>(),
          j.at("player").get<std::string>(),
          j.at("challenge").get<std::string>(),
          j.at("files").get<std::map<std::string, std::string>>(),
          j.at("at").get<EventTime>()};
}

json assessment_json(const AssessmentRecord& a)
{
  return {{"submission_id", a.submission_id},
          {"team", a.team},
          {"challenge", a.challenge},
          {"acceptable", a.acceptable},
          {"report", a.report},
          {"error", a.error},
          {"at", a.at}};
}

AssessmentRecord assessment_from(const json& j)
{
  return {j.at("submission_id").get<std::string>(),
          j.at("team").get<std::string>(),
          j.at("challenge").get<std::string>(),
          j.at("acceptable").get<bool>(),
          j.at("report"),
          j.at("error").get<std::string>(),
          j.at("at").get<EventTime>()};
}

json hint_record_json(const HintRecord& h)
{
  return {{"player", h.player}, {"team", h.team}, {"challenge", h.challenge}, {"hint", to_json(h.hint)}};
}

HintRecord hint_record_from(const json& j)
{
  return {j.at("player").get<std::string>(), j.at("team").get<std::string>(), j.at("challenge").get<std::string>(),
          hint_from_json(j.at("hint"))};
}

json error_report_json(const ErrorReport& e)
{
  return {{"player", e.player}, {"challenge", e.challenge},
          {"text", e.text},     {"phase", e.phase},
          {"last_submission_id", e.last_submission_id}, {"at", e.at}};
}

ErrorReport error_report_from(const json& j)
{
  return {j.at("player").get<std::string>(), j.at("challenge").get<std::string>(),
          j.at("text").get<std::string>(),   j.at("phase").get<int>(),
          j.at("last_submission_id").get<std::string>(), j.at("at").get<EventTime>()};
}

json survey_json(const SurveySubmission& s)
{
  json answers = json::array();
  for (const auto& a : s.answers)
    answers.push_back({{"qid", a.qid}, {"value", a.value}});
  return {{"participant", s.participant}, {"answers", answers}, {"at", s.at}};
}

SurveySubmission survey_from(const json& j)
{
  SurveySubmission s;
  s.participant = j.at("participant").get<std::string>();
  for (const auto& a : j.at("answers"))
    s.answers.push_back({a.at("qid").get<std::string>(), a.at("value").get<int>()});
  s.at = j.at("at").get<EventTime>();
  return s;
}

json agenda_json(const std::vector<AgendaBlock>& agenda)
{
  json out = json::array();
  for (const auto& b : agenda)
    out.push_back({{"name", to_string(b.name)}, {"duration_minutes", b.duration_minutes}});
  return out;
}

std::vector<AgendaBlock> agenda_from(const json& j)
{
  std::vector<AgendaBlock> out;
  for (const auto& b : j) {
    auto name = parse_block(b.at("name").get<std::string>());
    if (!name)
      throw StorageError("StorageCorrupt", "unknown agenda block " + b.at("name").dump());
    out.push_back({*name, b.at("duration_minutes").get<int>()});
  }
  return out;
}

template <class... Ts>
struct overloaded : Ts...
{
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

} // namespace

std::string_view to_string(Mode m)
{
  return m == Mode::STANDALONE ? "STANDALONE" : "WORKSHOP";
}

std::optional<Mode> parse_mode(std::string_view s)
{
  if (s == "STANDALONE")
    return Mode::STANDALONE;
  if (s == "WORKSHOP")
    return Mode::WORKSHOP;
  return std::nullopt;
}

std::string_view to_string(BlockName b)
{
  return kBlockNames[static_cast<std::size_t>(b)].second;
}

std::optional<BlockName> parse_block(std::string_view s)
{
  for (auto [b, name] : kBlockNames)
    if (name == s)
      return b;
  return std::nullopt;
}

std::vector<AgendaBlock> default_agenda()
{
  std::vector<AgendaBlock> out;
  for (std::size_t i = 0; i < kBlockNames.size(); ++i)
    out.push_back({kBlockNames[i].first, kDefaultMinutes[i]});
  return out;
}

std::vector<AgendaBlock> agenda_with_overrides(const std::map<BlockName, int>& durations)
{
  auto agenda = default_agenda();
  for (auto& b : agenda) {
    if (auto it = durations.find(b.name); it != durations.end()) {
      if (it->second <= 0)
        throw GameError("InvalidAgenda", std::string(to_string(b.name)) + " must last at least one minute");
      b.duration_minutes = it->second;
    }
  }
  return agenda;
}

AgendaPosition advance_agenda(std::span<const AgendaBlock> agenda, EventTime now)
{
  if (now < 0)
    throw GameError("NegativeClock", "event clock reading " + std::to_string(now) + " is negative");
  if (agenda.empty())
    throw GameError("InvalidAgenda", "agenda is empty");
  EventTime start = 0;
  for (const auto& b : agenda) {
    EventTime end = start + minutes(b.duration_minutes);
    if (now < end)
      return {b.name, start, end, false};
    start = end;
  }
  const auto& last = agenda.back();
  return {last.name, start - minutes(last.duration_minutes), start, true};
}

std::pair<EventTime, EventTime> block_window(std::span<const AgendaBlock> agenda, BlockName name)
{
  EventTime start = 0;
  for (const auto& b : agenda) {
    EventTime end = start + minutes(b.duration_minutes);
    if (b.name == name)
      return {start, end};
    start = end;
  }
  throw GameError("InvalidAgenda", "agenda has no " + std::string(to_string(name)) + " block");
}

std::string normalize_text_answer(std::string_view text)
{
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space)
      out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

GradeResult grade_quiz(const Question& question, const json& answer)
{
  return std::visit(overloaded{
                      [&](const SingleChoice& q) { return grade_single(q, answer); },
                      [&](const MultipleChoice& q) { return grade_multiple(q, answer); },
                      [&](const TextEntry& q) { return grade_text(q, answer); },
                      [&](const AssociateLeftRight& q) { return grade_pairs(q, answer); },
                      [&](const CodeSnippet& q) {
                        return std::visit(overloaded{
                                            [&](const SingleChoice& i) { return grade_single(i, answer); },
                                            [&](const MultipleChoice& i) { return grade_multiple(i, answer); },
                                            [&](const TextEntry& i) { return grade_text(i, answer); },
                                          },
                                          q.inner);
                      },
                    },
                    question);
}

// ---- state queries ----

const Team* GameState::team(std::string_view id) const
{
  for (const auto& t : teams)
    if (t.id == id)
      return &t;
  return nullptr;
}

const Team* GameState::team_of(std::string_view player) const
{
  for (const auto& t : teams)
    if (std::find(t.members.begin(), t.members.end(), player) != t.members.end())
      return &t;
  return nullptr;
}

int GameState::progress(const std::string& team, const std::string& challenge) const
{
  auto it = phase_progress.find({team, challenge});
  return it == phase_progress.end() ? 0 : it->second;
}

bool GameState::solved(const std::string& team, const std::string& challenge, int phase) const
{
  return std::any_of(solves.begin(), solves.end(), [&](const ScoreEvent& s) {
    return s.team == team && s.challenge == challenge && s.phase == phase;
  });
}

int GameState::total(const std::string& team) const
{
  int sum = 0;
  for (const auto& s : solves)
    if (s.team == team)
      sum += s.points;
  return sum;
}

const Submission* GameState::submission(std::string_view submission_id) const
{
  for (auto it = submissions.rbegin(); it != submissions.rend(); ++it)
    if (it->submission_id == submission_id)
      return &*it;
  return nullptr;
}

const AssessmentRecord* GameState::latest_assessment(const std::string& team, const std::string& challenge) const
{
  for (auto it = assessments.rbegin(); it != assessments.rend(); ++it)
    if (it->team == team && it->challenge == challenge)
      return &*it;
  return nullptr;
}

std::vector<Hint> GameState::hints_for(const std::string& player, const std::string& challenge) const
{
  std::vector<Hint> out;
  for (const auto& h : hints)
    if (h.player == player && h.challenge == challenge)
      out.push_back(h.hint);
  return out;
}

json to_json(const GameState& s)
{
  json teams = json::array();
  for (const auto& t : s.teams)
    teams.push_back(team_json(t));
  json solves = json::array();
  for (const auto& e : s.solves)
    solves.push_back(score_json(e));
  json progress = json::array();
  for (const auto& [k, v] : s.phase_progress)
    progress.push_back({k.first, k.second, v});
  json acceptable = json::array();
  for (const auto& [team, challenge] : s.acceptable)
    acceptable.push_back({team, challenge});
  json keys = json::object();
  for (const auto& [k, v] : s.solve_keys)
    keys[k] = score_json(v);
  json submissions = json::array();
  for (const auto& x : s.submissions)
    submissions.push_back(submission_json(x));
  json assessments = json::array();
  for (const auto& x : s.assessments)
    assessments.push_back(assessment_json(x));
  json hints = json::array();
  for (const auto& x : s.hints)
    hints.push_back(hint_record_json(x));
  json reports = json::array();
  for (const auto& x : s.error_reports)
    reports.push_back(error_report_json(x));
  json surveys = json::array();
  for (const auto& x : s.surveys)
    surveys.push_back(survey_json(x));
  return {{"event_id", s.event_id},
          {"mode", to_string(s.mode)},
          {"agenda", agenda_json(s.agenda)},
          {"wall_start", s.wall_start},
          {"clock", s.clock},
          {"teams", teams},
          {"solves", solves},
          {"phase_progress", progress},
          {"acceptable", acceptable},
          {"solve_keys", keys},
          {"submissions", submissions},
          {"assessments", assessments},
          {"hints", hints},
          {"error_reports", reports},
          {"surveys", surveys},
          {"applied", s.applied}};
}

GameState game_state_from_json(const json& j)
{
  try {
    GameState s;
    s.event_id = j.at("event_id").get<std::string>();
    auto mode = parse_mode(j.at("mode").get<std::string>());
    if (!mode)
      throw StorageError("StorageCorrupt", "unknown mode " + j.at("mode").dump());
    s.mode = *mode;
    s.agenda = agenda_from(j.at("agenda"));
    s.wall_start = j.at("wall_start").get<std::int64_t>();
    s.clock = j.at("clock").get<EventTime>();
    for (const auto& t : j.at("teams"))
      s.teams.push_back(team_from(t));
    for (const auto& e : j.at("solves"))
      s.solves.push_back(score_from(e));
    for (const auto& p : j.at("phase_progress"))
      s.phase_progress[{p.at(0).get<std::string>(), p.at(1).get<std::string>()}] = p.at(2).get<int>();
    for (const auto& p : j.at("acceptable"))
      s.acceptable.insert({p.at(0).get<std::string>(), p.at(1).get<std::string>()});
    for (const auto& [k, v] : j.at("solve_keys").items())
      s.solve_keys[k] = score_from(v);
    for (const auto& x : j.at("submissions"))
      s.submissions.push_back(submission_from(x));
    for (const auto& x : j.at("assessments"))
      s.assessments.push_back(assessment_from(x));
    for (const auto& x : j.at("hints"))
      s.hints.push_back(hint_record_from(x));
    for (const auto& x : j.at("error_reports"))
      s.error_reports.push_back(error_report_from(x));
    for (const auto& x : j.at("surveys"))
      s.surveys.push_back(survey_from(x));
    s.applied = j.at("applied").get<std::uint64_t>();
    return s;
  } catch (const json::exception& e) {
    throw StorageError("StorageCorrupt", std::string("snapshot: ") + e.what());
  }
}

// ---- events ----

json to_json(const GameEvent& event)
{
  return std::visit(
    overloaded{
      [](const ClockStarted& e) -> json { return {{"type", "clock_started"}, {"wall_start", e.wall_start}}; },
      [](const TeamRegistered& e) -> json {
        return {{"type", "team_registered"}, {"team", team_json(e.team)}, {"at", e.at}};
      },
      [](const PhaseAcknowledged& e) -> json {
        return {{"type", "phase_acknowledged"},
                {"team", e.team},
                {"challenge", e.challenge},
                {"phase", e.phase},
                {"at", e.at}};
      },
      [](const Solved& e) -> json {
        return {{"type", "solved"}, {"score", score_json(e.score)}, {"request_key", e.request_key}};
      },
      [](const Submitted& e) -> json {
        return {{"type", "submitted"}, {"submission", submission_json(e.submission)}};
      },
      [](const Assessed& e) -> json { return {{"type", "assessed"}, {"record", assessment_json(e.record)}}; },
      [](const HintIssued& e) -> json { return {{"type", "hint_issued"}, {"record", hint_record_json(e.record)}}; },
      [](const ErrorReported& e) -> json {
        return {{"type", "error_reported"}, {"report", error_report_json(e.report)}};
      },
      [](const SurveySubmitted& e) -> json { return {{"type", "survey_submitted"}, {"survey", survey_json(e.survey)}}; },
    },
    event);
}

GameEvent game_event_from_json(const json& j)
{
  try {
    const std::string type = j.at("type").get<std::string>();
    if (type == "clock_started")
      return ClockStarted{j.at("wall_start").get<std::int64_t>()};
    if (type == "team_registered")
      return TeamRegistered{team_from(j.at("team")), j.at("at").get<EventTime>()};
    if (type == "phase_acknowledged")
      return PhaseAcknowledged{j.at("team").get<std::string>(), j.at("challenge").get<std::string>(),
                               j.at("phase").get<int>(), j.at("at").get<EventTime>()};
    if (type == "solved")
      return Solved{score_from(j.at("score")), j.at("request_key").get<std::string>()};
    if (type == "submitted")
      return Submitted{submission_from(j.at("submission"))};
    if (type == "assessed")
      return Assessed{assessment_from(j.at("record"))};
    if (type == "hint_issued")
      return HintIssued{hint_record_from(j.at("record"))};
    if (type == "error_reported")
      return ErrorReported{error_report_from(j.at("report"))};
    if (type == "survey_submitted")
      return SurveySubmitted{survey_from(j.at("survey"))};
    throw StorageError("StorageCorrupt", "unknown event type '" + type + "'");
  } catch (const json::exception& e) {
    throw StorageError("StorageCorrupt", std::string("malformed event: ") + e.what());
  }
}

EventTime event_time(const GameEvent& event)
{
  return std::visit(overloaded{
                      [](const ClockStarted&) -> EventTime { return 0; },
                      [](const TeamRegistered& e) { return e.at; },
                      [](const PhaseAcknowledged& e) { return e.at; },
                      [](const Solved& e) { return e.score.at; },
                      [](const Submitted& e) { return e.submission.at; },
                      [](const Assessed& e) { return e.record.at; },
                      [](const HintIssued& e) -> EventTime { return e.record.hint.issued_at; },
                      [](const ErrorReported& e) { return e.report.at; },
                      [](const SurveySubmitted& e) { return e.survey.at; },
                    },
                    event);
}

void apply_event(GameState& s, const GameEvent& event)
{
  std::visit(overloaded{
               [&](const ClockStarted& e) { s.wall_start = e.wall_start; },
               [&](const TeamRegistered& e) { s.teams.push_back(e.team); },
               [&](const PhaseAcknowledged& e) {
                 int& p = s.phase_progress[{e.team, e.challenge}];
                 p = std::max(p, e.phase);
               },
               [&](const Solved& e) {
                 s.solves.push_back(e.score);
                 int& p = s.phase_progress[{e.score.team, e.score.challenge}];
                 p = std::max(p, e.score.phase);
                 if (!e.request_key.empty())
                   s.solve_keys[e.request_key] = e.score;
               },
               [&](const Submitted& e) { s.submissions.push_back(e.submission); },
               [&](const Assessed& e) {
                 s.assessments.push_back(e.record);
                 if (e.record.acceptable)
                   s.acceptable.insert({e.record.team, e.record.challenge});
               },
               [&](const HintIssued& e) { s.hints.push_back(e.record); },
               [&](const ErrorReported& e) { s.error_reports.push_back(e.report); },
               [&](const SurveySubmitted& e) { s.surveys.push_back(e.survey); },
             },
             event);
  s.clock = std::max(s.clock, event_time(event));
  ++s.applied;
}

GameState replay(GameState state, std::span<const GameEvent> events)
{
  for (const auto& e : events)
    apply_event(state, e);
  return state;
}

// ---- rules ----

std::vector<ScoreboardRow> scoreboard(const GameState& state)
{
  std::vector<ScoreboardRow> rows;
  for (const auto& t : state.teams)
    rows.push_back({t.id, t.display_name, 0, std::nullopt});
  for (const auto& s : state.solves) {
    for (auto& r : rows) {
      if (r.team != s.team)
        continue;
      r.points += s.points;
      r.last_solve_at = std::max(r.last_solve_at.value_or(s.at), s.at);
    }
  }
  std::sort(rows.begin(), rows.end(), [](const ScoreboardRow& a, const ScoreboardRow& b) {
    if (a.points != b.points)
      return a.points > b.points;
    // A team that never solved ranks after any team that did.
    EventTime la = a.last_solve_at.value_or(std::numeric_limits<EventTime>::max());
    EventTime lb = b.last_solve_at.value_or(std::numeric_limits<EventTime>::max());
    if (la != lb)
      return la < lb;
    return a.team < b.team;
  });
  return rows;
}

Team winner(const GameState& state)
{
  if (state.teams.empty())
    throw GameError("NoTeams", "no team is registered");
  auto [winner_start, winner_end] = block_window(state.agenda, BlockName::WINNER);
  if (state.clock < winner_start)
    throw GameError("GameNotFinished", "the winner is announced when the WINNER block starts");
  return *state.team(scoreboard(state).front().team);
}

int phase_points(const ChallengeBundle& bundle, int phase)
{
  return static_cast<int>(std::lround(bundle.points * bundle.phase(phase).awards_fraction));
}

// ---- commands ----

Game::Game(GameState initial, Sink sink)
  : state_(std::move(initial))
  , sink_(std::move(sink))
{
}

EventTime Game::stamp(EventTime now) const
{
  return std::max(now, state_.clock);
}

void Game::commit(const GameEvent& event)
{
  if (sink_)
    sink_(event);
  apply_event(state_, event);
}

std::int64_t Game::start_clock(std::int64_t wall_start)
{
  if (state_.wall_start == 0)
    commit(ClockStarted{wall_start});
  return state_.wall_start;
}

const Team& Game::register_team(Team team, EventTime now)
{
  EventTime at = stamp(now);
  if (at >= block_window(state_.agenda, BlockName::MAIN_EVENT).first)
    throw GameError("RegistrationClosed", "teams can only register before the main event");
  static const std::regex id_pattern("[A-Za-z0-9][A-Za-z0-9_.-]{0,63}");
  if (!std::regex_match(team.id, id_pattern) || team.members.empty())
    throw GameError("InvalidTeam", "a team needs an id of 1-64 letters, digits, '.', '_' or '-' and at least one member");
  if (state_.team(team.id))
    throw GameError("DuplicateTeam", "team '" + team.id + "' already exists");
  std::set<std::string> seen;
  for (const auto& m : team.members) {
    if (m.empty())
      throw GameError("InvalidTeam", "member ids must be non-empty");
    if (!seen.insert(m).second || state_.team_of(m))
      throw GameError("DuplicateMember", "player '" + m + "' already belongs to a team");
  }
  if (team.display_name.empty())
    team.display_name = team.id;
  commit(TeamRegistered{team, at});
  return state_.teams.back();
}

int Game::acknowledge(const std::string& team, const ChallengeBundle& bundle, int phase, EventTime now)
{
  if (!state_.team(team))
    throw GameError("UnknownTeam", "unknown team '" + team + "'");
  if (phase < 1 || phase > 3)
    throw GameError("UnknownPhase", "phase " + std::to_string(phase) + " does not exist");
  int current = state_.progress(team, bundle.id);
  if (phase <= current)
    return current;
  if (phase > current + 1)
    throw GameError("PhaseOrderViolation",
                    "phase " + std::to_string(phase) + " needs phase " + std::to_string(phase - 1) + " first");
  if (is_scorable(bundle.phase(phase)) && !state_.solved(team, bundle.id, phase))
    throw GameError("PhaseOrderViolation", "phase " + std::to_string(phase) + " must be solved before moving on");
  commit(PhaseAcknowledged{team, bundle.id, phase, stamp(now)});
  return phase;
}

ScoreEvent Game::record_solve(const std::string& team, const ChallengeBundle& bundle, int phase, EventTime now,
                              const std::string& request_key)
{
  if (!request_key.empty()) {
    if (auto it = state_.solve_keys.find(request_key); it != state_.solve_keys.end())
      return it->second;
  }
  EventTime at = stamp(now);
  auto [open, close] = block_window(state_.agenda, BlockName::MAIN_EVENT);
  if (at < open || at >= close)
    throw GameError("GameClosed", at < open ? "the game has not started yet" : "teams can no longer submit points");
  if (!state_.team(team))
    throw GameError("UnknownTeam", "unknown team '" + team + "'");
  if (phase < 1 || phase > 3 || !is_scorable(bundle.phase(phase)))
    throw GameError("PhaseNotScorable", "phase " + std::to_string(phase) + " awards no points");
  if (state_.solved(team, bundle.id, phase))
    throw GameError("DuplicateSolve", "phase " + std::to_string(phase) + " of " + bundle.id + " is already solved");
  if (state_.progress(team, bundle.id) < phase - 1)
    throw GameError("PhaseOrderViolation", "phase " + std::to_string(phase - 1) + " has not been acknowledged");
  if (bundle.kind == ChallengeKind::CEC && phase == 2 && !state_.acceptable.contains({team, bundle.id}))
    throw GameError("NotAcceptable", "no acceptable submission for " + bundle.id);
  ScoreEvent score{team, bundle.id, phase, phase_points(bundle, phase), at};
  commit(Solved{score, request_key});
  return score;
}

void Game::record_submission(Submission submission, EventTime now)
{
  submission.at = stamp(now);
  commit(Submitted{std::move(submission)});
}

void Game::record_assessment(AssessmentRecord record, EventTime now)
{
  record.at = stamp(now);
  commit(Assessed{std::move(record)});
}

void Game::record_hint(HintRecord record, EventTime now)
{
  record.hint.issued_at = stamp(now);
  commit(HintIssued{std::move(record)});
}

void Game::record_error_report(ErrorReport report, EventTime now)
{
  if (report.text.empty())
    throw GameError("EmptyText", "error reports need a description");
  if (utf8_length(report.text) > kMaxErrorReportChars)
    throw GameError("TextTooLong", "error reports hold at most " + std::to_string(kMaxErrorReportChars) + " characters");
  report.at = stamp(now);
  commit(ErrorReported{std::move(report)});
}

void Game::record_survey(SurveySubmission survey, EventTime now)
{
  for (const auto& s : state_.surveys)
    if (s.participant == survey.participant)
      throw GameError("DuplicateSurvey", "participant '" + survey.participant + "' already answered the survey");
  if (survey.answers.empty())
    throw GameError("LikertRange", "a survey needs at least one answer");
  std::set<std::string> seen;
  for (const auto& a : survey.answers) {
    if (a.value < 1 || a.value > 5)
      throw GameError("LikertRange", "answer to " + a.qid + " must be between 1 and 5");
    if (a.qid.empty() || !seen.insert(a.qid).second)
      throw GameError("LikertRange", "question ids must be present and unique");
  }
  survey.at = stamp(now);
  commit(SurveySubmitted{std::move(survey)});
}

} // namespace csc
