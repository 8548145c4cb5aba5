#include "csc/service.hpp"

#include "csc/coach.hpp"
#include "csc/error.hpp"
#include "csc/event_log.hpp"
#include "csc/export.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace csc {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- configuration ----

namespace {

[[noreturn]] void config_error(const std::string& what)
{
  throw Error("ConfigInvalid", what);
}

std::string config_string(const json& j, const char* key, bool required)
{
  if (!j.contains(key)) {
    if (required)
      config_error(std::string("missing '") + key + "'");
    return {};
  }
  if (!j[key].is_string())
    config_error(std::string("'") + key + "' must be a string");
  return j[key].get<std::string>();
}

int config_positive(const json& j, const char* key, int fallback)
{
  if (!j.contains(key))
    return fallback;
  if (!j[key].is_number_integer() || j[key].get<long long>() <= 0 || j[key].get<long long>() > 1'000'000)
    config_error(std::string("'") + key + "' must be a positive integer");
  return j[key].get<int>();
}

std::vector<std::string> config_strings(const json& j, const char* key)
{
  std::vector<std::string> out;
  if (!j.contains(key))
    return out;
  if (!j[key].is_array())
    config_error(std::string("'") + key + "' must be an array of strings");
  for (const auto& v : j[key]) {
    if (!v.is_string() || v.get<std::string>().empty())
      config_error(std::string("'") + key + "' must hold non-empty strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

} // namespace

EventConfig event_config_from_json(const json& j, const fs::path& base_dir)
{
  if (!j.is_object())
    config_error("the event config must be a JSON object");
  EventConfig c;
  c.event_id = config_string(j, "event_id", true);
  static const std::regex id_pattern("[A-Za-z0-9][A-Za-z0-9_.-]{0,63}");
  if (!std::regex_match(c.event_id, id_pattern))
    config_error("'event_id' must be 1-64 letters, digits, '.', '_' or '-'");
  c.name = config_string(j, "name", false);
  if (c.name.empty())
    c.name = c.event_id;

  if (j.contains("mode")) {
    auto mode = j["mode"].is_string() ? parse_mode(j["mode"].get<std::string>()) : std::nullopt;
    if (!mode)
      config_error("'mode' must be WORKSHOP or STANDALONE");
    c.mode = *mode;
  }
  if (j.contains("agenda")) {
    if (!j["agenda"].is_object())
      config_error("'agenda' must map block names to minutes");
    std::map<BlockName, int> overrides;
    for (const auto& [name, minutes] : j["agenda"].items()) {
      auto block = parse_block(name);
      if (!block)
        config_error("unknown agenda block '" + name + "'");
      if (!minutes.is_number_integer())
        config_error("agenda block '" + name + "' needs whole minutes");
      overrides[*block] = minutes.get<int>();
    }
    try {
      c.agenda = agenda_with_overrides(overrides);
    } catch (const GameError& e) {
      config_error(e.what());
    }
  }

  for (const auto& b : config_strings(j, "bundles"))
    c.bundle_dirs.push_back(fs::path(b).is_absolute() ? fs::path(b) : base_dir / b);
  if (c.bundle_dirs.empty())
    config_error("'bundles' must list at least one challenge bundle");

  std::string registration = config_string(j, "registration", false);
  if (registration.empty() || registration == "open")
    c.registration = Registration::OPEN;
  else if (registration == "preassigned")
    c.registration = Registration::PREASSIGNED;
  else
    config_error("'registration' must be \"open\" or \"preassigned\"");

  if (j.contains("teams")) {
    if (!j["teams"].is_array())
      config_error("'teams' must be an array");
    for (const auto& t : j["teams"]) {
      if (!t.is_object())
        config_error("each team must be an object");
      Team team{config_string(t, "id", true), config_string(t, "display_name", false), config_strings(t, "members")};
      c.teams.push_back(std::move(team));
    }
  }
  if (c.registration == Registration::PREASSIGNED && c.teams.empty())
    config_error("preassigned registration needs a 'teams' list");

  c.join_codes = config_strings(j, "join_codes");
  if (c.join_codes.empty())
    config_error("'join_codes' must hold at least one code");
  c.admin_token = config_string(j, "admin_token", true);
  if (c.admin_token.size() < 16)
    config_error("'admin_token' must be at least 16 characters");

  if (j.contains("start")) {
    if (!j["start"].is_number_integer() || j["start"].get<std::int64_t>() <= 0)
      config_error("'start' must be a Unix time in milliseconds");
    c.start = j["start"].get<std::int64_t>();
  }
  std::string data_dir = config_string(j, "data_dir", false);
  c.data_dir = data_dir.empty() ? base_dir / "data" / c.event_id
                                : (fs::path(data_dir).is_absolute() ? fs::path(data_dir) : base_dir / data_dir);

  c.hint_cooldown_seconds = j.contains("hint_cooldown_seconds") && j["hint_cooldown_seconds"] == 0
                              ? 0
                              : config_positive(j, "hint_cooldown_seconds", c.hint_cooldown_seconds);
  if (j.contains("survey_open")) {
    if (!j["survey_open"].is_boolean())
      config_error("'survey_open' must be true or false");
    c.survey_open = j["survey_open"].get<bool>();
  }
  c.session_ttl_minutes = config_positive(j, "session_ttl_minutes", c.session_ttl_minutes);
  c.snapshot_interval_seconds = config_positive(j, "snapshot_interval_seconds", c.snapshot_interval_seconds);
  c.assessment_workers = config_positive(j, "assessment_workers", c.assessment_workers);
  return c;
}

EventConfig load_event_config(const fs::path& file)
{
  std::ifstream in(file);
  if (!in)
    config_error("cannot read " + file.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded())
    config_error(file.string() + " is not valid JSON");
  return event_config_from_json(j, fs::absolute(file).parent_path());
}

// ---- error mapping ----

int http_status(std::string_view code)
{
  static const std::map<std::string_view, int> table{
    {"Unauthorized", 401},
    {"SessionExpired", 401},
    {"GameClosed", 403},
    {"RegistrationClosed", 403},
    {"PhaseLocked", 403},
    {"SurveyClosed", 403},
    {"Forbidden", 403},
    {"InvalidJoinCode", 403},
    {"NotFound", 404},
    {"UnknownChallenge", 404},
    {"UnknownPhase", 404},
    {"UnknownTeam", 404},
    {"UnknownPlayer", 404},
    {"NoSubmission", 404},
    {"NoAssessment", 404},
    {"NoTeams", 404},
    {"DuplicateSolve", 409},
    {"DuplicateTeam", 409},
    {"DuplicateMember", 409},
    {"DuplicateSurvey", 409},
    {"PhaseOrderViolation", 409},
    {"NotAcceptable", 409},
    {"AssessmentInProgress", 409},
    {"AlreadyAcceptable", 409},
    {"GameNotFinished", 409},
    {"BadRequest", 422},
    {"PayloadShapeMismatch", 422},
    {"NotAQuestion", 422},
    {"PhaseNotScorable", 422},
    {"TextTooLong", 422},
    {"EmptyText", 422},
    {"LikertRange", 422},
    {"InvalidTeam", 422},
    {"NotCodeEntry", 422},
    {"UnsupportedTrack", 422},
    {"SubmissionAddsFiles", 422},
    {"PathTraversal", 422},
    {"Cooldown", 429},
    {"ShuttingDown", 503},
  };
  auto it = table.find(code);
  return it == table.end() ? 500 : it->second;
}

std::string api_error_code(std::string_view code)
{
  std::string out;
  for (std::size_t i = 0; i < code.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(code[i]);
    if (std::isupper(c) && i > 0 && !std::isupper(static_cast<unsigned char>(code[i - 1])))
      out += '_';
    out += static_cast<char>(std::toupper(c));
  }
  return out;
}

// ---- server ----

namespace {

std::int64_t system_ms()
{
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string random_token()
{
  static std::mutex m;
  static std::random_device rd;
  std::lock_guard lock(m);
  std::string out;
  for (int i = 0; i < 4; ++i) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(rd()));
    out += buf;
  }
  return out;
}

bool same_secret(std::string_view a, std::string_view b)
{
  unsigned char diff = a.size() == b.size() ? 0 : 1;
  for (std::size_t i = 0; i < a.size(); ++i)
    diff |= static_cast<unsigned char>(a[i] ^ b[i % std::max<std::size_t>(b.size(), 1)]);
  return diff == 0;
}

/// Runs mutations one at a time on a dedicated thread.
class CommandQueue
{
public:
  explicit CommandQueue(std::function<void()> after_each)
    : after_each_(std::move(after_each))
    , thread_([this] { loop(); })
  {
  }

  ~CommandQueue() { shutdown(); }

  template <class F>
  auto run(F&& f) -> std::invoke_result_t<F>
  {
    using R = std::invoke_result_t<F>;
    // Publish before the caller wakes so it reads its own write.
    std::packaged_task<R()> task([this, &f]() -> R {
      struct Publish
      {
        CommandQueue* q;
        ~Publish() { q->after_each_(); }
      } publish{this};
      return f();
    });
    auto result = task.get_future();
    {
      std::lock_guard lock(mutex_);
      if (stopping_)
        throw Error("ShuttingDown", "the server is shutting down");
      queue_.emplace_back([&task] { task(); });
    }
    ready_.notify_one();
    return result.get();
  }

  void shutdown()
  {
    {
      std::lock_guard lock(mutex_);
      if (stopping_)
        return;
      stopping_ = true;
    }
    ready_.notify_one();
    if (thread_.joinable())
      thread_.join();
  }

private:
  void loop()
  {
    for (;;) {
      std::function<void()> job;
      {
        std::unique_lock lock(mutex_);
        ready_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
        if (queue_.empty())
          return;
        job = std::move(queue_.front());
        queue_.pop_front();
      }
      job();
    }
  }

  std::function<void()> after_each_;
  std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<std::function<void()>> queue_;
  bool stopping_ = false;
  std::thread thread_;
};

struct Session
{
  std::string player;
  std::string team;
  std::int64_t expires_at = 0;
};

struct AssessmentJob
{
  std::string submission_id;
  std::string team;
  std::size_t bundle = 0;
  std::map<std::string, std::string> files;
};

json team_json(const Team& t)
{
  return {{"id", t.id}, {"display_name", t.display_name}, {"members", t.members}};
}

json score_json(const ScoreEvent& s)
{
  return {{"team", s.team}, {"challenge", s.challenge}, {"phase", s.phase}, {"points", s.points}, {"at_s", s.at / 1000}};
}

const Submission* latest_submission(const GameState& s, const std::string& team, const std::string& challenge)
{
  for (auto it = s.submissions.rbegin(); it != s.submissions.rend(); ++it)
    if (it->team == team && it->challenge == challenge)
      return &*it;
  return nullptr;
}

int phase_number(const std::string& text)
{
  if (text.size() > 2)
    throw Error("UnknownPhase", "phase " + text + " does not exist");
  int k = std::stoi(text);
  if (k < 1 || k > 3)
    throw Error("UnknownPhase", "phase " + text + " does not exist");
  return k;
}

} // namespace

struct EventServer::Impl
{
  EventConfig config;
  ServerOptions options;
  std::vector<ChallengeBundle> bundles;
  std::map<std::string, std::size_t> bundle_index;
  std::vector<std::string> warnings;

  EventLog log;
  std::unique_ptr<Game> game; // writer thread only
  std::uint64_t snapshot_seq = 0;

  mutable std::mutex published_mutex;
  std::shared_ptr<const GameState> published;

  std::mutex sessions_mutex;
  std::unordered_map<std::string, Session> sessions;

  Sandbox sandbox;
  Assessor assessor;
  Coach coach;

  std::mutex jobs_mutex;
  std::condition_variable jobs_ready;
  std::deque<AssessmentJob> jobs;
  std::set<std::string> in_flight; // teams
  bool jobs_stopping = false;
  std::vector<std::thread> workers;

  std::mutex ticker_mutex;
  std::condition_variable ticker_wake;
  bool ticker_stopping = false;
  std::thread ticker;

  httplib::Server http;
  std::once_flag shutdown_once;
  std::unique_ptr<CommandQueue> writer; // last: destroyed first

  Impl(EventConfig c, ServerOptions o)
    : config(std::move(c))
    , options(std::move(o))
    , log(config.data_dir)
    , sandbox(options.sandbox)
    , assessor(sandbox, options.assessor)
    , coach(CoachConfig{config.hint_cooldown_seconds})
  {
    if (!options.wall_clock)
      options.wall_clock = system_ms;
    if (!options.log)
      options.log = [](const std::string& line) { std::cerr << line << "\n"; };
    load_bundles();
    recover();
    writer = std::make_unique<CommandQueue>([this] { publish(); });
    for (int i = 0; i < config.assessment_workers; ++i)
      workers.emplace_back([this] { work(); });
    resume_pending_assessments();
    ticker = std::thread([this] { tick(); });
    install_routes();
  }

  ~Impl() { shutdown(); }

  void load_bundles()
  {
    for (const auto& dir : config.bundle_dirs) {
      try {
        bundles.push_back(load_bundle(dir));
      } catch (const BundleError& e) {
        config_error("bundle " + dir.string() + ": " + e.code() + ": " + e.what());
      }
    }
    auto report = validate_event(bundles);
    if (!report.valid()) {
      const auto& issue = report.issues.front();
      config_error(issue.code + " in " + issue.bundle_id + ": " + issue.detail);
    }
    for (std::size_t i = 0; i < bundles.size(); ++i)
      bundle_index[bundles[i].id] = i;
  }

  void recover()
  {
    GameState initial;
    initial.event_id = config.event_id;
    initial.mode = config.mode;
    initial.agenda = config.agenda;
    GameState state = log.recover(initial, &warnings);
    if (state.agenda != config.agenda || state.mode != config.mode) {
      warnings.push_back("agenda or mode changed since the event started; using the configured values");
      state.agenda = config.agenda;
      state.mode = config.mode;
    }
    snapshot_seq = log.sequence();
    game = std::make_unique<Game>(std::move(state), [this](const GameEvent& e) { log.append(e); });
    game->start_clock(config.start.value_or(options.wall_clock()));
    for (const auto& team : config.teams) {
      if (game->state().team(team.id))
        continue;
      try {
        game->register_team(team, 0);
      } catch (const GameError& e) {
        config_error("team " + team.id + ": " + e.what());
      }
    }
    for (const auto& w : warnings)
      options.log("recovery: " + w);
    published = std::make_shared<const GameState>(game->state());
  }

  // -- state access --

  void publish()
  {
    std::lock_guard lock(published_mutex);
    if (published->applied != game->state().applied)
      published = std::make_shared<const GameState>(game->state());
  }

  std::shared_ptr<const GameState> view() const
  {
    std::lock_guard lock(published_mutex);
    return published;
  }

  EventTime now() const
  {
    return std::max<EventTime>(0, options.wall_clock() - view()->wall_start);
  }

  const ChallengeBundle& bundle(const std::string& id) const
  {
    auto it = bundle_index.find(id);
    if (it == bundle_index.end())
      throw Error("UnknownChallenge", "unknown challenge '" + id + "'");
    return bundles[it->second];
  }

  void require_window(EventTime t, bool allow_after_close) const
  {
    auto [open, close] = block_window(config.agenda, BlockName::MAIN_EVENT);
    if (t < open)
      throw Error("GameClosed", "the game has not started yet");
    if (t >= close && !allow_after_close)
      throw Error("GameClosed", "teams can no longer submit points");
  }

  void snapshot_now()
  {
    writer->run([this] {
      if (log.sequence() != snapshot_seq) {
        log.snapshot(game->state());
        snapshot_seq = log.sequence();
      }
    });
  }

  // -- sessions --

  Session authenticate(const httplib::Request& req)
  {
    std::string header = req.get_header_value("Authorization");
    if (header.rfind("Bearer ", 0) != 0)
      throw Error("Unauthorized", "missing bearer token");
    std::string token = header.substr(7);
    std::lock_guard lock(sessions_mutex);
    auto it = sessions.find(token);
    if (it == sessions.end())
      throw Error("Unauthorized", "unknown session");
    if (it->second.expires_at <= options.wall_clock()) {
      sessions.erase(it);
      throw Error("SessionExpired", "the session expired; join again");
    }
    return it->second;
  }

  void require_admin(const httplib::Request& req) const
  {
    std::string header = req.get_header_value("Authorization");
    if (header.rfind("Bearer ", 0) != 0)
      throw Error("Unauthorized", "missing bearer token");
    if (!same_secret(header.substr(7), config.admin_token))
      throw Error("Forbidden", "admin token required");
  }

  void require_join_code(const json& body) const
  {
    std::string code = body.value("join_code", "");
    for (const auto& c : config.join_codes)
      if (same_secret(code, c))
        return;
    throw Error("InvalidJoinCode", "unknown join code");
  }

  // -- assessment workers --

  void enqueue(AssessmentJob job)
  {
    {
      std::lock_guard lock(jobs_mutex);
      jobs.push_back(std::move(job));
    }
    jobs_ready.notify_one();
  }

  void resume_pending_assessments()
  {
    auto state = view();
    std::set<std::string> assessed;
    for (const auto& a : state->assessments)
      assessed.insert(a.submission_id);
    std::lock_guard lock(jobs_mutex);
    for (const auto& s : state->submissions) {
      if (assessed.contains(s.submission_id) || in_flight.contains(s.team) || !bundle_index.contains(s.challenge))
        continue;
      in_flight.insert(s.team);
      jobs.push_back({s.submission_id, s.team, bundle_index.at(s.challenge), s.files});
    }
    jobs_ready.notify_all();
  }

  void work()
  {
    for (;;) {
      AssessmentJob job;
      {
        std::unique_lock lock(jobs_mutex);
        jobs_ready.wait(lock, [&] { return jobs_stopping || !jobs.empty(); });
        if (jobs_stopping)
          return;
        job = std::move(jobs.front());
        jobs.pop_front();
      }
      const ChallengeBundle& b = bundles[job.bundle];
      AssessmentRecord record{job.submission_id, job.team, b.id, false, nullptr, "", 0};
      try {
        AssessmentReport report = assessor.assess(b, job.files);
        record.acceptable = report.verdict.acceptable;
        record.report = to_json(report);
      } catch (const Error& e) {
        record.error = e.code() + ": " + e.what();
      } catch (const std::exception& e) {
        record.error = std::string("Internal: ") + e.what();
      }
      try {
        writer->run([&] {
          EventTime t = now();
          game->record_assessment(record, t);
          if (record.acceptable && !game->state().solved(job.team, b.id, 2)) {
            try {
              game->record_solve(job.team, b, 2, t);
            } catch (const GameError&) {
              // Closed window or phase order: the verdict stands without points.
            }
          }
        });
      } catch (const Error& e) {
        options.log("assessment of " + job.submission_id + " not recorded: " + e.what());
      }
      std::lock_guard lock(jobs_mutex);
      in_flight.erase(job.team);
    }
  }

  void tick()
  {
    std::unique_lock lock(ticker_mutex);
    while (!ticker_wake.wait_for(lock, std::chrono::seconds(config.snapshot_interval_seconds),
                                 [&] { return ticker_stopping; })) {
      lock.unlock();
      try {
        snapshot_now();
      } catch (const Error& e) {
        options.log(std::string("snapshot failed: ") + e.what());
      }
      lock.lock();
    }
  }

  void shutdown()
  {
    std::call_once(shutdown_once, [this] {
      http.stop();
      {
        std::lock_guard lock(ticker_mutex);
        ticker_stopping = true;
      }
      ticker_wake.notify_all();
      if (ticker.joinable())
        ticker.join();
      {
        std::lock_guard lock(jobs_mutex);
        jobs_stopping = true;
      }
      jobs_ready.notify_all();
      for (auto& w : workers)
        if (w.joinable())
          w.join();
      try {
        snapshot_now();
      } catch (const Error& e) {
        options.log(std::string("final snapshot failed: ") + e.what());
      }
      writer->shutdown();
    });
  }

  // -- routes --

  using Handler = std::function<json(const httplib::Request&, httplib::Response&)>;

  httplib::Server::Handler wrap(Handler h)
  {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      std::string code;
      std::string message;
      try {
        res.status = 200;
        json body = h(req, res);
        if (!body.is_null())
          res.set_content(body.dump(), "application/json");
        return;
      } catch (const Error& e) {
        code = e.code();
        message = e.what();
      } catch (const json::exception& e) {
        code = "BadRequest";
        message = e.what();
      } catch (const std::exception& e) {
        code = "Internal";
        message = e.what();
      }
      res.status = http_status(code);
      res.set_content(json{{"error", {{"code", api_error_code(code)}, {"message", message}}}}.dump(),
                      "application/json");
    };
  }

  static json body_of(const httplib::Request& req)
  {
    json j = json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw Error("BadRequest", "the request body must be a JSON object");
    return j;
  }

  json clock_json(const GameState& s, EventTime t) const
  {
    AgendaPosition pos = advance_agenda(s.agenda, t);
    return {{"event", config.name},
            {"mode", to_string(s.mode)},
            {"started", options.wall_clock() >= s.wall_start},
            {"block", to_string(pos.block)},
            {"elapsed_s", t / 1000},
            {"remaining_s", pos.remaining(t) / 1000},
            {"ended", pos.ended}};
  }

  void install_routes()
  {
    http.set_payload_max_length(8u << 20);

    http.Post("/teams", wrap([this](const auto& req, auto& res) {
      json body = body_of(req);
      if (config.registration != Registration::OPEN)
        throw Error("RegistrationClosed", "teams are assigned by the organizers");
      require_join_code(body);
      Team team{body.at("id").get<std::string>(), body.value("display_name", ""),
                body.at("members").get<std::vector<std::string>>()};
      Team created = writer->run([&] { return game->register_team(team, now()); });
      res.status = 201;
      return team_json(created);
    }));

    http.Post("/sessions", wrap([this](const auto& req, auto& res) {
      json body = body_of(req);
      require_join_code(body);
      std::string player = body.at("player_id").get<std::string>();
      const Team* team = view()->team_of(player);
      if (!team)
        throw Error("UnknownPlayer", "player '" + player + "' is not on a team");
      Session s{player, team->id, options.wall_clock() + std::int64_t{config.session_ttl_minutes} * 60'000};
      std::string token = random_token();
      {
        std::lock_guard lock(sessions_mutex);
        sessions[token] = s;
      }
      res.status = 201;
      return json{{"token", token}, {"player_id", s.player}, {"team_id", s.team}, {"expires_at", s.expires_at}};
    }));

    http.Get("/challenges", wrap([this](const auto& req, auto&) {
      Session s = authenticate(req);
      auto state = view();
      json out = json::array();
      for (const auto& b : bundles) {
        json solved = json::array();
        for (int k = 1; k <= 3; ++k)
          if (state->solved(s.team, b.id, k))
            solved.push_back(k);
        out.push_back({{"id", b.id},
                       {"title", b.title},
                       {"kind", to_string(b.kind)},
                       {"track", to_string(b.track)},
                       {"points", b.points},
                       {"progress", state->progress(s.team, b.id)},
                       {"solved", solved}});
      }
      return json{{"challenges", out}};
    }));

    http.Get(R"(/challenges/([^/]+)/phase/(\d+))", wrap([this](const auto& req, auto&) {
      Session s = authenticate(req);
      const ChallengeBundle& b = bundle(req.matches[1]);
      int k = phase_number(req.matches[2]);
      require_window(now(), true);
      auto state = view();
      int progress = state->progress(s.team, b.id);
      if (k > progress + 1)
        throw Error("PhaseLocked", "acknowledge phase " + std::to_string(k - 1) + " first");
      const Phase& p = b.phase(k);
      json out{{"challenge", b.id},
               {"index", k},
               {"body", p.body},
               {"question", p.question ? public_view(*p.question) : json(nullptr)},
               {"scorable", is_scorable(p)},
               {"points", phase_points(b, k)},
               {"solved", state->solved(s.team, b.id, k)},
               {"acknowledged", k <= progress}};
      if (b.kind == ChallengeKind::CEC && k == 2 && b.project) {
        std::map<std::string, std::string> files = b.project->files;
        if (const Submission* last = latest_submission(*state, s.team, b.id))
          for (const auto& [path, content] : last->files)
            files[path] = content;
        json tests = json::array();
        for (const auto& t : b.project->functional_tests)
          tests.push_back(t.id);
        out["files"] = files;
        out["tests"] = tests;
      }
      return out;
    }));

    http.Post(R"(/challenges/([^/]+)/phase/(\d+)/ack)", wrap([this](const auto& req, auto&) {
      Session s = authenticate(req);
      const ChallengeBundle& b = bundle(req.matches[1]);
      int k = phase_number(req.matches[2]);
      EventTime t = now();
      require_window(t, true);
      int progress = writer->run([&] { return game->acknowledge(s.team, b, k, t); });
      return json{{"challenge", b.id}, {"progress", progress}};
    }));

    http.Post(R"(/challenges/([^/]+)/phase/(\d+)/answer)", wrap([this](const auto& req, auto&) {
      Session s = authenticate(req);
      const ChallengeBundle& b = bundle(req.matches[1]);
      int k = phase_number(req.matches[2]);
      json body = body_of(req);
      const Phase& p = b.phase(k);
      if (!p.question)
        throw Error("NotAQuestion", "phase " + std::to_string(k) + " takes no answer");
      if (!body.contains("answer"))
        throw Error("PayloadShapeMismatch", "missing 'answer'");
      std::string key = body.value("request_key", "");
      return writer->run([&] {
        const GameState& st = game->state();
        if (!key.empty())
          if (auto it = st.solve_keys.find(key); it != st.solve_keys.end())
            return json{{"correct", true}, {"score", score_json(it->second)}};
        EventTime t = now();
        require_window(std::max(t, st.clock), false);
        if (st.progress(s.team, b.id) < k - 1)
          throw Error("PhaseOrderViolation", "phase " + std::to_string(k - 1) + " has not been acknowledged");
        if (st.solved(s.team, b.id, k))
          throw Error("DuplicateSolve", "phase " + std::to_string(k) + " is already solved");
        GradeResult grade = grade_quiz(*p.question, body["answer"]);
        if (!grade.correct)
          return json{{"correct", false}};
        return json{{"correct", true}, {"score", score_json(game->record_solve(s.team, b, k, t, key))}};
      });
    }));

    http.Post(R"(/challenges/([^/]+)/submit)", wrap([this](const auto& req, auto& res) {
      Session s = authenticate(req);
      const ChallengeBundle& b = bundle(req.matches[1]);
      json body = body_of(req);
      if (b.kind != ChallengeKind::CEC || !b.project)
        throw Error("NotCodeEntry", b.id + " takes no code");
      if (b.track != Track::C && b.track != Track::CPP)
        throw Error("UnsupportedTrack", "only C and C++ code can be assessed");
      auto files = body.at("files").get<std::map<std::string, std::string>>();
      if (files.empty())
        throw Error("PayloadShapeMismatch", "'files' must map project paths to contents");
      for (const auto& [path, content] : files) {
        check_relative_path(path);
        if (!b.project->files.contains(path))
          throw Error("SubmissionAddsFiles", "'" + path + "' is not a file of this project");
      }
      std::map<std::string, std::string> merged = b.project->files;
      for (const auto& [path, content] : files)
        merged[path] = content;
      std::string sid = submission_id(b.id, merged);
      {
        std::lock_guard lock(jobs_mutex);
        if (in_flight.contains(s.team))
          throw Error("AssessmentInProgress", "your team already has a submission being assessed");
        in_flight.insert(s.team);
      }
      try {
        writer->run([&] {
          const GameState& st = game->state();
          EventTime t = now();
          require_window(std::max(t, st.clock), false);
          if (st.progress(s.team, b.id) < 1)
            throw Error("PhaseOrderViolation", "phase 1 has not been acknowledged");
          if (st.solved(s.team, b.id, 2))
            throw Error("DuplicateSolve", "phase 2 is already solved");
          game->record_submission({sid, s.team, s.player, b.id, files, 0}, t);
        });
      } catch (...) {
        std::lock_guard lock(jobs_mutex);
        in_flight.erase(s.team);
        throw;
      }
      enqueue({sid, s.team, bundle_index.at(b.id), merged});
      res.status = 202;
      return json{{"submission_id", sid}, {"status", "queued"}};
    }));

    http.Get(R"(/challenges/([^/]+)/report)", wrap([this](const auto& req, auto&) {
      Session s = authenticate(req);
      const ChallengeBundle& b = bundle(req.matches[1]);
      auto state = view();
      const Submission* last = latest_submission(*state, s.team, b.id);
      if (!last)
        throw Error("NoSubmission", "no submission for " + b.id);
      const AssessmentRecord* rec = state->latest_assessment(s.team, b.id);
      json out{{"submission_id", last->submission_id}, {"solved", state->solved(s.team, b.id, 2)}};
      if (!rec || rec->submission_id != last->submission_id || rec->at < last->at) {
        out["status"] = "pending";
        return out;
      }
      out["status"] = rec->error.empty() ? "done" : "failed";
      out["acceptable"] = rec->acceptable;
      out["report"] = rec->report;
      if (!rec->error.empty())
        out["error"] = rec->error;
      return out;
    }));

    http.Post(R"(/challenges/([^/]+)/hint)", wrap([this](const auto& req, auto& res) {
      Session s = authenticate(req);
      const ChallengeBundle& b = bundle(req.matches[1]);
      try {
        Hint hint = writer->run([&] {
          const GameState& st = game->state();
          const AssessmentRecord* rec = st.latest_assessment(s.team, b.id);
          if (!rec || rec->report.is_null())
            throw Error("NoAssessment", "submit code first; hints follow the assessment");
          EventTime t = std::max(now(), st.clock);
          auto history = st.hints_for(s.player, b.id);
          Hint h = coach.next_hint(report_from_json(rec->report), history, b, t);
          game->record_hint({s.player, s.team, b.id, h}, t);
          return game->state().hints.back().hint;
        });
        return to_json(hint);
      } catch (const CoachError& e) {
        if (e.code() == "Cooldown")
          res.set_header("Retry-After", std::to_string(config.hint_cooldown_seconds));
        throw;
      }
    }));

    http.Get("/scoreboard", wrap([this](const auto&, auto&) {
      auto state = view();
      json rows = json::array();
      int rank = 0;
      for (const auto& r : scoreboard(*state))
        rows.push_back({{"rank", ++rank},
                        {"team", r.team},
                        {"display_name", r.display_name},
                        {"points", r.points},
                        {"last_solve_s", r.last_solve_at ? json(*r.last_solve_at / 1000) : json(nullptr)}});
      return json{{"rows", rows}, {"clock", clock_json(*state, now())}};
    }));

    http.Get("/clock", wrap([this](const auto&, auto&) {
      auto state = view();
      return clock_json(*state, now());
    }));

    http.Get("/winner", wrap([this](const auto&, auto&) {
      GameState state = *view();
      state.clock = std::max(state.clock, now());
      Team w = winner(state);
      return json{{"team", w.id}, {"display_name", w.display_name}, {"points", state.total(w.id)}};
    }));

    http.Post("/error-reports", wrap([this](const auto& req, auto& res) {
      Session s = authenticate(req);
      json body = body_of(req);
      std::string challenge = body.value("challenge_id", "");
      if (!challenge.empty())
        bundle(challenge);
      if (!body.contains("text") || !body["text"].is_string())
        throw Error("PayloadShapeMismatch", "'text' must be a string");
      writer->run([&] {
        const GameState& st = game->state();
        const Submission* last = latest_submission(st, s.team, challenge);
        game->record_error_report({s.player, challenge, body["text"].get<std::string>(), st.progress(s.team, challenge),
                                   last ? last->submission_id : "", 0},
                                  now());
      });
      res.status = 201;
      return json{{"received", true}};
    }));

    http.Post("/surveys/responses", wrap([this](const auto& req, auto& res) {
      Session s = authenticate(req);
      json body = body_of(req);
      if (!config.survey_open && now() < block_window(config.agenda, BlockName::FEEDBACK).first)
        throw Error("SurveyClosed", "the survey opens with the feedback block");
      if (!body.contains("answers") || !body["answers"].is_array())
        throw Error("PayloadShapeMismatch", "'answers' must be an array of {qid, value}");
      SurveySubmission survey{s.player, {}, 0};
      for (const auto& a : body["answers"]) {
        if (!a.is_object() || !a.contains("qid") || !a["qid"].is_string() || !a.contains("value") ||
            !a["value"].is_number_integer())
          throw Error("PayloadShapeMismatch", "each answer needs a string qid and an integer value");
        long long v = a["value"].get<long long>();
        if (v < 1 || v > 5)
          throw Error("LikertRange", "answer to " + a["qid"].get<std::string>() + " must be between 1 and 5");
        survey.answers.push_back({a["qid"].get<std::string>(), static_cast<int>(v)});
      }
      writer->run([&] { game->record_survey(survey, now()); });
      res.status = 201;
      return json{{"received", survey.answers.size()}};
    }));

    http.Get("/admin/export", wrap([this](const auto& req, auto& res) {
      require_admin(req);
      std::string zip = writer->run([&] {
        std::ifstream in(log.log_path(), std::ios::binary);
        std::ostringstream bytes;
        bytes << in.rdbuf();
        return export_archive(game->state(), bytes.str());
      });
      res.set_header("Content-Disposition", "attachment; filename=\"" + config.event_id + "-export.zip\"");
      res.set_content(zip, "application/zip");
      return json(nullptr);
    }));

    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty())
        res.set_content(
          json{{"error", {{"code", res.status == 404 ? "NOT_FOUND" : "HTTP_" + std::to_string(res.status)},
                          {"message", httplib::status_message(res.status)}}}}
            .dump(),
          "application/json");
    });
  }
};

EventServer::EventServer(EventConfig config, ServerOptions options)
  : impl_(std::make_unique<Impl>(std::move(config), std::move(options)))
{
}

EventServer::~EventServer() = default;

int EventServer::bind(const std::string& host, int port)
{
  if (port == 0) {
    int bound = impl_->http.bind_to_any_port(host);
    if (bound <= 0)
      throw Error("PortInUse", "cannot bind " + host);
    return bound;
  }
  if (!impl_->http.bind_to_port(host, port))
    throw Error("PortInUse", "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void EventServer::run()
{
  impl_->http.listen_after_bind();
  impl_->shutdown();
}

void EventServer::stop()
{
  impl_->http.stop();
}

void EventServer::wait_until_ready() const
{
  impl_->http.wait_until_ready();
}

GameState EventServer::state() const
{
  return *impl_->view();
}

const std::vector<std::string>& EventServer::recovery_warnings() const
{
  return impl_->warnings;
}

} // namespace csc
