#include "doctest.h"

#include "csc/error.hpp"
#include "csc/export.hpp"
#include "csc/service.hpp"
#include "test_support.hpp"

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cstring>
#include <thread>

using namespace csc;
using nlohmann::json;
using csc::testing::TempDir;
namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kStart = 1'700'000'000'000;
constexpr const char* kAdmin = "admin-token-0123456789";

std::map<std::string, std::string> unzip_stored(const std::string& zip)
{
  auto u16 = [&](std::size_t at) {
    return static_cast<unsigned>(static_cast<unsigned char>(zip[at])) |
           static_cast<unsigned>(static_cast<unsigned char>(zip[at + 1])) << 8;
  };
  auto u32 = [&](std::size_t at) { return u16(at) | u16(at + 2) << 16; };
  std::size_t eocd = zip.rfind(std::string("PK\x05\x06", 4));
  REQUIRE(eocd != std::string::npos);
  std::size_t count = u16(eocd + 10);
  std::size_t at = u32(eocd + 16);
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < count; ++i) {
    REQUIRE(u32(at) == 0x02014b50);
    std::size_t size = u32(at + 20);
    std::size_t name_len = u16(at + 28);
    std::size_t extra = u16(at + 30) + u16(at + 32);
    std::size_t local = u32(at + 42);
    std::string name = zip.substr(at + 46, name_len);
    std::size_t data = local + 30 + u16(local + 26) + u16(local + 28);
    out[name] = zip.substr(data, size);
    at += 46 + name_len + extra;
  }
  return out;
}

json event_json(const fs::path& data_dir)
{
  fs::path challenges = CSC_CHALLENGES_DIR;
  return {{"name", "Test event"},
          {"event_id", "test-event"},
          {"bundles", {(challenges / "scq-banned-function").string(), (challenges / "c-gets-greeting").string()}},
          {"join_codes", {"JOIN-1"}},
          {"admin_token", kAdmin},
          {"start", kStart},
          {"data_dir", data_dir.string()},
          {"snapshot_interval_seconds", 3600}};
}

/// A running server on a free port with a hand-driven wall clock.
struct Harness
{
  std::shared_ptr<std::atomic<std::int64_t>> wall = std::make_shared<std::atomic<std::int64_t>>(kStart);
  std::unique_ptr<EventServer> server;
  std::thread thread;
  std::unique_ptr<httplib::Client> client;

  explicit Harness(const json& config)
  {
    ServerOptions options;
    options.wall_clock = [w = wall] { return w->load(); };
    options.log = [](const std::string&) {};
    options.sandbox.pool_size = 2;
    server = std::make_unique<EventServer>(event_config_from_json(config, "/"), options);
    int port = server->bind("127.0.0.1", 0);
    thread = std::thread([this] { server->run(); });
    server->wait_until_ready();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
    client->set_read_timeout(120);
  }

  ~Harness()
  {
    server->stop();
    thread.join();
  }

  void at_minute(double m) { wall->store(kStart + static_cast<std::int64_t>(m * 60'000)); }
  void advance_seconds(int s) { wall->fetch_add(std::int64_t{s} * 1000); }

  std::pair<int, json> call(const std::string& method, const std::string& path, const json& body = nullptr,
                            const std::string& token = "")
  {
    httplib::Headers headers;
    if (!token.empty())
      headers.emplace("Authorization", "Bearer " + token);
    httplib::Result r = method == "GET" ? client->Get(path, headers)
                                        : client->Post(path, headers, body.is_null() ? "" : body.dump(),
                                                       "application/json");
    REQUIRE(r);
    json j = json::parse(r->body, nullptr, false);
    return {r->status, j};
  }

  std::string join(const std::string& team, const std::vector<std::string>& members)
  {
    auto [status, body] = call("POST", "/teams", {{"join_code", "JOIN-1"}, {"id", team}, {"members", members}});
    REQUIRE(status == 201);
    auto [s2, session] = call("POST", "/sessions", {{"join_code", "JOIN-1"}, {"player_id", members.front()}});
    REQUIRE(s2 == 201);
    return session["token"].get<std::string>();
  }

  json wait_for_report(const std::string& challenge, const std::string& token)
  {
    for (int i = 0; i < 600; ++i) {
      auto [status, body] = call("GET", "/challenges/" + challenge + "/report", nullptr, token);
      REQUIRE(status == 200);
      if (body["status"] != "pending")
        return body;
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    FAIL("assessment did not finish");
    return nullptr;
  }
};

std::string code_of(const json& body)
{
  return body.contains("error") ? body["error"]["code"].get<std::string>() : "";
}

bool sandbox_ready()
{
  static const bool ready = !Sandbox().unavailable_reason().has_value();
  return ready;
}

} // namespace

TEST_SUITE("service")
{
  TEST_CASE("error codes and statuses")
  {
    CHECK(api_error_code("GameClosed") == "GAME_CLOSED");
    CHECK(api_error_code("DuplicateSolve") == "DUPLICATE_SOLVE");
    CHECK(http_status("Unauthorized") == 401);
    CHECK(http_status("GameClosed") == 403);
    CHECK(http_status("UnknownChallenge") == 404);
    CHECK(http_status("DuplicateSolve") == 409);
    CHECK(http_status("PayloadShapeMismatch") == 422);
    CHECK(http_status("TextTooLong") == 422);
    CHECK(http_status("Cooldown") == 429);
    CHECK(http_status("Whatever") == 500);
  }

  TEST_CASE("event config validation")
  {
    TempDir dir;
    json good = event_json(dir.path / "data");
    EventConfig c = event_config_from_json(good, "/");
    CHECK(c.event_id == "test-event");
    CHECK(c.bundle_dirs.size() == 2);
    CHECK(c.start == std::optional<std::int64_t>(kStart));

    auto code = [&](json j) {
      try {
        event_config_from_json(j, "/");
      } catch (const Error& e) {
        return e.code();
      }
      return std::string();
    };
    json j = good;
    j.erase("join_codes");
    CHECK(code(j) == "ConfigInvalid");
    j = good;
    j["agenda"] = {{"MAIN_EVENT", 0}};
    CHECK(code(j) == "ConfigInvalid");
    j = good;
    j["agenda"] = {{"LUNCH", 30}};
    CHECK(code(j) == "ConfigInvalid");
    j = good;
    j["admin_token"] = "short";
    CHECK(code(j) == "ConfigInvalid");
    j = good;
    j["registration"] = "preassigned";
    CHECK(code(j) == "ConfigInvalid");
    j = good;
    j["agenda"] = {{"MAIN_EVENT", 240}};
    CHECK(event_config_from_json(j, "/").agenda[3].duration_minutes == 240);

    j = good;
    j["bundles"] = {(dir.path / "missing").string()};
    CHECK_THROWS_WITH_AS(EventServer(event_config_from_json(j, "/")), doctest::Contains("ManifestMissing"), Error);
    j = good;
    j["bundles"].push_back(good["bundles"][0]);
    CHECK_THROWS_WITH_AS(EventServer(event_config_from_json(j, "/")), doctest::Contains("DuplicateId"), Error);
  }

  TEST_CASE("quiz flow over http")
  {
    TempDir dir;
    Harness h(event_json(dir.path / "data"));

    auto [s0, clock] = h.call("GET", "/clock");
    CHECK(s0 == 200);
    CHECK(clock["block"] == "WELCOME");

    CHECK(h.call("POST", "/teams", {{"join_code", "nope"}, {"id", "red"}, {"members", {"alice"}}}).first == 403);
    std::string red = h.join("red", {"alice", "ann"});
    std::string blue = h.join("blue", {"bob"});
    CHECK(h.call("POST", "/teams", {{"join_code", "JOIN-1"}, {"id", "red"}, {"members", {"x"}}}).first == 409);
    CHECK(h.call("POST", "/sessions", {{"join_code", "JOIN-1"}, {"player_id", "nobody"}}).first == 404);

    CHECK(h.call("GET", "/challenges").first == 401);
    CHECK(h.call("GET", "/challenges", nullptr, "forged").first == 401);
    auto [s1, list] = h.call("GET", "/challenges", nullptr, red);
    CHECK(s1 == 200);
    CHECK(list["challenges"].size() == 2);

    auto [s2, early] = h.call("GET", "/challenges/scq-banned-function/phase/1", nullptr, red);
    CHECK(s2 == 403);
    CHECK(code_of(early) == "GAME_CLOSED");

    h.at_minute(65);
    auto [s3, clock2] = h.call("GET", "/clock");
    CHECK(clock2["block"] == "MAIN_EVENT");
    CHECK(clock2["remaining_s"] == 315 * 60);

    CHECK(h.call("POST", "/teams", {{"join_code", "JOIN-1"}, {"id", "late"}, {"members", {"zed"}}}).first == 403);
    CHECK(h.call("GET", "/challenges/nope/phase/1", nullptr, red).first == 404);
    CHECK(h.call("GET", "/challenges/scq-banned-function/phase/4", nullptr, red).first == 404);
    auto [s4, locked] = h.call("GET", "/challenges/scq-banned-function/phase/2", nullptr, red);
    CHECK(s4 == 403);
    CHECK(code_of(locked) == "PHASE_LOCKED");
    CHECK(h.call("POST", "/challenges/scq-banned-function/phase/2/answer", {{"answer", 0}}, red).first == 409);

    auto [s5, p1] = h.call("GET", "/challenges/scq-banned-function/phase/1", nullptr, red);
    CHECK(s5 == 200);
    CHECK(p1["question"].is_null());
    CHECK(h.call("POST", "/challenges/scq-banned-function/phase/1/ack", nullptr, red).second["progress"] == 1);
    auto [s6, p2] = h.call("GET", "/challenges/scq-banned-function/phase/2", nullptr, red);
    CHECK(s6 == 200);
    CHECK_FALSE(p2["question"].contains("correct"));
    CHECK(h.call("POST", "/challenges/scq-banned-function/phase/3/ack", nullptr, red).first == 409);

    auto [s7, wrong] = h.call("POST", "/challenges/scq-banned-function/phase/2/answer", {{"answer", 1}}, red);
    CHECK(s7 == 200);
    CHECK(wrong["correct"] == false);
    auto [s8, shape] = h.call("POST", "/challenges/scq-banned-function/phase/2/answer", {{"answer", "zero"}}, red);
    CHECK(s8 == 422);
    CHECK(code_of(shape) == "PAYLOAD_SHAPE_MISMATCH");
    CHECK(h.call("POST", "/challenges/scq-banned-function/phase/2/answer", "not an object", red).first == 422);

    json answer{{"answer", 0}, {"request_key", "r-1"}};
    auto [s9, right] = h.call("POST", "/challenges/scq-banned-function/phase/2/answer", answer, red);
    CHECK(s9 == 200);
    CHECK(right["correct"] == true);
    CHECK(right["score"]["points"] == 50);
    auto [s10, retry] = h.call("POST", "/challenges/scq-banned-function/phase/2/answer", answer, red);
    CHECK(s10 == 200);
    CHECK(retry == right);
    auto [s11, dup] = h.call("POST", "/challenges/scq-banned-function/phase/2/answer", {{"answer", 0}}, red);
    CHECK(s11 == 409);
    CHECK(code_of(dup) == "DUPLICATE_SOLVE");

    auto [s12, board] = h.call("GET", "/scoreboard");
    CHECK(board["rows"][0]["team"] == "red");
    CHECK(board["rows"][0]["points"] == 50);
    CHECK(board["rows"][1]["team"] == "blue");

    auto [s13, big] = h.call("POST", "/error-reports", {{"challenge_id", "scq-banned-function"}, {"text", std::string(11'000, 'x')}}, red);
    CHECK(s13 == 422);
    CHECK(code_of(big) == "TEXT_TOO_LONG");
    CHECK(h.call("POST", "/error-reports", {{"challenge_id", "scq-banned-function"}, {"text", "typo in phase 1"}}, red)
            .first == 201);

    CHECK(h.call("POST", "/surveys/responses", {{"answers", {{{"qid", "Q1.1"}, {"value", 4}}}}}, red).first == 403);
    CHECK(code_of(h.call("GET", "/winner").second) == "GAME_NOT_FINISHED");

    h.at_minute(381);
    h.call("POST", "/challenges/scq-banned-function/phase/1/ack", nullptr, blue);
    auto [s14, closed] = h.call("POST", "/challenges/scq-banned-function/phase/2/answer", {{"answer", 0}}, blue);
    CHECK(s14 == 403);
    CHECK(code_of(closed) == "GAME_CLOSED");
    auto [s15, win] = h.call("GET", "/winner");
    CHECK(s15 == 200);
    CHECK(win["team"] == "red");

    h.at_minute(391);
    CHECK(h.call("POST", "/surveys/responses", {{"answers", {{{"qid", "Q1.1"}, {"value", 6}}}}}, red).first == 422);
    CHECK(h.call("POST", "/surveys/responses", {{"answers", {{{"qid", "Q1.1"}, {"value", 4}}, {{"qid", "Q2.1"}, {"value", 5}}}}}, red)
            .first == 201);
    CHECK(h.call("POST", "/surveys/responses", {{"answers", {{{"qid", "Q1.1"}, {"value", 4}}}}}, red).first == 409);

    CHECK(h.call("GET", "/admin/export", nullptr, red).first == 403);
    auto res = h.client->Get("/admin/export", {{"Authorization", std::string("Bearer ") + kAdmin}});
    REQUIRE(res);
    CHECK(res->status == 200);
    auto files = unzip_stored(res->body);
    CHECK(files.contains("events.ndjson"));
    CHECK(files["scoreboard.csv"] == "rank,team,display_name,points,last_solve_s\n1,red,red,50,3900\n2,blue,blue,0,\n");
    CHECK(files["survey.csv"] == "participant_id,qid,value\nalice,Q1.1,4\nalice,Q2.1,5\n");
    CHECK(json::parse(files["error_reports.json"])[0]["phase"] == 2);
  }

  TEST_CASE("restart restores state, not sessions")
  {
    TempDir dir;
    json config = event_json(dir.path / "data");
    std::string token;
    GameState before;
    {
      Harness h(config);
      token = h.join("red", {"alice"});
      h.at_minute(70);
      h.call("POST", "/challenges/scq-banned-function/phase/1/ack", nullptr, token);
      CHECK(h.call("POST", "/challenges/scq-banned-function/phase/2/answer", {{"answer", 0}}, token).first == 200);
      before = h.server->state();
    }
    CHECK(fs::exists(dir.path / "data" / "snapshot.json"));
    Harness h(config);
    CHECK(h.server->state() == before);
    CHECK(h.server->recovery_warnings().empty());
    CHECK(h.call("GET", "/challenges", nullptr, token).first == 401);
    auto [status, board] = h.call("GET", "/scoreboard");
    CHECK(board["rows"][0]["points"] == 50);
  }

  TEST_CASE("code entry flow with hints")
  {
    if (!sandbox_ready()) {
      MESSAGE("sandbox unavailable; skipped");
      return;
    }
    TempDir dir;
    json config = event_json(dir.path / "data");
    config["hint_cooldown_seconds"] = 30;
    Harness h(config);
    std::string red = h.join("red", {"alice"});
    h.at_minute(61);
    const std::string cec = "/challenges/c-gets-greeting";

    CHECK(code_of(h.call("POST", cec + "/submit", {{"files", {{"main.c", "x"}}}}, red).second) ==
          "PHASE_ORDER_VIOLATION");
    h.call("POST", cec + "/phase/1/ack", nullptr, red);
    auto [s0, p2] = h.call("GET", cec + "/phase/2", nullptr, red);
    REQUIRE(s0 == 200);
    std::string starter = p2["files"]["main.c"];
    CHECK(h.call("POST", cec + "/submit", {{"files", {{"extra.c", "int x;"}}}}, red).first == 422);
    CHECK(h.call("POST", cec + "/submit", {{"files", {{"../main.c", "int x;"}}}}, red).first == 422);
    CHECK(code_of(h.call("POST", cec + "/hint", nullptr, red).second) == "NO_ASSESSMENT");
    CHECK(code_of(h.call("GET", cec + "/report", nullptr, red).second) == "NO_SUBMISSION");

    auto [s1, queued] = h.call("POST", cec + "/submit", {{"files", {{"main.c", starter}}}}, red);
    CHECK(s1 == 202);
    auto [s2, busy] = h.call("POST", cec + "/submit", {{"files", {{"main.c", starter}}}}, red);
    CHECK(s2 == 409);
    CHECK(code_of(busy) == "ASSESSMENT_IN_PROGRESS");
    json report = h.wait_for_report("c-gets-greeting", red);
    CHECK(report["submission_id"] == queued["submission_id"]);
    CHECK(report["status"] == "done");
    CHECK(report["acceptable"] == false);
    CHECK(report["solved"] == false);

    auto [s3, hint1] = h.call("POST", cec + "/hint", nullptr, red);
    CHECK(s3 == 200);
    CHECK(hint1["level"] == 1);
    auto [s4, cooling] = h.call("POST", cec + "/hint", nullptr, red);
    CHECK(s4 == 429);
    CHECK(code_of(cooling) == "COOLDOWN");
    h.advance_seconds(31);
    auto [s5, hint2] = h.call("POST", cec + "/hint", nullptr, red);
    CHECK(hint2["level"] == 2);
    CHECK(hint2["finding_ref"] == hint1["finding_ref"]);

    std::string fixed = testing::read_file(fs::path(CSC_CHALLENGES_DIR) / "c-gets-greeting" / "solution" / "main.c");
    CHECK(h.call("POST", cec + "/submit", {{"files", {{"main.c", fixed}}}}, red).first == 202);
    report = h.wait_for_report("c-gets-greeting", red);
    CHECK_MESSAGE(report["acceptable"] == true, report.dump());
    CHECK(report["solved"] == true);
    CHECK(code_of(h.call("POST", cec + "/hint", nullptr, red).second) == "ALREADY_ACCEPTABLE");
    auto [s6, board] = h.call("GET", "/scoreboard");
    CHECK(board["rows"][0]["points"] == 80);

    auto res = h.client->Get("/admin/export", {{"Authorization", std::string("Bearer ") + kAdmin}});
    REQUIRE(res);
    auto files = unzip_stored(res->body);
    std::string path = "submissions/red/c-gets-greeting/" + queued["submission_id"].get<std::string>() + "/main.c";
    REQUIRE(files.contains(path));
    CHECK(files[path] == starter);
  }
}
