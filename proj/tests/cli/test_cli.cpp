#include "doctest.h"

#include "test_support.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <regex>
#include <thread>

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>

namespace fs = std::filesystem;
using csc::testing::read_file;
using csc::testing::TempDir;
using csc::testing::write_file;
using nlohmann::json;

extern char** environ;

namespace {

const fs::path kChallenges = CSC_CHALLENGES_DIR;
const fs::path kFixtures = CSC_TEST_FIXTURES_DIR;
const fs::path kGolden = CSC_GOLDEN_DIR;

struct Run
{
  int exit = -1;
  std::string out;
  std::string err;
};

std::string quote(const std::string& s)
{
  return "'" + s + "'";
}

Run run_csc(const std::vector<std::string>& args)
{
  TempDir tmp;
  std::string cmd = quote(CSC_BINARY);
  for (const auto& a : args)
    cmd += " " + quote(a);
  cmd += " >" + quote((tmp.path / "out").string()) + " 2>" + quote((tmp.path / "err").string());
  int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(tmp.path / "out"), read_file(tmp.path / "err")};
}

std::string error_code(const Run& r)
{
  return json::parse(r.err)["error"]["code"];
}

/// Compares against tests/golden/<name>; CSC_UPDATE_GOLDEN=1 rewrites it.
void check_golden(const std::string& name, const std::string& actual)
{
  fs::path file = kGolden / name;
  if (std::getenv("CSC_UPDATE_GOLDEN")) {
    write_file(file, actual);
    return;
  }
  REQUIRE_MESSAGE(fs::exists(file), "missing golden file " << file);
  CHECK(read_file(file) == actual);
}

void copy_bundle(const fs::path& from, const fs::path& to)
{
  fs::copy(from, to, fs::copy_options::recursive);
}

struct Child
{
  pid_t pid = -1;

  Child(const std::vector<std::string>& args, const fs::path& err)
  {
    std::vector<std::string> argv{CSC_BINARY};
    argv.insert(argv.end(), args.begin(), args.end());
    std::vector<char*> raw;
    for (auto& a : argv)
      raw.push_back(a.data());
    raw.push_back(nullptr);
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, 2, err.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    posix_spawn_file_actions_addopen(&actions, 1, "/dev/null", O_WRONLY, 0);
    posix_spawn(&pid, raw[0], &actions, nullptr, raw.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
  }

  int wait()
  {
    int status = 0;
    ::waitpid(pid, &status, 0);
    pid = -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  ~Child()
  {
    if (pid > 0) {
      ::kill(pid, SIGKILL);
      wait();
    }
  }
};

int wait_for_port(const fs::path& err)
{
  static const std::regex listening(R"(listening on [^:]+:(\d+))");
  for (int i = 0; i < 200; ++i) {
    std::smatch m;
    std::string text = fs::exists(err) ? read_file(err) : "";
    if (std::regex_search(text, m, listening))
      return std::stoi(m[1]);
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  FAIL("server did not start: " << read_file(err));
  return 0;
}

} // namespace

TEST_SUITE("cli")
{
  TEST_CASE("usage errors exit 2")
  {
    CHECK(run_csc({}).exit == 2);
    CHECK(run_csc({"frobnicate"}).exit == 2);
    CHECK(run_csc({"validate"}).exit == 2);
    CHECK(run_csc({"assess", "only-one"}).exit == 2);
    CHECK(run_csc({"serve", "x.json", "--port", "nope"}).exit == 2);
    CHECK(run_csc({"report", "x.csv", "--pooling", "median"}).exit == 2);
    CHECK(run_csc({"--help"}).exit == 0);
  }

  TEST_CASE("validate")
  {
    auto ok = run_csc({"validate", (kChallenges / "c-gets-greeting").string()});
    CHECK(ok.exit == 0);
    CHECK(ok.out == "ok c-gets-greeting\n");

    TempDir tmp;
    copy_bundle(kChallenges / "scq-banned-function", tmp.path / "a");
    copy_bundle(kChallenges / "scq-banned-function", tmp.path / "b");
    write_file(tmp.path / "event.json",
               json{{"name", "Pair"},
                    {"event_id", "pair"},
                    {"bundles", {"a", "b"}},
                    {"join_codes", {"J"}},
                    {"admin_token", "admin-token-0123456789"}}
                 .dump());
    auto dup = run_csc({"validate", "--event", (tmp.path / "event.json").string()});
    CHECK(dup.exit == 1);
    json report = json::parse(dup.err);
    CHECK(report["valid"] == false);
    CHECK(report["issues"][0]["code"] == "DuplicateId");

    // Reference solution replaced by the vulnerable starter.
    copy_bundle(kChallenges / "c-gets-greeting", tmp.path / "broken");
    fs::copy_file(tmp.path / "broken" / "files" / "main.c", tmp.path / "broken" / "solution" / "main.c",
                  fs::copy_options::overwrite_existing);
    auto broken = run_csc({"validate", (tmp.path / "broken").string()});
    CHECK(broken.exit == 1);
    CHECK(json::parse(broken.err)["issues"][0]["code"] == "SolutionNotAcceptable");
    CHECK(run_csc({"validate", "--skip-solution-check", (tmp.path / "broken").string()}).exit == 0);

    auto missing = run_csc({"validate", (tmp.path / "nowhere").string()});
    CHECK(missing.exit == 1);
    CHECK(error_code(missing) == "ManifestMissing");
  }

  TEST_CASE("assess")
  {
    fs::path bundle = kChallenges / "c-gets-greeting";
    auto vulnerable = run_csc({"assess", bundle.string(), (bundle / "files").string(), "--json"});
    CHECK(vulnerable.exit == 1);
    json report = json::parse(vulnerable.out);
    CHECK(report["verdict"]["acceptable"] == false);
    CHECK_FALSE(report["findings"].empty());
    check_golden("assess-c-gets-greeting-starter.json", vulnerable.out);

    auto text = run_csc({"assess", bundle.string(), (bundle / "files").string()});
    CHECK(text.exit == 1);
    CHECK(text.out.find("NOT ACCEPTABLE") != std::string::npos);
    CHECK(text.out.find("BANNED_FUNCTION main.c:8") != std::string::npos);

    auto fixed = run_csc({"assess", bundle.string(), (bundle / "solution").string(), "--json"});
    CHECK(fixed.exit == 0);
    CHECK(json::parse(fixed.out)["verdict"]["acceptable"] == true);

    fs::path web = kFixtures / "bundles" / "web-escape-output";
    auto scope = run_csc({"assess", web.string(), (web / "solution").string()});
    CHECK(scope.exit == 2);
    CHECK(error_code(scope) == "UnsupportedTrack");

    fs::path quiz = kChallenges / "scq-banned-function";
    CHECK(run_csc({"assess", quiz.string(), (bundle / "solution").string()}).exit == 2);
  }

  TEST_CASE("report")
  {
    fs::path survey = kFixtures / "survey";
    auto both = run_csc({"report", (survey / "cycle2.csv").string(), (survey / "cycle3.csv").string(), "--json"});
    CHECK(both.exit == 0);
    check_golden("report-cycles.json", both.out);
    // Runs are byte-identical.
    CHECK(run_csc({"report", (survey / "cycle2.csv").string(), (survey / "cycle3.csv").string(), "--json"}).out ==
          both.out);

    auto text = run_csc({"report", (survey / "cycle2.csv").string(), (survey / "cycle3.csv").string()});
    CHECK(text.exit == 0);
    CHECK(text.out.find("BE   2 -> 3  d=0.25") != std::string::npos);
    check_golden("report-cycles.txt", text.out);

    TempDir tmp;
    write_file(tmp.path / "empty.csv", "participant_id,qid,value\n");
    auto empty = run_csc({"report", (tmp.path / "empty.csv").string(), "--json"});
    CHECK(empty.exit == 1);
    json errors = json::parse(empty.out)["errors"];
    CHECK(std::count_if(errors.begin(), errors.end(), [](const json& e) { return e["code"] == "EmptyRq"; }) == 6);

    write_file(tmp.path / "bad.csv", "p1,Q1.1,4\np1,Q2.1,7\n");
    auto bad = run_csc({"report", (tmp.path / "bad.csv").string()});
    CHECK(bad.exit == 1);
    CHECK(error_code(bad) == "CsvMalformed");
    CHECK(json::parse(bad.err)["error"]["message"].get<std::string>().starts_with("line 2:"));

    write_file(tmp.path / "map.json", R"({"Q1.1": {"rq": "RQ1", "construct": "PE"}})");
    write_file(tmp.path / "one.csv", "p1,Q1.1,4\np2,Q1.1,5\np3,Q2.1,1\n");
    auto mapped = run_csc({"report", (tmp.path / "one.csv").string(), "--map", (tmp.path / "map.json").string(), "--json"});
    CHECK(mapped.exit == 0);
    json r = json::parse(mapped.out);
    CHECK(r["by_cycle"]["1"]["rq_splits"]["RQ1"]["pos"] == 100.0);

    write_file(tmp.path / "broken.json", "{");
    CHECK(error_code(run_csc({"report", (tmp.path / "one.csv").string(), "--map", (tmp.path / "broken.json").string()})) ==
          "InvalidConstructMap");
  }

  TEST_CASE("serve")
  {
    TempDir tmp;
    json config{{"name", "Cli event"},
                {"event_id", "cli"},
                {"bundles", {(kChallenges / "scq-banned-function").string()}},
                {"join_codes", {"JOIN-1"}},
                {"admin_token", "admin-token-0123456789"}};
    write_file(tmp.path / "event.json", config.dump());
    write_file(tmp.path / "bad.json", R"({"name": "no id"})");

    auto bad = run_csc({"serve", (tmp.path / "bad.json").string(), "--port", "0"});
    CHECK(bad.exit == 1);
    CHECK(error_code(bad) == "ConfigInvalid");

    fs::path err = tmp.path / "serve.err";
    {
      Child server({"serve", (tmp.path / "event.json").string(), "--port", "0"}, err);
      httplib::Client client("127.0.0.1", wait_for_port(err));
      auto clock = client.Get("/clock");
      REQUIRE(clock);
      CHECK(clock->status == 200);
      CHECK(json::parse(clock->body)["event"] == "Cli event");
      auto team = client.Post("/teams", json{{"join_code", "JOIN-1"}, {"id", "blue"}, {"members", {"p1"}}}.dump(),
                              "application/json");
      REQUIRE(team);
      CHECK(team->status == 201);

      ::kill(server.pid, SIGTERM);
      CHECK(server.wait() == 0);
    }
    CHECK(fs::exists(tmp.path / "data" / "cli" / "snapshot.json"));

    Child again({"serve", (tmp.path / "event.json").string(), "--port", "0"}, err);
    httplib::Client client("127.0.0.1", wait_for_port(err));
    auto board = client.Get("/scoreboard");
    REQUIRE(board);
    CHECK(json::parse(board->body)["rows"][0]["team"] == "blue");
    ::kill(again.pid, SIGINT);
    CHECK(again.wait() == 0);
  }
}
