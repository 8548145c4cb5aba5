#include "csc/analytics.hpp"
#include "csc/assessment.hpp"
#include "csc/challenge.hpp"
#include "csc/error.hpp"
#include "csc/service.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

int fail(const csc::Error& e)
{
  std::cerr << json{{"error", {{"code", e.code()}, {"message", e.what()}}}}.dump() << "\n";
  return kFailure;
}

std::string read_text(const fs::path& file)
{
  std::ifstream in(file, std::ios::binary);
  if (!in)
    throw csc::Error("FileNotFound", "cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> read_tree(const fs::path& dir)
{
  if (!fs::is_directory(dir))
    throw csc::Error("FileNotFound", dir.string() + " is not a directory");
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file())
      files[fs::relative(entry.path(), dir).generic_string()] = read_text(entry.path());
  return files;
}

csc::SandboxConfig sandbox_config(const std::string& backend)
{
  auto config = csc::SandboxConfig::from_env();
  if (!backend.empty())
    config.backend = *csc::parse_backend(backend);
  return config;
}

struct ValidateArgs
{
  std::vector<std::string> bundles;
  std::string event;
  bool skip_solution = false;
  std::string backend;
};

int cmd_validate(const ValidateArgs& a)
{
  std::vector<csc::ChallengeBundle> bundles;
  try {
    std::vector<fs::path> dirs(a.bundles.begin(), a.bundles.end());
    if (!a.event.empty()) {
      auto config = csc::load_event_config(a.event);
      dirs.insert(dirs.end(), config.bundle_dirs.begin(), config.bundle_dirs.end());
    }
    for (const auto& dir : dirs)
      bundles.push_back(csc::load_bundle(dir));
  } catch (const csc::Error& e) {
    return fail(e);
  }

  csc::Sandbox sandbox(sandbox_config(a.backend));
  csc::Assessor assessor(sandbox);
  csc::SolutionCheck check;
  if (!a.skip_solution)
    check = [&](const csc::ChallengeBundle& b) {
      try {
        return assessor.check_solution(b);
      } catch (const csc::Error& e) {
        return std::optional<std::string>(e.code() + ": " + e.what());
      }
    };
  auto report = csc::validate_event(bundles, check);
  if (!report.valid()) {
    std::cerr << report.to_json().dump(2) << "\n";
    return kFailure;
  }
  for (const auto& b : bundles)
    std::cout << "ok " << b.id << "\n";
  return kOk;
}

struct AssessArgs
{
  std::string bundle;
  std::string submission;
  bool json = false;
  std::string backend;
};

int cmd_assess(const AssessArgs& a)
{
  try {
    auto bundle = csc::load_bundle(a.bundle);
    auto files = read_tree(a.submission);
    csc::Sandbox sandbox(sandbox_config(a.backend));
    csc::Assessor assessor(sandbox);
    auto report = assessor.assess(bundle, files);
    if (a.json)
      std::cout << csc::to_json(report, false).dump(2) << "\n";
    else
      std::cout << csc::render_text(report);
    return report.verdict.acceptable ? kOk : kFailure;
  } catch (const csc::AssessmentError& e) {
    fail(e);
    return e.code() == "UnsupportedTrack" || e.code() == "NotCodeEntry" ? kUsage : kFailure;
  } catch (const csc::Error& e) {
    return fail(e);
  }
}

struct ServeArgs
{
  std::string config;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string backend;
};

int cmd_serve(const ServeArgs& a)
{
  // Blocked before any thread starts so every thread inherits the mask and
  // only the waiter below sees the signals.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::unique_ptr<csc::EventServer> server;
  try {
    csc::ServerOptions options;
    options.sandbox = sandbox_config(a.backend);
    server = std::make_unique<csc::EventServer>(csc::load_event_config(a.config), options);
    int port = server->bind(a.host, a.port);
    std::cerr << "listening on " << a.host << ":" << port << "\n";
  } catch (const csc::Error& e) {
    return fail(e);
  }

  std::atomic<bool> done{false};
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    if (!done)
      std::cerr << "shutting down\n";
    server->stop();
  });
  server->run();
  done = true;
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return kOk;
}

struct ReportArgs
{
  std::vector<std::string> csv;
  std::string map;
  std::string pooling = "response";
  bool json = false;
};

bool anything_computed(const json& report)
{
  for (const auto& [cycle, c] : report["by_cycle"].items())
    if (!c["rq_splits"].empty() || !c["constructs"].empty() || !c["rankings"].empty())
      return true;
  return false;
}

int cmd_report(const ReportArgs& a)
{
  try {
    std::vector<csc::LikertResponse> responses;
    for (const auto& file : a.csv) {
      auto part = csc::parse_survey_csv(read_text(file));
      responses.insert(responses.end(), part.begin(), part.end());
    }
    auto map = a.map.empty() ? csc::ConstructMap::defaults()
                             : csc::construct_map_from_json(json::parse(read_text(a.map)));
    auto pooling = a.pooling == "question" ? csc::Pooling::QuestionAveraged : csc::Pooling::ResponseWeighted;
    json report = csc::survey_report(responses, map, pooling);
    if (a.json)
      std::cout << report.dump(2) << "\n";
    else
      std::cout << csc::render_survey_report(report);
    return anything_computed(report) ? kOk : kFailure;
  } catch (const csc::Error& e) {
    return fail(e);
  } catch (const json::parse_error& e) {
    return fail(csc::Error("InvalidConstructMap", e.what()));
  }
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Secure-coding challenge platform tools"};
  app.require_subcommand(1);
  auto backend_check = CLI::IsMember({"process", "container"});

  ValidateArgs validate;
  auto* v = app.add_subcommand("validate", "Check challenge bundles for an event");
  v->add_option("bundles", validate.bundles, "Bundle directories");
  v->add_option("--event", validate.event, "Also validate every bundle of this event config");
  v->add_flag("--skip-solution-check", validate.skip_solution, "Do not assess reference solutions");
  v->add_option("--sandbox-backend", validate.backend)->check(backend_check);

  AssessArgs assess;
  auto* s = app.add_subcommand("assess", "Assess a submission against a code-entry bundle");
  s->add_option("bundle", assess.bundle)->required();
  s->add_option("submission", assess.submission, "Directory with the submitted files")->required();
  s->add_flag("--json", assess.json);
  s->add_option("--sandbox-backend", assess.backend)->check(backend_check);

  ServeArgs serve;
  auto* sv = app.add_subcommand("serve", "Run an event server");
  sv->add_option("config", serve.config, "Event config JSON")->required();
  sv->add_option("--host", serve.host)->capture_default_str();
  sv->add_option("--port", serve.port)->capture_default_str()->check(CLI::Range(0, 65535));
  sv->add_option("--sandbox-backend", serve.backend)->check(backend_check);

  ReportArgs report;
  auto* r = app.add_subcommand("report", "Summarize Likert survey responses");
  r->add_option("csv", report.csv, "participant_id,qid,value[,cycle] files")->required();
  r->add_option("--map", report.map, "Construct map JSON");
  r->add_option("--pooling", report.pooling)->check(CLI::IsMember({"response", "question"}))->capture_default_str();
  r->add_flag("--json", report.json);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (v->parsed() && validate.bundles.empty() && validate.event.empty()) {
    std::cerr << "validate: give at least one bundle directory or --event\n";
    return kUsage;
  }

  if (v->parsed())
    return cmd_validate(validate);
  if (s->parsed())
    return cmd_assess(assess);
  if (sv->parsed())
    return cmd_serve(serve);
  return cmd_report(report);
}
