#include "doctest.h"

#include "csc/assessment.hpp"
#include "csc/error.hpp"
#include "test_support.hpp"

#include <algorithm>

using namespace csc;

namespace {

namespace fs = std::filesystem;

fs::path challenges_dir()
{
  return CSC_CHALLENGES_DIR;
}

Sandbox& shared_sandbox()
{
  static Sandbox sandbox{SandboxConfig{}};
  return sandbox;
}

bool sandbox_ready()
{
  if (auto why = shared_sandbox().unavailable_reason()) {
    MESSAGE("skipping: " << *why);
    return false;
  }
  return true;
}

bool has_category(const AssessmentReport& r, const std::string& category, Stage stage)
{
  return std::any_of(r.findings.begin(), r.findings.end(),
                     [&](const Finding& f) { return f.category == category && f.stage == stage; });
}

} // namespace

TEST_SUITE("assessment")
{
  TEST_CASE("preconditions")
  {
    Assessor assessor(shared_sandbox());
    auto web = load_bundle(csc::testing::fixtures_dir() / "bundles" / "web-escape-output");
    try {
      assessor.assess(web, {});
      FAIL("expected UnsupportedTrack");
    } catch (const AssessmentError& e) {
      CHECK(e.code() == "UnsupportedTrack");
    }
    auto quiz = load_bundle(challenges_dir() / "scq-banned-function");
    CHECK_THROWS_AS(assessor.assess(quiz, {}), AssessmentError);

    auto bundle = load_bundle(challenges_dir() / "c-gets-greeting");
    try {
      assessor.assess(bundle, {{"extra.c", "int x;"}});
      FAIL("expected SubmissionAddsFiles");
    } catch (const AssessmentError& e) {
      CHECK(e.code() == "SubmissionAddsFiles");
    }
  }

  TEST_CASE("unavailable sandbox is reported, not bypassed")
  {
    SandboxConfig cfg;
    cfg.backend = BackendKind::Container;
    cfg.container_runtime = "csc-no-such-runtime";
    Sandbox sb(cfg);
    Assessor assessor(sb);
    auto bundle = load_bundle(challenges_dir() / "c-gets-greeting");
    try {
      assessor.assess(bundle, {});
      FAIL("expected SandboxUnavailable");
    } catch (const AssessmentError& e) {
      CHECK(e.code() == "SandboxUnavailable");
    }
  }

  TEST_CASE("gets fixture")
  {
    if (!sandbox_ready())
      return;
    Assessor assessor(shared_sandbox());
    auto bundle = load_bundle(challenges_dir() / "c-gets-greeting");
    auto r = assessor.assess(bundle, {});
    INFO(render_text(r));
    CHECK(r.compile_ok);
    CHECK_FALSE(r.verdict.acceptable);
    const Finding* f = r.find("BANNED_FUNCTION@main.c:8");
    REQUIRE(f);
    CHECK(f->severity == Severity::HIGH);
    CHECK(r.recompute_verdict() == r.verdict);

    auto fixed = assessor.assess(bundle, bundle.project->solution_files);
    INFO(render_text(fixed));
    CHECK(fixed.verdict.acceptable);
    CHECK(fixed.verdict.reasons.empty());
    CHECK(fixed.functional.size() == 3);
  }

  TEST_CASE("shipped code challenges: starter fails, solution passes")
  {
    if (!sandbox_ready())
      return;
    Assessor assessor(shared_sandbox());
    int seen = 0;
    for (const auto& entry : fs::directory_iterator(challenges_dir())) {
      auto bundle = load_bundle(entry.path());
      if (bundle.kind != ChallengeKind::CEC)
        continue;
      ++seen;
      CAPTURE(bundle.id);
      auto starter = assessor.assess(bundle, {});
      INFO(render_text(starter));
      CHECK(starter.compile_ok);
      CHECK_FALSE(starter.verdict.acceptable);
      CHECK(std::any_of(starter.findings.begin(), starter.findings.end(),
                        [&](const Finding& f) { return f.severity >= bundle.project->banned_findings_threshold; }));

      auto fixed = assessor.assess(bundle, bundle.project->solution_files);
      INFO(render_text(fixed));
      CHECK(fixed.verdict.acceptable);
    }
    CHECK(seen >= 6);
  }

  TEST_CASE("a submission that does not compile skips later stages")
  {
    if (!sandbox_ready())
      return;
    Assessor assessor(shared_sandbox());
    auto bundle = load_bundle(challenges_dir() / "c-gets-greeting");
    auto r = assessor.assess(bundle, {{"main.c", "int main(void)\n{\n  return 0\n}\n"}});
    CHECK_FALSE(r.compile_ok);
    CHECK_FALSE(r.verdict.acceptable);
    REQUIRE(r.stage_results.size() == 4);
    CHECK(r.stage_results[0].status == StageStatus::Ran);
    for (int i = 1; i < 4; ++i)
      CHECK(r.stage_results[i].status == StageStatus::Skipped);
    CHECK(std::all_of(r.findings.begin(), r.findings.end(), [](const Finding& f) { return f.stage == Stage::COMPILE; }));
    CHECK(has_category(r, "COMPILE_ERROR", Stage::COMPILE));
    CHECK(r.functional.empty());
  }

  TEST_CASE("dynamic analysis catches what static rules miss")
  {
    if (!sandbox_ready())
      return;
    Assessor assessor(shared_sandbox());
    auto bundle = load_bundle(csc::testing::fixtures_dir() / "bundles" / "c-heap-terminator");
    auto r = assessor.assess(bundle, {});
    INFO(render_text(r));
    CHECK(std::none_of(r.findings.begin(), r.findings.end(), [](const Finding& f) { return f.stage == Stage::STATIC; }));
    REQUIRE(has_category(r, "BUFFER_OVERFLOW", Stage::DYNAMIC));
    auto it = std::find_if(r.findings.begin(), r.findings.end(),
                           [](const Finding& f) { return f.category == "BUFFER_OVERFLOW"; });
    CHECK(it->test_id.has_value());
    CHECK(it->location.line > 0);
    CHECK_FALSE(r.verdict.acceptable);
    CHECK(assessor.assess(bundle, bundle.project->solution_files).verdict.acceptable);
  }

  TEST_CASE("endless loop becomes a resource finding")
  {
    if (!sandbox_ready())
      return;
    AssessorConfig cfg;
    cfg.test_limits.cpu_seconds = 0.5;
    cfg.test_limits.wall_seconds = 2;
    Assessor assessor(shared_sandbox(), cfg);
    auto bundle = load_bundle(csc::testing::fixtures_dir() / "bundles" / "c-endless-loop");
    auto r = assessor.assess(bundle, {});
    CHECK(has_category(r, "RESOURCE_LIMIT", Stage::DYNAMIC));
    CHECK_FALSE(r.verdict.acceptable);
    REQUIRE(r.functional.size() == 1);
    CHECK(r.functional[0].outcome == "CpuTimeout");
  }

  TEST_CASE("reports are deterministic modulo timings")
  {
    if (!sandbox_ready())
      return;
    Assessor assessor(shared_sandbox());
    for (const char* id : {"c-format-echo", "c-off-by-one"}) {
      auto b = load_bundle(challenges_dir() / id);
      CHECK(to_json(assessor.assess(b, {}), false).dump() == to_json(assessor.assess(b, {}), false).dump());
    }
    auto bundle = load_bundle(challenges_dir() / "c-format-echo");
    auto back = report_from_json(to_json(assessor.assess(bundle, {})));
    CHECK(back.recompute_verdict() == back.verdict);
  }

  TEST_CASE("crashing adapters fail the stage closed")
  {
    if (!sandbox_ready())
      return;
    Assessor assessor(shared_sandbox());
    assessor.add_analyzer(std::make_unique<ExternalAnalyzer>("broken", std::vector<std::string>{"sh", "-c", "exit 3"},
                                                             shared_sandbox()));
    assessor.add_analyzer(std::make_unique<ExternalAnalyzer>(
      "lint",
      std::vector<std::string>{"sh", "-c",
                               "echo '{\"category\":\"STYLE\",\"severity\":\"INFO\",\"file\":\"main.c\",\"line\":1,"
                               "\"message\":\"m\"}'"},
      shared_sandbox()));
    auto bundle = load_bundle(challenges_dir() / "c-gets-greeting");
    auto r = assessor.assess(bundle, bundle.project->solution_files);
    CHECK(r.stage_results[1].status == StageStatus::FailedToRun);
    CHECK(has_category(r, "ANALYZER_ERROR", Stage::STATIC));
    CHECK(has_category(r, "STYLE", Stage::STATIC));
    CHECK_FALSE(r.verdict.acceptable);
  }

  TEST_CASE("solution check")
  {
    if (!sandbox_ready())
      return;
    Assessor assessor(shared_sandbox());
    auto bundle = load_bundle(challenges_dir() / "c-off-by-one");
    CHECK_FALSE(assessor.check_solution(bundle).has_value());
    bundle.project->solution_files = bundle.project->files;
    auto why = assessor.check_solution(bundle);
    REQUIRE(why.has_value());
    CHECK(why->find("BUFFER_OVERFLOW") != std::string::npos);
  }
}
