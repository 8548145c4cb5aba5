// Acceptance checks: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include "csc/analytics.hpp"
#include "csc/assessment.hpp"
#include "csc/challenge.hpp"
#include "csc/game.hpp"
#include "csc/sandbox.hpp"
#include "simulation.hpp"
#include "test_support.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

using namespace csc;
namespace fs = std::filesystem;

namespace {

const fs::path kChallenges = CSC_CHALLENGES_DIR;
const fs::path kFixtures = CSC_TEST_FIXTURES_DIR;

/// Collects failed expectations and a one-line summary.
struct Check
{
  std::vector<std::string> failures;
  std::ostringstream summary;

  void expect(bool ok, const std::string& what)
  {
    if (!ok)
      failures.push_back(what);
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fixed(double x, int digits)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

Pmf tri_percent(double neg, double neu, double pos)
{
  return {kTriLabels, {neg / 100, neu / 100, pos / 100}};
}

std::vector<LikertResponse> cycle2()
{
  return parse_survey_csv(testing::read_file(kFixtures / "survey" / "cycle2.csv"));
}

void hellinger_reproduction(Check& c)
{
  struct Pair
  {
    const char* construct;
    Pmf before;
    Pmf after;
    double expected;
  };
  const std::vector<Pair> pairs{
    {"BE", tri_percent(7.89, 20.79, 71.33), tri_percent(0.0, 8.06, 91.94), 0.25},
    {"PE", tri_percent(8.04, 7.14, 84.82), tri_percent(2.22, 8.89, 88.89), 0.10},
    {"PR", tri_percent(7.78, 14.37, 77.84), tri_percent(6.67, 11.11, 82.22), 0.04},
  };
  auto t0 = std::chrono::steady_clock::now();
  for (const auto& p : pairs) {
    double d = hellinger(p.before, p.after);
    c.summary << p.construct << "=" << fixed(d, 4) << " ";
    c.expect(std::abs(d - p.expected) <= 0.005, std::string(p.construct) + " d=" + fixed(d, 4) + ", expected " +
                                                    fixed(p.expected, 2));
  }
  double elapsed = seconds_since(t0);
  c.summary << "(" << fixed(elapsed, 4) << " s)";
  c.expect(elapsed < 1.0, "took " + fixed(elapsed, 3) + " s");
}

void rq_splits(Check& c)
{
  auto responses = cycle2();
  auto map = ConstructMap::defaults();
  const std::vector<std::pair<ResearchQuestion, std::array<double, 3>>> expected{
    {ResearchQuestion::RQ1, {7.89, 16.13, 75.99}},
    {ResearchQuestion::RQ2, {4.82, 12.05, 83.13}},
    {ResearchQuestion::RQ3, {4.19, 12.56, 83.26}},
  };
  for (const auto& [rq, want] : expected) {
    TriSplit s = rq_split(responses, map, rq);
    std::array<double, 3> got{s.neg, s.neu, s.pos};
    c.summary << to_string(rq) << "=" << fixed(s.neg, 2) << "/" << fixed(s.neu, 2) << "/" << fixed(s.pos, 2) << " ";
    for (int i = 0; i < 3; ++i)
      c.expect(std::abs(got[i] - want[i]) <= 0.01 + 1e-9,
               std::string(to_string(rq)) + " bin " + std::to_string(i) + " = " + fixed(got[i], 2));
  }
}

void ranking(Check& c)
{
  auto responses = cycle2();
  auto map = ConstructMap::defaults();
  const std::vector<std::pair<ResearchQuestion, std::vector<std::string>>> expected{
    {ResearchQuestion::RQ1, {"Q10.1", "Q2.1", "Q7.1", "Q4.1", "Q1.1", "Q8.1", "Q5.1", "Q6.1", "Q3.1", "Q9.1"}},
    {ResearchQuestion::RQ2, {"Q13.1", "Q12.1", "Q11.1"}},
    {ResearchQuestion::RQ3, {"Q17.1", "Q20.1", "Q16.1", "Q14.1", "Q18.1", "Q19.1", "Q21.1", "Q15.1"}},
  };
  for (const auto& [rq, want] : expected) {
    std::vector<std::string> got;
    for (const auto& r : rank_questions(responses, map, rq))
      got.push_back(r.qid);
    c.summary << to_string(rq) << ":" << got.size() << " ";
    std::string joined;
    for (const auto& q : got)
      joined += q + " ";
    c.expect(got == want, std::string(to_string(rq)) + " order " + joined);
  }
  auto rq1 = rank_questions(responses, map, ResearchQuestion::RQ1);
  auto at = [&](const std::string& q) {
    return std::find_if(rq1.begin(), rq1.end(), [&](const RankedQuestion& r) { return r.qid == q; });
  };
  bool tie = at("Q5.1") != rq1.end() && at("Q6.1") != rq1.end() && at("Q5.1")->w_avg == at("Q6.1")->w_avg &&
             at("Q5.1") < at("Q6.1");
  c.summary << "tie Q5.1/Q6.1 " << (tie ? "resolved by index" : "unresolved");
  c.expect(tie, "Q5.1/Q6.1 tie not resolved by question index");
}

void assessment_pairs(Check& c)
{
  Sandbox sandbox{SandboxConfig{}};
  if (auto why = sandbox.unavailable_reason()) {
    c.expect(false, "sandbox unavailable: " + *why);
    return;
  }
  Assessor assessor(sandbox);
  const std::vector<std::string> required{"c-gets-greeting",    "c-strcpy-label", "c-format-echo",
                                          "c-unchecked-malloc", "c-off-by-one",   "c-sprintf-record"};
  auto t0 = std::chrono::steady_clock::now();
  int pairs = 0;
  std::vector<std::string> seen;
  for (const auto& entry : fs::directory_iterator(kChallenges)) {
    auto bundle = load_bundle(entry.path());
    if (bundle.kind != ChallengeKind::CEC)
      continue;
    seen.push_back(bundle.id);
    ++pairs;
    auto starter = assessor.assess(bundle, {});
    bool blocking = std::any_of(starter.findings.begin(), starter.findings.end(), [&](const Finding& f) {
      return f.severity >= bundle.project->banned_findings_threshold;
    });
    c.expect(blocking, bundle.id + ": starter has no blocking finding");
    c.expect(!starter.verdict.acceptable, bundle.id + ": starter accepted");
    auto fixed_report = assessor.assess(bundle, bundle.project->solution_files);
    c.expect(fixed_report.verdict.acceptable, bundle.id + ": solution not acceptable");
  }
  for (const auto& id : required)
    c.expect(std::find(seen.begin(), seen.end(), id) != seen.end(), "missing fixture " + id);
  double elapsed = seconds_since(t0);
  c.summary << pairs << " pairs (" << fixed(elapsed, 1) << " s)";
  c.expect(pairs >= 6, "only " + std::to_string(pairs) + " pairs");
  c.expect(elapsed < 60, "took " + fixed(elapsed, 1) + " s");
}

void sandbox_limits(Check& c)
{
  SandboxConfig config;
  Sandbox sb(config);
  if (auto why = sb.unavailable_reason()) {
    c.expect(false, "sandbox unavailable: " + *why);
    return;
  }
  auto scratch = [](const std::string& name) {
    Scratch s = make_scratch(std::map<std::string, std::string>{{"probe", testing::probe_binary(name)}});
    fs::permissions(s.path() / "probe", fs::perms::owner_all, fs::perm_options::add);
    return s;
  };
  auto status = [&](const std::string& probe, const ExecutionOutcome& out) {
    c.summary << probe << "=" << to_string(out.status) << " ";
  };
  auto no_leftovers = [&](const std::string& probe) {
    for (int slot = 0; slot < sb.config().pool_size; ++slot)
      c.expect(testing::processes_owned_by(static_cast<uid_t>(sb.config().base_uid + slot)) == 0,
               probe + ": processes left behind");
  };

  {
    Scratch s = scratch("cpu_loop");
    ResourceLimits lim;
    lim.cpu_seconds = 1;
    lim.wall_seconds = 5;
    auto out = sb.execute({{"./probe"}}, lim, s.path());
    status("infinite-loop", out);
    c.expect(out.status == ExecStatus::CpuTimeout, "infinite loop: " + out.reason);
    no_leftovers("infinite-loop");
  }
  {
    Scratch s = scratch("memory_bomb");
    ResourceLimits lim;
    lim.memory_bytes = 64ull << 20;
    auto out = sb.execute({{"./probe", std::to_string(lim.memory_bytes)}}, lim, s.path());
    status("memory-bomb", out);
    c.expect(out.status == ExecStatus::MemoryKill, "memory bomb: " + out.reason);
    no_leftovers("memory-bomb");
  }
  {
    Scratch s = scratch("fork_storm");
    ResourceLimits lim;
    lim.cpu_seconds = 1;
    lim.wall_seconds = 2;
    auto out = sb.execute({{"./probe"}}, lim, s.path());
    status("fork-storm", out);
    c.expect(out.status == ExecStatus::CpuTimeout || out.status == ExecStatus::WallTimeout, "fork storm: " + out.reason);
    c.expect(out.peak_processes <= lim.max_processes,
             "fork storm reached " + std::to_string(out.peak_processes) + " processes");
    no_leftovers("fork-storm");
  }
  {
    Scratch s = scratch("output_flood");
    ResourceLimits lim;
    auto out = sb.execute({{"./probe", std::to_string(10u << 20)}}, lim, s.path());
    status("output-flood", out);
    c.expect(out.status == ExecStatus::OutputTruncatedExit, "output flood: " + out.reason);
    c.expect(out.stdout_data.size() == lim.max_output_bytes, "output flood kept " +
                                                                 std::to_string(out.stdout_data.size()) + " bytes");
  }
  {
    Scratch s = scratch("path_escape");
    fs::path outside = fs::temp_directory_path() / "csc-acceptance-escape";
    auto out = sb.execute({{"./probe", outside.string()}}, {}, s.path());
    status("path-escape", out);
    c.expect(out.status == ExecStatus::Exited && out.exit_code == 0, "path escape probe: " + out.stdout_data);
    for (const fs::path p : {outside, fs::path("/tmp/csc-escape-probe"), fs::path("/var/tmp/csc-escape-probe"),
                             fs::path("/dev/shm/csc-escape-probe"), fs::path("/root/csc-escape-probe"),
                             fs::path("/etc/csc-escape-probe"), fs::path("/csc-escape-dir")})
      c.expect(!fs::exists(p), "path escape left " + p.string());
    c.expect(!fs::exists(s.path().parent_path() / "csc-escape-probe"), "path escape wrote next to scratch");
  }
  {
    Scratch s = scratch("net_probe");
    auto out = sb.execute({{"./probe"}}, {}, s.path());
    status("network-probe", out);
    c.expect(out.status == ExecStatus::Exited && out.exit_code == 0, "network reachable: " + out.stdout_data);
  }
}

void game_properties(Check& c)
{
  auto bundles = testing::simulation_bundles();
  std::size_t events = 0;
  std::size_t solves = 0;
  constexpr std::uint32_t kEvents = 1000;
  for (std::uint32_t seed = 1; seed <= kEvents; ++seed) {
    auto r = testing::simulate_event(seed, bundles);
    events += r.events;
    solves += r.solves;
    for (const auto& v : r.violations)
      c.expect(false, v);
  }
  c.summary << kEvents << " simulated events, " << events << " logged records, " << solves << " solves";
}

void agenda(Check& c)
{
  auto blocks = default_agenda();
  const std::vector<std::pair<int, BlockName>> expected{
    {5, BlockName::WELCOME},
    {65, BlockName::MAIN_EVENT},
    {390, BlockName::WINNER},
    {430, BlockName::FEEDBACK},
  };
  for (const auto& [minute, block] : expected) {
    auto got = advance_agenda(blocks, minutes(minute)).block;
    c.summary << minute << "=" << to_string(got) << " ";
    c.expect(got == block, "minute " + std::to_string(minute) + " is " + std::string(to_string(got)) + ", expected " +
                             std::string(to_string(block)));
  }
}

struct Criterion
{
  std::string name;
  std::function<void(Check&)> run;
};

const std::vector<Criterion>& criteria()
{
  static const std::vector<Criterion> all{
    {"hellinger-reproduction", hellinger_reproduction},
    {"rq-splits", rq_splits},
    {"ranking", ranking},
    {"assessment-oracle-pairs", assessment_pairs},
    {"sandbox-limits", sandbox_limits},
    {"game-properties", game_properties},
    {"agenda", agenda},
  };
  return all;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Acceptance checks"};
  std::vector<std::string> only;
  bool list = false;
  app.add_option("criteria", only, "Run only these criteria");
  app.add_flag("--list", list);
  CLI11_PARSE(app, argc, argv);

  if (list) {
    for (const auto& c : criteria())
      std::printf("%s\n", c.name.c_str());
    return 0;
  }
  for (const auto& name : only)
    if (std::none_of(criteria().begin(), criteria().end(), [&](const Criterion& c) { return c.name == name; })) {
      std::fprintf(stderr, "unknown criterion %s\n", name.c_str());
      return 2;
    }

  int failed = 0;
  for (const auto& criterion : criteria()) {
    if (!only.empty() && std::find(only.begin(), only.end(), criterion.name) == only.end())
      continue;
    Check check;
    try {
      criterion.run(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    bool ok = check.failures.empty();
    failed += ok ? 0 : 1;
    std::printf("%s %-24s %s\n", ok ? "PASS" : "FAIL", criterion.name.c_str(), check.summary.str().c_str());
    for (const auto& f : check.failures)
      std::printf("     - %s\n", f.c_str());
    std::fflush(stdout);
  }
  return failed;
}
