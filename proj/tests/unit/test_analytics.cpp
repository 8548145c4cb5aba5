#include "doctest.h"

#include "csc/analytics.hpp"
#include "csc/error.hpp"
#include "test_support.hpp"

#include <cmath>
#include <random>
#include <set>

using namespace csc;
using csc::testing::fixtures_dir;
using csc::testing::read_file;

namespace {

std::string error_code(auto&& fn)
{
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

Pmf tri(double neg, double neu, double pos)
{
  return {kTriLabels, {neg, neu, pos}};
}

std::vector<LikertResponse> answers(const std::string& qid, std::initializer_list<int> values, std::string cycle = "1")
{
  std::vector<LikertResponse> out;
  int i = 0;
  for (int v : values)
    out.push_back({"p" + std::to_string(++i), qid, v, cycle});
  return out;
}

std::vector<LikertResponse> fixture(const char* name)
{
  return parse_survey_csv(read_file(fixtures_dir() / "survey" / name));
}

std::vector<LikertResponse> both_cycles()
{
  auto all = fixture("cycle2.csv");
  auto c3 = fixture("cycle3.csv");
  all.insert(all.end(), c3.begin(), c3.end());
  return all;
}

std::vector<std::string> qids(const std::vector<RankedQuestion>& rows)
{
  std::vector<std::string> out;
  for (const auto& r : rows)
    out.push_back(r.qid);
  return out;
}

} // namespace

TEST_SUITE("analytics")
{
  TEST_CASE("hellinger on the reference tri-bins")
  {
    // Hand computation: BE bc = sqrt(.2079*.0806) + sqrt(.7133*.9194) = .93927,
    // d = sqrt(.06073) = .2464; PE bc = .99023, d = .0989; PR bc = .99839,
    // d = .0401.
    CHECK(hellinger(tri(0.0789, 0.2079, 0.7133), tri(0.0, 0.0806, 0.9194)) == doctest::Approx(0.2464).epsilon(0.002));
    CHECK(hellinger(tri(0.0804, 0.0714, 0.8482), tri(0.0222, 0.0889, 0.8889)) == doctest::Approx(0.0989).epsilon(0.005));
    CHECK(hellinger(tri(0.0778, 0.1437, 0.7784), tri(0.0667, 0.1111, 0.8222)) == doctest::Approx(0.0401).epsilon(0.01));
  }

  TEST_CASE("hellinger basics")
  {
    Pmf p = tri(0.2, 0.3, 0.5);
    CHECK(hellinger(p, p) == doctest::Approx(0.0));
    CHECK(hellinger(Pmf{{"a", "b"}, {1, 0}}, Pmf{{"a", "b"}, {0, 1}}) == doctest::Approx(1.0));
    CHECK(error_code([&] { hellinger(p, Pmf{kLikertLabels, {0.2, 0.2, 0.2, 0.2, 0.2}}); }) == "ArityMismatch");

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto random_pmf = [&] {
      Pmf r{kLikertLabels, {}};
      double sum = 0;
      for (int i = 0; i < 5; ++i) {
        double x = u(rng) < 0.2 ? 0.0 : u(rng);
        r.probs.push_back(x);
        sum += x;
      }
      if (sum == 0)
        r.probs[0] = sum = 1;
      for (auto& x : r.probs)
        x /= sum;
      return r;
    };
    for (int i = 0; i < 2000; ++i) {
      Pmf a = random_pmf();
      Pmf b = random_pmf();
      Pmf c = random_pmf();
      double ab = hellinger(a, b);
      CHECK(ab == doctest::Approx(hellinger(b, a)));
      CHECK(ab >= 0.0);
      CHECK(ab <= 1.0);
      CHECK(ab <= hellinger(a, c) + hellinger(c, b) + 1e-12);
      CHECK(hellinger(a, a) == doctest::Approx(0.0));
      Pmf t = tri_bin(a);
      CHECK(t.probs[0] + t.probs[1] + t.probs[2] == doctest::Approx(1.0));
    }
  }

  TEST_CASE("question pmf and tri-bin")
  {
    auto r = answers("Q1.1", {4, 4, 5});
    Pmf p = question_pmf(r, "Q1.1");
    CHECK(p.probs[3] == doctest::Approx(2.0 / 3));
    CHECK(p.probs[4] == doctest::Approx(1.0 / 3));
    CHECK(p.probs[0] == 0.0);
    p.validate();
    CHECK(question_pmf(answers("Q2.1", {3}), "Q2.1").probs == std::vector<double>{0, 0, 1, 0, 0});
    CHECK(error_code([&] { question_pmf(r, "Q9.1"); }) == "NoResponses");

    Pmf t = tri_bin({kLikertLabels, {0.1, 0.1, 0.2, 0.3, 0.3}});
    CHECK(t.labels == kTriLabels);
    CHECK(t.probs[0] == doctest::Approx(0.2));
    CHECK(t.probs[1] == doctest::Approx(0.2));
    CHECK(t.probs[2] == doctest::Approx(0.6));
    CHECK(tri_bin({kLikertLabels, {0, 0, 1, 0, 0}}).probs == std::vector<double>{0, 1, 0});
    CHECK(error_code([&] { tri_bin(tri(0.2, 0.2, 0.6)); }) == "ArityMismatch");
    CHECK(error_code([] { Pmf{kTriLabels, {0.5, 0.5, 0.5}}.validate(); }) == "InvalidPmf");
    CHECK(error_code([] { Pmf{kTriLabels, {0.5, 0.5}}.validate(); }) == "InvalidPmf");
  }

  TEST_CASE("construct pooling")
  {
    auto map = ConstructMap::defaults();
    // One question: the construct is that question.
    auto single = answers("Q8.1", {1, 4, 5, 5});
    CHECK(construct_pmf(single, map, Construct::PR) == question_pmf(single, "Q8.1"));
    CHECK(error_code([&] { construct_pmf(single, map, Construct::PE); }) == "EmptyConstruct");

    // Identical per-question PMFs pool to that PMF either way.
    auto same = answers("Q1.1", {2, 3, 4, 4});
    auto more = answers("Q2.1", {2, 3, 4, 4, 2, 3, 4, 4});
    same.insert(same.end(), more.begin(), more.end());
    Pmf q = question_pmf(same, "Q1.1");
    for (auto pooling : {Pooling::ResponseWeighted, Pooling::QuestionAveraged}) {
      Pmf pooled = construct_pmf(same, map, Construct::PE, std::nullopt, pooling);
      for (std::size_t i = 0; i < 5; ++i)
        CHECK(pooled.probs[i] == doctest::Approx(q.probs[i]));
    }

    // Different sizes: response weighting counts every answer once.
    auto skewed = answers("Q1.1", {5});
    auto many = answers("Q2.1", {1, 1, 1});
    skewed.insert(skewed.end(), many.begin(), many.end());
    CHECK(construct_pmf(skewed, map, Construct::PE).probs[0] == doctest::Approx(0.75));
    CHECK(construct_pmf(skewed, map, Construct::PE, std::nullopt, Pooling::QuestionAveraged).probs[0] ==
          doctest::Approx(0.5));
  }

  TEST_CASE("fixture construct tri-bins")
  {
    auto all = both_cycles();
    auto map = ConstructMap::defaults();
    auto pct = [&](Construct c, const char* cycle) {
      Pmf t = tri_bin(construct_pmf(all, map, c, std::string(cycle)));
      return std::array<double, 3>{std::round(t.probs[0] * 10000) / 100, std::round(t.probs[1] * 10000) / 100,
                                   std::round(t.probs[2] * 10000) / 100};
    };
    CHECK(pct(Construct::PE, "2") == std::array<double, 3>{8.04, 7.14, 84.82});
    CHECK(pct(Construct::BE, "2") == std::array<double, 3>{7.89, 20.79, 71.33});
    CHECK(pct(Construct::PR, "2") == std::array<double, 3>{7.78, 14.37, 77.84});
    CHECK(pct(Construct::PE, "3") == std::array<double, 3>{2.22, 8.89, 88.89});
    CHECK(pct(Construct::BE, "3") == std::array<double, 3>{0.0, 8.06, 91.94});
    CHECK(pct(Construct::PR, "3") == std::array<double, 3>{6.67, 11.11, 82.22});

    auto d = [&](Construct c) {
      return hellinger(tri_bin(construct_pmf(all, map, c, std::string("2"))),
                       tri_bin(construct_pmf(all, map, c, std::string("3"))));
    };
    CHECK(std::abs(d(Construct::BE) - 0.25) <= 0.005);
    CHECK(std::abs(d(Construct::PE) - 0.10) <= 0.005);
    CHECK(std::abs(d(Construct::PR) - 0.04) <= 0.005);
  }

  TEST_CASE("rq splits")
  {
    auto c2 = fixture("cycle2.csv");
    auto map = ConstructMap::defaults();
    auto check = [&](ResearchQuestion rq, double neg, double neu, double pos) {
      TriSplit s = rq_split(c2, map, rq);
      CHECK(s.neg == doctest::Approx(neg).epsilon(1e-9));
      CHECK(s.neu == doctest::Approx(neu).epsilon(1e-9));
      CHECK(s.pos == doctest::Approx(pos).epsilon(1e-9));
    };
    check(ResearchQuestion::RQ1, 7.89, 16.13, 75.99);
    check(ResearchQuestion::RQ2, 4.82, 12.05, 83.13);
    check(ResearchQuestion::RQ3, 4.19, 12.56, 83.26);

    std::vector<LikertResponse> uniform;
    for (int v = 1; v <= 5; ++v)
      uniform.push_back({"p" + std::to_string(v), "Q11.1", v, "1"});
    TriSplit u = rq_split(uniform, map, ResearchQuestion::RQ2);
    CHECK(u.neg == 40.0);
    CHECK(u.neu == 20.0);
    CHECK(u.pos == 40.0);
    CHECK(error_code([&] { rq_split(uniform, map, ResearchQuestion::RQ3); }) == "EmptyRq");
  }

  TEST_CASE("rankings of the reference fixture")
  {
    auto c2 = fixture("cycle2.csv");
    auto map = ConstructMap::defaults();
    auto rq1 = rank_questions(c2, map, ResearchQuestion::RQ1);
    CHECK(qids(rq1) == std::vector<std::string>{"Q10.1", "Q2.1", "Q7.1", "Q4.1", "Q1.1", "Q8.1", "Q5.1", "Q6.1",
                                                "Q3.1", "Q9.1"});
    CHECK(rq1[6].w_avg == 3.66);
    CHECK(rq1[7].w_avg == 3.66);
    CHECK(rq1[6].mean > rq1[7].mean); // the fixture tie is only in the displayed value
    CHECK(qids(rank_questions(c2, map, ResearchQuestion::RQ2)) == std::vector<std::string>{"Q13.1", "Q12.1", "Q11.1"});
    auto rq3 = rank_questions(c2, map, ResearchQuestion::RQ3);
    CHECK(qids(rq3) ==
          std::vector<std::string>{"Q17.1", "Q20.1", "Q16.1", "Q14.1", "Q18.1", "Q19.1", "Q21.1", "Q15.1"});
    CHECK(rq3[0].w_avg == 4.27);
  }

  TEST_CASE("ranking ties and edge cases")
  {
    auto map = ConstructMap::defaults();
    // Equal means: ascending question index.
    auto r = answers("Q6.1", {3, 4, 4});
    auto s = answers("Q5.1", {4, 3, 4});
    r.insert(r.end(), s.begin(), s.end());
    for (int i = 1; i <= 10; ++i)
      if (i != 5 && i != 6) {
        auto more = answers("Q" + std::to_string(i) + ".1", {1});
        r.insert(r.end(), more.begin(), more.end());
      }
    auto ranked = rank_questions(r, map, ResearchQuestion::RQ1);
    REQUIRE(ranked.size() == 10);
    CHECK(ranked[0].qid == "Q5.1");
    CHECK(ranked[1].qid == "Q6.1");
    CHECK(ranked.back().qid == "Q10.1");

    ConstructMap single;
    single.rq["Q11.1"] = ResearchQuestion::RQ2;
    auto one = answers("Q11.1", {5, 4});
    auto solo = rank_questions(one, single, ResearchQuestion::RQ2);
    REQUIRE(solo.size() == 1);
    CHECK(solo[0].w_avg == 4.5);
    CHECK(error_code([&] { rank_questions(one, map, ResearchQuestion::RQ2); }) == "NoResponses");
    CHECK(error_code([&] { rank_questions({}, map, ResearchQuestion::RQ2); }) == "EmptyRq");

    // 29 / 8 = 3.625 rounds half-up to 3.63.
    CHECK(rank_questions(answers("Q11.1", {4, 4, 4, 4, 4, 3, 3, 3}), single, ResearchQuestion::RQ2)[0].w_avg == 3.63);
  }

  TEST_CASE("question index order")
  {
    CHECK(question_index_less("Q5.1", "Q10.1"));
    CHECK_FALSE(question_index_less("Q10.1", "Q5.1"));
    CHECK(question_index_less("Q5.1", "Q5.2"));
    CHECK(question_index_less("Q99.1", "custom"));
  }

  TEST_CASE("csv parsing")
  {
    auto r = parse_survey_csv("participant_id,qid,value\r\np1,Q1.1,4\r\n\"p,2\",Q1.1,5\n\n");
    REQUIRE(r.size() == 2);
    CHECK(r[1].participant_id == "p,2");
    CHECK(r[1].cycle == "1");
    CHECK(parse_survey_csv("p1,Q1.1,4,3\n")[0].cycle == "3");
    CHECK(parse_survey_csv("").empty());
    CHECK(parse_survey_csv("participant_id,qid,value\n").empty());

    auto malformed = [](const char* text) {
      try {
        parse_survey_csv(text);
      } catch (const AnalyticsError& e) {
        return e.code() + " " + e.what();
      }
      return std::string();
    };
    CHECK(malformed("participant_id,qid,value\np1,Q1.1,4\np2,Q1.1,7\n").rfind("CsvMalformed line 3:", 0) == 0);
    CHECK(malformed("p1,Q1.1,0\n").rfind("CsvMalformed line 1:", 0) == 0);
    CHECK(malformed("p1,Q1.1,4.5\n").rfind("CsvMalformed line 1:", 0) == 0);
    CHECK(malformed("p1,Q1.1\n").rfind("CsvMalformed line 1:", 0) == 0);
    CHECK(malformed("p1,Q1.1,4\np1,Q1.1,5\n").rfind("CsvMalformed line 2:", 0) == 0);
    CHECK(malformed("\"p1,Q1.1,4\n").rfind("CsvMalformed line 1:", 0) == 0);
  }

  TEST_CASE("construct map json")
  {
    auto map = construct_map_from_json(to_json(ConstructMap::defaults()));
    CHECK(map.rq == ConstructMap::defaults().rq);
    CHECK(map.construct == ConstructMap::defaults().construct);
    CHECK(map.questions(Construct::BE) == std::vector<std::string>{"Q3.1", "Q4.1", "Q5.1", "Q6.1", "Q7.1"});
    CHECK(map.questions(ResearchQuestion::RQ2) == std::vector<std::string>{"Q11.1", "Q12.1", "Q13.1"});
    CHECK(error_code([] { construct_map_from_json({{"Q11.1", {{"rq", "RQ2"}, {"construct", "PE"}}}}); }) ==
          "InvalidConstructMap");
    CHECK(error_code([] { construct_map_from_json({{"Q1.1", {{"rq", "RQ4"}}}}); }) == "InvalidConstructMap");
    CHECK(error_code([] { construct_map_from_json({{"Q1.1", {{"rq", "RQ1"}, {"construct", "XX"}}}}); }) ==
          "InvalidConstructMap");
  }

  TEST_CASE("report over both cycles")
  {
    auto report = survey_report(both_cycles(), ConstructMap::defaults());
    CHECK(report["cycles"] == nlohmann::json{"2", "3"});
    CHECK(report["by_cycle"]["2"]["rq_splits"]["RQ1"]["neg"] == 7.89);
    bool found = false;
    for (const auto& d : report["hellinger"])
      if (d["construct"] == "BE") {
        CHECK(std::round(d["d"].get<double>() * 100) / 100 == 0.25);
        found = true;
      }
    CHECK(found);
    // Cycle 3 covers only RQ1.
    std::set<std::string> codes;
    for (const auto& e : report["errors"])
      codes.insert(e["code"].get<std::string>());
    CHECK(codes == std::set<std::string>{"EmptyRq"});
    CHECK(report["errors"].size() == 4);

    std::string text = render_survey_report(report);
    CHECK(text.find("BE   2 -> 3  d=0.25") != std::string::npos);
    CHECK(text.find("RQ1           7.89%   16.13%   75.99%") != std::string::npos);

    auto empty = survey_report({}, ConstructMap::defaults());
    CHECK(empty["errors"].size() == 9);
    CHECK(empty["cycles"].empty());
  }
}
