#include "csc/analytics.hpp"

#include "csc/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <set>
#include <tuple>

namespace csc {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(std::size_t line, const std::string& why)
{
  throw AnalyticsError("CsvMalformed", "line " + std::to_string(line) + ": " + why);
}

std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no)
{
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      }
      else if (c == '"')
        quoted = false;
      else
        fields.back() += c;
    }
    else if (c == '"' && fields.back().empty())
      quoted = true;
    else if (c == ',')
      fields.emplace_back();
    else
      fields.back() += c;
  }
  if (quoted)
    malformed(line_no, "unterminated quote");
  return fields;
}

std::string trim(std::string s)
{
  auto blank = [](unsigned char c) { return std::isspace(c); };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), blank));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), blank).base(), s.end());
  return s;
}

std::optional<std::tuple<long, long>> question_index(std::string_view qid)
{
  long major = 0;
  long minor = 0;
  char tail = 0;
  std::string s(qid);
  if (std::sscanf(s.c_str(), "Q%ld.%ld%c", &major, &minor, &tail) == 2)
    return std::tuple{major, minor};
  if (std::sscanf(s.c_str(), "Q%ld%c", &major, &tail) == 1)
    return std::tuple{major, 0L};
  return std::nullopt;
}

bool in_cycle(const LikertResponse& r, const std::optional<std::string>& cycle)
{
  return !cycle || r.cycle == *cycle;
}

std::array<std::size_t, 5> histogram(const std::vector<LikertResponse>& responses, const std::set<std::string>& qids,
                                     const std::optional<std::string>& cycle)
{
  std::array<std::size_t, 5> h{};
  for (const auto& r : responses)
    if (qids.contains(r.qid) && in_cycle(r, cycle))
      ++h[static_cast<std::size_t>(r.value - 1)];
  return h;
}

Pmf pmf_of(const std::array<std::size_t, 5>& h)
{
  std::size_t n = 0;
  for (auto c : h)
    n += c;
  Pmf p{kLikertLabels, {}};
  for (auto c : h)
    p.probs.push_back(static_cast<double>(c) / static_cast<double>(n));
  return p;
}

double round2(double x)
{
  return std::round(x * 100.0) / 100.0;
}

double round4(double x)
{
  return std::round(x * 10'000.0) / 10'000.0;
}

json split_json(const TriSplit& s)
{
  return {{"neg", s.neg}, {"neu", s.neu}, {"pos", s.pos}, {"responses", s.responses}};
}

[[gnu::format(printf, 2, 3)]] void appendf(std::string& out, const char* fmt, ...)
{
  char buf[160];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  out += buf;
  out += '\n';
}

} // namespace

// ---- input ----

std::vector<LikertResponse> parse_survey_csv(std::string_view text)
{
  std::vector<LikertResponse> out;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    if (trim(std::string(line)).empty())
      continue;
    auto fields = split_csv_line(line, line_no);
    for (auto& f : fields)
      f = trim(f);
    if (line_no == 1 && fields[0] == "participant_id")
      continue;
    if (fields.size() != 3 && fields.size() != 4)
      malformed(line_no, "expected participant_id,qid,value[,cycle], got " + std::to_string(fields.size()) + " fields");
    LikertResponse r;
    r.participant_id = fields[0];
    r.qid = fields[1];
    if (r.participant_id.empty() || r.qid.empty())
      malformed(line_no, "participant_id and qid must be non-empty");
    const std::string& v = fields[2];
    if (v.size() != 1 || v[0] < '1' || v[0] > '5')
      malformed(line_no, "value '" + v + "' is not a Likert answer 1-5");
    r.value = v[0] - '0';
    if (fields.size() == 4) {
      if (fields[3].empty())
        malformed(line_no, "cycle must be non-empty");
      r.cycle = fields[3];
    }
    if (!seen.insert({r.participant_id, r.qid, r.cycle}).second)
      malformed(line_no, "second answer of " + r.participant_id + " to " + r.qid);
    out.push_back(std::move(r));
  }
  return out;
}

// ---- mapping ----

std::string_view to_string(Construct c)
{
  switch (c) {
  case Construct::PE: return "PE";
  case Construct::BE: return "BE";
  case Construct::PR: return "PR";
  }
  return "?";
}

std::string_view to_string(ResearchQuestion rq)
{
  switch (rq) {
  case ResearchQuestion::RQ1: return "RQ1";
  case ResearchQuestion::RQ2: return "RQ2";
  case ResearchQuestion::RQ3: return "RQ3";
  }
  return "?";
}

std::optional<Construct> parse_construct(std::string_view s)
{
  for (auto c : {Construct::PE, Construct::BE, Construct::PR})
    if (to_string(c) == s)
      return c;
  return std::nullopt;
}

std::optional<ResearchQuestion> parse_rq(std::string_view s)
{
  for (auto rq : {ResearchQuestion::RQ1, ResearchQuestion::RQ2, ResearchQuestion::RQ3})
    if (to_string(rq) == s)
      return rq;
  return std::nullopt;
}

bool question_index_less(std::string_view a, std::string_view b)
{
  auto ia = question_index(a);
  auto ib = question_index(b);
  if (ia && ib)
    return *ia != *ib ? *ia < *ib : a < b;
  if (ia || ib)
    return ia.has_value();
  return a < b;
}

ConstructMap ConstructMap::defaults()
{
  ConstructMap m;
  auto q = [](int i) { return "Q" + std::to_string(i) + ".1"; };
  for (int i = 1; i <= 21; ++i)
    m.rq[q(i)] = i <= 10 ? ResearchQuestion::RQ1 : i <= 13 ? ResearchQuestion::RQ2 : ResearchQuestion::RQ3;
  for (int i = 1; i <= 10; ++i)
    m.construct[q(i)] = i <= 2 ? Construct::PE : i <= 7 ? Construct::BE : Construct::PR;
  return m;
}

std::vector<std::string> ConstructMap::questions(ResearchQuestion r) const
{
  std::vector<std::string> out;
  for (const auto& [qid, value] : rq)
    if (value == r)
      out.push_back(qid);
  std::sort(out.begin(), out.end(), question_index_less);
  return out;
}

std::vector<std::string> ConstructMap::questions(Construct c) const
{
  std::vector<std::string> out;
  for (const auto& [qid, value] : construct)
    if (value == c)
      out.push_back(qid);
  std::sort(out.begin(), out.end(), question_index_less);
  return out;
}

ConstructMap construct_map_from_json(const json& j)
{
  auto bad = [](const std::string& why) { throw AnalyticsError("InvalidConstructMap", why); };
  if (!j.is_object() || j.empty())
    bad("expected an object mapping question ids to {\"rq\", \"construct\"}");
  ConstructMap m;
  for (const auto& [qid, entry] : j.items()) {
    if (!entry.is_object() || !entry.contains("rq") || !entry["rq"].is_string())
      bad(qid + ": needs a string \"rq\"");
    auto rq = parse_rq(entry["rq"].get<std::string>());
    if (!rq)
      bad(qid + ": unknown research question " + entry["rq"].dump());
    m.rq[qid] = *rq;
    if (entry.contains("construct")) {
      auto c = entry["construct"].is_string() ? parse_construct(entry["construct"].get<std::string>()) : std::nullopt;
      if (!c)
        bad(qid + ": unknown construct " + entry["construct"].dump());
      if (*rq != ResearchQuestion::RQ1)
        bad(qid + ": constructs are only defined for RQ1 questions");
      m.construct[qid] = *c;
    }
  }
  return m;
}

json to_json(const ConstructMap& map)
{
  json j = json::object();
  for (const auto& [qid, rq] : map.rq) {
    j[qid] = {{"rq", to_string(rq)}};
    if (auto it = map.construct.find(qid); it != map.construct.end())
      j[qid]["construct"] = to_string(it->second);
  }
  return j;
}

// ---- distributions ----

void Pmf::validate() const
{
  if (labels.size() != probs.size() || labels.empty())
    throw AnalyticsError("InvalidPmf", "labels and probabilities differ in arity");
  double sum = 0;
  for (double p : probs) {
    if (!(p >= 0))
      throw AnalyticsError("InvalidPmf", "probabilities must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw AnalyticsError("InvalidPmf", "probabilities sum to " + std::to_string(sum));
}

Pmf question_pmf(const std::vector<LikertResponse>& responses, std::string_view qid)
{
  auto h = histogram(responses, {std::string(qid)}, std::nullopt);
  if (h[0] + h[1] + h[2] + h[3] + h[4] == 0)
    throw AnalyticsError("NoResponses", "no responses to " + std::string(qid));
  return pmf_of(h);
}

Pmf tri_bin(const Pmf& five)
{
  if (five.probs.size() != 5 || five.labels.size() != 5)
    throw AnalyticsError("ArityMismatch", "tri-binning needs a 5-point distribution");
  const auto& p = five.probs;
  return {kTriLabels, {p[0] + p[1], p[2], p[3] + p[4]}};
}

Pmf construct_pmf(const std::vector<LikertResponse>& responses, const ConstructMap& map, Construct construct,
                  const std::optional<std::string>& cycle, Pooling pooling)
{
  auto qids = map.questions(construct);
  std::string scope = std::string(to_string(construct)) + (cycle ? " in cycle " + *cycle : "");
  if (pooling == Pooling::ResponseWeighted) {
    auto h = histogram(responses, {qids.begin(), qids.end()}, cycle);
    if (h[0] + h[1] + h[2] + h[3] + h[4] == 0)
      throw AnalyticsError("EmptyConstruct", "no responses for " + scope);
    return pmf_of(h);
  }
  Pmf avg{kLikertLabels, std::vector<double>(5, 0.0)};
  int used = 0;
  for (const auto& q : qids) {
    auto h = histogram(responses, {q}, cycle);
    if (h[0] + h[1] + h[2] + h[3] + h[4] == 0)
      continue;
    Pmf p = pmf_of(h);
    for (std::size_t i = 0; i < 5; ++i)
      avg.probs[i] += p.probs[i];
    ++used;
  }
  if (used == 0)
    throw AnalyticsError("EmptyConstruct", "no responses for " + scope);
  for (auto& p : avg.probs)
    p /= used;
  return avg;
}

TriSplit rq_split(const std::vector<LikertResponse>& responses, const ConstructMap& map, ResearchQuestion rq,
                  const std::optional<std::string>& cycle)
{
  auto qids = map.questions(rq);
  auto h = histogram(responses, {qids.begin(), qids.end()}, cycle);
  std::size_t n = h[0] + h[1] + h[2] + h[3] + h[4];
  if (n == 0)
    throw AnalyticsError("EmptyRq",
                         "no responses for " + std::string(to_string(rq)) + (cycle ? " in cycle " + *cycle : ""));
  auto pct = [n](std::size_t c) { return round2(100.0 * static_cast<double>(c) / static_cast<double>(n)); };
  return {pct(h[0] + h[1]), pct(h[2]), pct(h[3] + h[4]), n};
}

std::vector<RankedQuestion> rank_questions(const std::vector<LikertResponse>& responses, const ConstructMap& map,
                                           ResearchQuestion rq, const std::optional<std::string>& cycle)
{
  struct Row
  {
    RankedQuestion q;
    long long hundredths = 0;
  };
  std::vector<Row> rows;
  std::vector<std::string> missing;
  for (const auto& qid : map.questions(rq)) {
    long long sum = 0;
    long long n = 0;
    for (const auto& r : responses)
      if (r.qid == qid && in_cycle(r, cycle)) {
        sum += r.value;
        ++n;
      }
    if (n == 0) {
      missing.push_back(qid);
      continue;
    }
    // Half-up rounding of the mean to hundredths, in integers.
    long long hundredths = (200 * sum + n) / (2 * n);
    double mean = static_cast<double>(sum) / static_cast<double>(n);
    rows.push_back({{qid, mean, static_cast<double>(hundredths) / 100.0, static_cast<std::size_t>(n)}, hundredths});
  }
  std::string where = std::string(to_string(rq)) + (cycle ? " in cycle " + *cycle : "");
  if (rows.empty())
    throw AnalyticsError("EmptyRq", "no responses for " + where);
  if (!missing.empty())
    throw AnalyticsError("NoResponses", "no responses to " + missing.front() + " (" + where + ")");
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.hundredths != b.hundredths)
      return a.hundredths > b.hundredths;
    return question_index_less(a.q.qid, b.q.qid);
  });
  std::vector<RankedQuestion> out;
  for (auto& r : rows)
    out.push_back(std::move(r.q));
  return out;
}

double hellinger(const Pmf& p, const Pmf& q)
{
  if (p.labels != q.labels || p.probs.size() != q.probs.size())
    throw AnalyticsError("ArityMismatch", "Hellinger distance needs distributions over the same bins");
  double bc = 0;
  for (std::size_t i = 0; i < p.probs.size(); ++i)
    bc += std::sqrt(p.probs[i] * q.probs[i]);
  return std::sqrt(std::clamp(1.0 - bc, 0.0, 1.0));
}

// ---- report ----

std::vector<std::string> survey_cycles(const std::vector<LikertResponse>& responses)
{
  std::vector<std::string> out;
  for (const auto& r : responses)
    if (std::find(out.begin(), out.end(), r.cycle) == out.end())
      out.push_back(r.cycle);
  return out;
}

json survey_report(const std::vector<LikertResponse>& responses, const ConstructMap& map, Pooling pooling)
{
  json errors = json::array();
  auto attempt = [&](const std::optional<std::string>& cycle, const std::string& scope, auto&& fn) {
    try {
      fn();
    } catch (const AnalyticsError& e) {
      errors.push_back(
        {{"code", e.code()}, {"cycle", cycle ? json(*cycle) : json(nullptr)}, {"scope", scope}, {"message", e.what()}});
    }
  };

  std::vector<std::optional<std::string>> cycles;
  for (const auto& c : survey_cycles(responses))
    cycles.emplace_back(c);
  if (cycles.empty())
    cycles.emplace_back(std::nullopt);

  constexpr ResearchQuestion kRqs[] = {ResearchQuestion::RQ1, ResearchQuestion::RQ2, ResearchQuestion::RQ3};
  constexpr Construct kConstructs[] = {Construct::PE, Construct::BE, Construct::PR};

  json by_cycle = json::object();
  std::map<std::string, std::map<Construct, Pmf>> tri;
  for (const auto& cycle : cycles) {
    json c{{"responses", 0}, {"rq_splits", json::object()}, {"constructs", json::object()},
           {"rankings", json::object()}};
    std::size_t n = 0;
    for (const auto& r : responses)
      n += in_cycle(r, cycle) ? 1 : 0;
    c["responses"] = n;
    for (auto rq : kRqs) {
      std::string name(to_string(rq));
      attempt(cycle, name + " split", [&] { c["rq_splits"][name] = split_json(rq_split(responses, map, rq, cycle)); });
      attempt(cycle, name + " ranking", [&] {
        json rows = json::array();
        for (const auto& q : rank_questions(responses, map, rq, cycle))
          rows.push_back({{"qid", q.qid}, {"w_avg", q.w_avg}, {"responses", q.responses}});
        c["rankings"][name] = rows;
      });
    }
    for (auto construct : kConstructs) {
      std::string name(to_string(construct));
      attempt(cycle, name, [&] {
        Pmf five = construct_pmf(responses, map, construct, cycle, pooling);
        Pmf t = tri_bin(five);
        if (cycle)
          tri[*cycle][construct] = t;
        json probs = json::array();
        for (double p : five.probs)
          probs.push_back(round4(p));
        c["constructs"][name] = {{"pmf", probs},
                                 {"neg", round2(100 * t.probs[0])},
                                 {"neu", round2(100 * t.probs[1])},
                                 {"pos", round2(100 * t.probs[2])}};
      });
    }
    by_cycle[cycle.value_or("all")] = c;
  }

  json distances = json::array();
  for (std::size_t i = 0; i < cycles.size(); ++i)
    for (std::size_t j = i + 1; j < cycles.size(); ++j)
      for (auto construct : kConstructs) {
        const auto& a = tri[*cycles[i]];
        const auto& b = tri[*cycles[j]];
        if (!a.contains(construct) || !b.contains(construct))
          continue;
        distances.push_back({{"construct", to_string(construct)},
                             {"from", *cycles[i]},
                             {"to", *cycles[j]},
                             {"d", round4(hellinger(a.at(construct), b.at(construct)))}});
      }

  json cycle_names = json::array();
  for (const auto& c : cycles)
    if (c)
      cycle_names.push_back(*c);
  return {{"pooling", pooling == Pooling::ResponseWeighted ? "response-weighted" : "question-averaged"},
          {"cycles", cycle_names},
          {"by_cycle", by_cycle},
          {"hellinger", distances},
          {"errors", errors}};
}

std::string render_survey_report(const json& report)
{
  std::string out;
  appendf(out, "Survey report (%s pooling)", report["pooling"].get<std::string>().c_str());
  for (const auto& [cycle, c] : report["by_cycle"].items()) {
    out += '\n';
    appendf(out, "Cycle %s (%zu responses)", cycle.c_str(), c["responses"].get<std::size_t>());
    if (!c["rq_splits"].empty()) {
      appendf(out, "  %-10s %8s %8s %8s %6s", "Question", "-", "N", "+", "n");
      for (const auto& [rq, s] : c["rq_splits"].items())
        appendf(out, "  %-10s %7.2f%% %7.2f%% %7.2f%% %6zu", rq.c_str(), s["neg"].get<double>(), s["neu"].get<double>(),
             s["pos"].get<double>(), s["responses"].get<std::size_t>());
    }
    if (!c["constructs"].empty()) {
      appendf(out, "  %-10s %8s %8s %8s", "Construct", "-", "N", "+");
      for (const auto& [name, s] : c["constructs"].items())
        appendf(out, "  %-10s %7.2f%% %7.2f%% %7.2f%%", name.c_str(), s["neg"].get<double>(), s["neu"].get<double>(),
             s["pos"].get<double>());
    }
    for (const auto& [rq, rows] : c["rankings"].items()) {
      appendf(out, "  Ranking %s", rq.c_str());
      for (const auto& r : rows)
        appendf(out, "    %-8s %5.2f  (n=%zu)", r["qid"].get<std::string>().c_str(), r["w_avg"].get<double>(),
             r["responses"].get<std::size_t>());
    }
  }
  if (!report["hellinger"].empty()) {
    out += '\n';
    appendf(out, "Hellinger distance between cycles (tri-binned)");
    for (const auto& d : report["hellinger"])
      appendf(out, "  %-4s %s -> %s  d=%.2f", d["construct"].get<std::string>().c_str(), d["from"].get<std::string>().c_str(),
           d["to"].get<std::string>().c_str(), d["d"].get<double>());
  }
  if (!report["errors"].empty()) {
    out += '\n';
    appendf(out, "Errors");
    for (const auto& e : report["errors"])
      out += "  " + e["code"].get<std::string>() + " [" + e["scope"].get<std::string>() +
             "]: " + e["message"].get<std::string>() + "\n";
  }
  return out;
}

} // namespace csc
