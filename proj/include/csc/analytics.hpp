#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace csc {

struct LikertResponse
{
  std::string participant_id;
  std::string qid;  // "Q10.1"
  int value = 3;    // 1 strongly disagree .. 5 strongly agree
  std::string cycle = "1";

  bool operator==(const LikertResponse&) const = default;
};

/// `participant_id,qid,value[,cycle]` with an optional header line. Throws
/// AnalyticsError("CsvMalformed") whose message starts with "line N:".
std::vector<LikertResponse> parse_survey_csv(std::string_view text);

enum class Construct { PE, BE, PR };
enum class ResearchQuestion { RQ1, RQ2, RQ3 };

std::string_view to_string(Construct);
std::string_view to_string(ResearchQuestion);
std::optional<Construct> parse_construct(std::string_view);
std::optional<ResearchQuestion> parse_rq(std::string_view);

/// Orders "Q5.1" before "Q10.1"; unparseable ids sort last, by text.
bool question_index_less(std::string_view a, std::string_view b);

struct ConstructMap
{
  std::map<std::string, ResearchQuestion> rq;
  /// Only RQ1 questions carry a construct.
  std::map<std::string, Construct> construct;

  /// PE Q1.1-Q2.1, BE Q3.1-Q7.1, PR Q8.1-Q10.1 (RQ1); RQ2 Q11.1-Q13.1;
  /// RQ3 Q14.1-Q21.1.
  static ConstructMap defaults();

  /// In question index order.
  std::vector<std::string> questions(ResearchQuestion) const;
  std::vector<std::string> questions(Construct) const;
};

/// {"Q1.1": {"rq": "RQ1", "construct": "PE"}, "Q11.1": {"rq": "RQ2"}, ...}.
/// Throws AnalyticsError("InvalidConstructMap").
ConstructMap construct_map_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ConstructMap& map);

struct Pmf
{
  std::vector<std::string> labels;
  std::vector<double> probs;

  /// Throws AnalyticsError("InvalidPmf") unless the arities match and the
  /// probabilities are non-negative and sum to 1 within 1e-9.
  void validate() const;
  bool operator==(const Pmf&) const = default;
};

inline const std::vector<std::string> kLikertLabels{"1", "2", "3", "4", "5"};
inline const std::vector<std::string> kTriLabels{"NEG", "NEU", "POS"};

/// Empirical distribution over the five answers. Throws
/// AnalyticsError("NoResponses").
Pmf question_pmf(const std::vector<LikertResponse>& responses, std::string_view qid);

/// NEG = p1 + p2, NEU = p3, POS = p4 + p5. Throws
/// AnalyticsError("ArityMismatch").
Pmf tri_bin(const Pmf& five);

enum class Pooling {
  ResponseWeighted, // every response counts once
  QuestionAveraged, // every question counts once
};

/// Pooled distribution of the construct's questions, optionally restricted
/// to one cycle. Throws AnalyticsError("EmptyConstruct").
Pmf construct_pmf(const std::vector<LikertResponse>& responses, const ConstructMap& map, Construct construct,
                  const std::optional<std::string>& cycle = std::nullopt,
                  Pooling pooling = Pooling::ResponseWeighted);

/// Percentages rounded to two decimals.
struct TriSplit
{
  double neg = 0;
  double neu = 0;
  double pos = 0;
  std::size_t responses = 0;
};

/// Pooled tri-bin percentages over the research question's questions.
/// Throws AnalyticsError("EmptyRq").
TriSplit rq_split(const std::vector<LikertResponse>& responses, const ConstructMap& map, ResearchQuestion rq,
                  const std::optional<std::string>& cycle = std::nullopt);

struct RankedQuestion
{
  std::string qid;
  double mean = 0;  // unrounded
  double w_avg = 0; // mean rounded to two decimals
  std::size_t responses = 0;
};

/// Descending by w_avg (the rounded mean), ties by ascending question
/// index. Throws AnalyticsError EmptyRq when the research question has no
/// responses at all and NoResponses when one of its questions has none.
std::vector<RankedQuestion> rank_questions(const std::vector<LikertResponse>& responses, const ConstructMap& map,
                                           ResearchQuestion rq, const std::optional<std::string>& cycle = std::nullopt);

/// sqrt(1 - sum sqrt(p_i q_i)), clamped to [0, 1]. Throws
/// AnalyticsError("ArityMismatch") when the labels differ.
double hellinger(const Pmf& p, const Pmf& q);

/// Cycles in first-appearance order.
std::vector<std::string> survey_cycles(const std::vector<LikertResponse>& responses);

/// Per cycle: RQ splits, construct tri-bins and rankings; Hellinger
/// distances between the construct tri-bins of every pair of cycles. Failed
/// computations are listed under "errors" instead of aborting the report.
nlohmann::json survey_report(const std::vector<LikertResponse>& responses, const ConstructMap& map,
                             Pooling pooling = Pooling::ResponseWeighted);

/// Plain-text tables of a survey_report().
std::string render_survey_report(const nlohmann::json& report);

} // namespace csc
