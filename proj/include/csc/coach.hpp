#pragma once

#include "csc/assessment.hpp"
#include "csc/challenge.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace csc {

/// Milliseconds on a clock that never runs backwards.
using Timestamp = std::int64_t;

struct Hint
{
  int level = 1; // 1 category nudge, 2 location, 3 remediation with guideline
  std::string text;
  /// Finding id, failed test id or "compile"; empty once every target is
  /// exhausted.
  std::optional<std::string> finding_ref;
  Timestamp issued_at = 0;

  bool operator==(const Hint&) const = default;
};

nlohmann::json to_json(const Hint&);
Hint hint_from_json(const nlohmann::json&);

/// Category used for failed functional tests and a bare compile failure.
inline constexpr std::string_view kFailedTestCategory = "FAILED_TEST";
/// Template category matching any finding.
inline constexpr std::string_view kAnyCategory = "*";

/// Templates shipped with the platform: every category the pipeline emits,
/// levels 1 to 3, plus a "*" fallback.
const std::vector<HintTemplate>& default_hint_pack();

/// Substitutes {file}, {line}, {guideline}, {category}, {test}, {diff} and
/// {message}. Level 3 output always names the finding's guideline when it has
/// one. Throws CoachError with code CategoryMismatch or
/// MissingPlaceholderData.
std::string render_hint(const HintTemplate& tmpl, const Finding& finding);

struct CoachConfig
{
  int cooldown_seconds = 30;
};

class Coach
{
public:
  explicit Coach(CoachConfig config = {})
    : config_(config)
  {
  }

  /// `history` holds the hints already issued to this player for this
  /// challenge, oldest first. Throws CoachError with code AlreadyAcceptable
  /// or Cooldown.
  Hint next_hint(const AssessmentReport& report, std::span<const Hint> history, const ChallengeBundle& bundle,
                 Timestamp now) const;

  const CoachConfig& config() const { return config_; }

private:
  CoachConfig config_;
};

/// Blocking reasons of `report` in the order the coach addresses them.
std::vector<Finding> hint_targets(const AssessmentReport& report);

} // namespace csc
