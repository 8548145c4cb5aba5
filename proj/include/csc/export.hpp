#pragma once

#include "csc/game.hpp"

#include <span>
#include <string>
#include <string_view>

namespace csc {

struct ZipEntry
{
  std::string path;
  std::string data;
};

/// Uncompressed (stored) zip archive. Throws StorageError("ExportTooLarge")
/// beyond the classic 4 GiB / 65535-entry limits.
std::string write_zip(std::span<const ZipEntry> entries);

/// rank,team,display_name,points,last_solve_s in scoreboard order.
std::string scoreboard_csv(const GameState& state);

/// participant_id,qid,value; the input format of the analytics report.
std::string survey_csv(const GameState& state);

/// RFC 4180 field quoting when needed.
std::string csv_field(std::string_view value);

/// events.ndjson, scoreboard.csv, survey.csv, error_reports.json and every
/// submitted file byte-for-byte under
/// submissions/<team>/<challenge>/<submission_id>/<path>.
std::string export_archive(const GameState& state, std::string_view event_log);

} // namespace csc
