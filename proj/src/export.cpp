#include "csc/export.hpp"

#include "csc/error.hpp"

#include <zlib.h>

#include <cstdint>
#include <limits>
#include <vector>

namespace csc {

namespace {

void put16(std::string& out, std::uint16_t v)
{
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& out, std::uint32_t v)
{
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

constexpr std::uint16_t kVersion = 20;
constexpr std::uint16_t kUtf8Names = 0x0800;
constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1; // 1980-01-01

} // namespace

std::string write_zip(std::span<const ZipEntry> entries)
{
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  if (entries.size() >= 0xffff)
    throw StorageError("ExportTooLarge", "too many files for a zip archive");
  std::string out;
  std::string central;
  for (const auto& e : entries) {
    if (e.data.size() >= kMax || out.size() >= kMax || e.path.size() >= 0xffff)
      throw StorageError("ExportTooLarge", "export exceeds the zip size limits");
    auto crc = static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(e.data.data()), static_cast<uInt>(e.data.size())));
    auto size = static_cast<std::uint32_t>(e.data.size());
    auto offset = static_cast<std::uint32_t>(out.size());
    auto name_len = static_cast<std::uint16_t>(e.path.size());

    put32(out, 0x04034b50);
    put16(out, kVersion);
    put16(out, kUtf8Names);
    put16(out, 0); // stored
    put16(out, 0); // time
    put16(out, kDosDate);
    put32(out, crc);
    put32(out, size);
    put32(out, size);
    put16(out, name_len);
    put16(out, 0);
    out += e.path;
    out += e.data;

    put32(central, 0x02014b50);
    put16(central, (3 << 8) | kVersion); // made by unix
    put16(central, kVersion);
    put16(central, kUtf8Names);
    put16(central, 0);
    put16(central, 0);
    put16(central, kDosDate);
    put32(central, crc);
    put32(central, size);
    put32(central, size);
    put16(central, name_len);
    put16(central, 0); // extra
    put16(central, 0); // comment
    put16(central, 0); // disk
    put16(central, 0); // internal attributes
    put32(central, 0100644u << 16);
    put32(central, offset);
    central += e.path;
  }
  if (out.size() + central.size() >= kMax)
    throw StorageError("ExportTooLarge", "export exceeds the zip size limits");
  auto cd_offset = static_cast<std::uint32_t>(out.size());
  out += central;
  put32(out, 0x06054b50);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put32(out, static_cast<std::uint32_t>(central.size()));
  put32(out, cd_offset);
  put16(out, 0);
  return out;
}

std::string csv_field(std::string_view value)
{
  if (value.find_first_of(",\"\r\n") == std::string_view::npos)
    return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"')
      out += '"';
    out += c;
  }
  return out + "\"";
}

std::string scoreboard_csv(const GameState& state)
{
  std::string out = "rank,team,display_name,points,last_solve_s\n";
  int rank = 0;
  for (const auto& row : scoreboard(state)) {
    out += std::to_string(++rank) + "," + csv_field(row.team) + "," + csv_field(row.display_name) + "," +
           std::to_string(row.points) + ",";
    if (row.last_solve_at)
      out += std::to_string(*row.last_solve_at / 1000);
    out += "\n";
  }
  return out;
}

std::string survey_csv(const GameState& state)
{
  std::string out = "participant_id,qid,value\n";
  for (const auto& s : state.surveys)
    for (const auto& a : s.answers)
      out += csv_field(s.participant) + "," + csv_field(a.qid) + "," + std::to_string(a.value) + "\n";
  return out;
}

std::string export_archive(const GameState& state, std::string_view event_log)
{
  std::vector<ZipEntry> entries;
  entries.push_back({"events.ndjson", std::string(event_log)});
  entries.push_back({"scoreboard.csv", scoreboard_csv(state)});
  entries.push_back({"survey.csv", survey_csv(state)});
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& r : state.error_reports)
    reports.push_back({{"player", r.player},
                       {"challenge", r.challenge},
                       {"text", r.text},
                       {"phase", r.phase},
                       {"last_submission_id", r.last_submission_id},
                       {"at_s", r.at / 1000}});
  entries.push_back({"error_reports.json", reports.dump(2) + "\n"});
  for (const auto& s : state.submissions)
    for (const auto& [path, content] : s.files)
      entries.push_back({"submissions/" + s.team + "/" + s.challenge + "/" + s.submission_id + "/" + path, content});
  return write_zip(entries);
}

} // namespace csc
