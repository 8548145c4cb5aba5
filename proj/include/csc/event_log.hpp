#pragma once

#include "csc/game.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace csc {

/// One record per line: {"seq": n, "crc": crc32(event), "event": {...}}.
std::string encode_record(std::uint64_t seq, const GameEvent& event);

struct ParsedLog
{
  std::vector<GameEvent> events; // seq 1..n
  /// Bytes covered by complete, verified records.
  std::size_t valid_bytes = 0;
  /// The final record was cut short or failed its checksum.
  bool torn_tail = false;
};

/// Throws StorageError("StorageCorrupt") for damage anywhere but the final
/// record, and for sequence gaps.
ParsedLog parse_log(std::string_view bytes);

/// Append-only event log plus snapshots in one directory:
/// events.ndjson and snapshot.json.
class EventLog
{
public:
  explicit EventLog(std::filesystem::path dir);
  ~EventLog();
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  /// Rebuilds the state: latest snapshot, then the records after it. A torn
  /// final record is cut off and reported in `warnings`. Must be called
  /// once before append().
  GameState recover(const GameState& initial, std::vector<std::string>* warnings = nullptr);

  /// Writes and syncs one record.
  void append(const GameEvent& event);

  /// Atomically replaces snapshot.json with `state` at the current sequence.
  void snapshot(const GameState& state);

  std::uint64_t sequence() const { return seq_; }
  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path log_path() const { return dir_ / "events.ndjson"; }
  std::filesystem::path snapshot_path() const { return dir_ / "snapshot.json"; }

private:
  std::filesystem::path dir_;
  int fd_ = -1;
  std::uint64_t seq_ = 0;
};

} // namespace csc
