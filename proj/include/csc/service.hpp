#pragma once

#include "csc/assessment.hpp"
#include "csc/game.hpp"
#include "csc/sandbox.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace csc {

enum class Registration { OPEN, PREASSIGNED };

/// event.json. Relative paths resolve against the file's directory.
///
///   {"name", "event_id", "mode": "WORKSHOP"|"STANDALONE",
///    "agenda": {"MAIN_EVENT": 240, ...}, "bundles": ["challenges/x", ...],
///    "registration": "open"|"preassigned", "teams": [{"id", "display_name",
///    "members"}], "join_codes": [...], "admin_token", "start": <unix ms>,
///    "data_dir", "hint_cooldown_seconds", "survey_open",
///    "session_ttl_minutes", "snapshot_interval_seconds",
///    "assessment_workers"}
struct EventConfig
{
  std::string name;
  std::string event_id;
  Mode mode = Mode::WORKSHOP;
  std::vector<AgendaBlock> agenda = default_agenda();
  std::vector<std::filesystem::path> bundle_dirs;
  Registration registration = Registration::OPEN;
  std::vector<Team> teams;
  std::vector<std::string> join_codes;
  std::string admin_token;
  /// Unix ms of event minute zero; the first server start when absent.
  std::optional<std::int64_t> start;
  std::filesystem::path data_dir;
  int hint_cooldown_seconds = 30;
  /// Surveys are otherwise accepted from the FEEDBACK block on.
  bool survey_open = false;
  int session_ttl_minutes = 12 * 60;
  int snapshot_interval_seconds = 60;
  int assessment_workers = 2;
};

/// Throws Error("ConfigInvalid").
EventConfig event_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
EventConfig load_event_config(const std::filesystem::path& file);

/// HTTP status for an error code; 500 for unknown codes.
int http_status(std::string_view code);
/// "GameClosed" -> "GAME_CLOSED".
std::string api_error_code(std::string_view code);

struct ServerOptions
{
  /// Unix milliseconds. Defaults to the system clock.
  std::function<std::int64_t()> wall_clock;
  SandboxConfig sandbox = SandboxConfig::from_env();
  AssessorConfig assessor;
  /// Operator messages (recovery warnings, startup). Defaults to stderr.
  std::function<void(const std::string&)> log;
};

/// The event server: HTTP routes over one game, its event log and an
/// assessment worker pool. All state changes go through a single writer
/// thread; handlers read published snapshots.
class EventServer
{
public:
  /// Loads and validates the bundles and recovers the store. Throws
  /// Error("ConfigInvalid") or StorageError; nothing is bound yet.
  explicit EventServer(EventConfig config, ServerOptions options = {});
  ~EventServer();
  EventServer(const EventServer&) = delete;
  EventServer& operator=(const EventServer&) = delete;

  /// Returns the bound port; port 0 picks a free one. Throws
  /// Error("PortInUse").
  int bind(const std::string& host, int port);
  /// Serves until stop(); then drains the workers and writes a final
  /// snapshot.
  void run();
  /// Safe from any thread.
  void stop();
  void wait_until_ready() const;

  /// Latest published state.
  GameState state() const;
  const std::vector<std::string>& recovery_warnings() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace csc
