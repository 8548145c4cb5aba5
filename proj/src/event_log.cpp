#include "csc/event_log.hpp"

#include "csc/error.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

namespace csc {

namespace {

using nlohmann::json;

std::uint32_t crc_of(std::string_view bytes)
{
  return static_cast<std::uint32_t>(
    ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

[[noreturn]] void corrupt(const std::string& why)
{
  throw StorageError("StorageCorrupt", why);
}

[[noreturn]] void io_failure(const std::string& what)
{
  throw StorageError("StorageIo", what + ": " + std::strerror(errno));
}

void write_all(int fd, std::string_view data, const std::string& what)
{
  while (!data.empty()) {
    ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR)
        continue;
      io_failure(what);
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

// Returns the event when the line is a complete, verified record.
std::optional<GameEvent> decode(std::string_view line, std::uint64_t expected_seq, std::string& why)
{
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("seq") || !j.contains("crc") || !j.contains("event")) {
    why = "unparseable record";
    return std::nullopt;
  }
  const json& event = j["event"];
  if (!j["crc"].is_number_unsigned() || j["crc"].get<std::uint32_t>() != crc_of(event.dump())) {
    why = "checksum mismatch";
    return std::nullopt;
  }
  if (!j["seq"].is_number_unsigned() || j["seq"].get<std::uint64_t>() != expected_seq)
    corrupt("record " + std::to_string(expected_seq) + " carries sequence " + j["seq"].dump());
  return game_event_from_json(event);
}

} // namespace

std::string encode_record(std::uint64_t seq, const GameEvent& event)
{
  json e = to_json(event);
  std::string body = e.dump();
  json record{{"seq", seq}, {"crc", crc_of(body)}, {"event", std::move(e)}};
  return record.dump() + "\n";
}

ParsedLog parse_log(std::string_view bytes)
{
  ParsedLog out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::size_t nl = bytes.find('\n', pos);
    bool last = nl == std::string_view::npos || nl + 1 == bytes.size();
    std::string_view line = bytes.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    std::string why;
    std::optional<GameEvent> event;
    if (nl != std::string_view::npos)
      event = decode(line, out.events.size() + 1, why);
    else
      why = "record without terminating newline";
    if (!event) {
      if (!last)
        corrupt("record " + std::to_string(out.events.size() + 1) + " is damaged (" + why + ")");
      out.torn_tail = true;
      break;
    }
    out.events.push_back(std::move(*event));
    pos = nl + 1;
    out.valid_bytes = pos;
  }
  return out;
}

EventLog::EventLog(std::filesystem::path dir)
  : dir_(std::move(dir))
{
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec)
    throw StorageError("StorageIo", "cannot create " + dir_.string() + ": " + ec.message());
}

EventLog::~EventLog()
{
  if (fd_ >= 0)
    ::close(fd_);
}

GameState EventLog::recover(const GameState& initial, std::vector<std::string>* warnings)
{
  std::string bytes;
  if (std::ifstream in(log_path(), std::ios::binary); in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    bytes = ss.str();
  }
  ParsedLog parsed = parse_log(bytes);
  if (parsed.torn_tail) {
    std::filesystem::resize_file(log_path(), parsed.valid_bytes);
    if (warnings)
      warnings->push_back("dropped a torn final record; recovered " + std::to_string(parsed.events.size()) +
                          " records");
  }

  GameState state = initial;
  std::uint64_t from = 0;
  if (std::ifstream in(snapshot_path()); in) {
    json snap = json::parse(in, nullptr, false);
    bool usable = !snap.is_discarded() && snap.is_object() && snap.contains("seq") && snap.contains("crc") &&
                  snap.contains("state") && snap["crc"] == crc_of(snap["state"].dump());
    if (!usable) {
      if (warnings)
        warnings->push_back("ignored an unreadable snapshot; replaying the full log");
    }
    else {
      from = snap["seq"].get<std::uint64_t>();
      if (from > parsed.events.size())
        corrupt("snapshot is ahead of the event log (" + std::to_string(from) + " > " +
                std::to_string(parsed.events.size()) + ")");
      state = game_state_from_json(snap["state"]);
      if (state.event_id != initial.event_id)
        corrupt("snapshot belongs to event '" + state.event_id + "'");
    }
  }
  for (std::size_t i = from; i < parsed.events.size(); ++i)
    apply_event(state, parsed.events[i]);
  seq_ = parsed.events.size();

  fd_ = ::open(log_path().c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0640);
  if (fd_ < 0)
    io_failure("cannot open " + log_path().string());
  return state;
}

void EventLog::append(const GameEvent& event)
{
  if (fd_ < 0)
    throw StorageError("StorageIo", "event log used before recover()");
  write_all(fd_, encode_record(seq_ + 1, event), "append to " + log_path().string());
  if (::fdatasync(fd_) != 0)
    io_failure("sync " + log_path().string());
  ++seq_;
}

void EventLog::snapshot(const GameState& state)
{
  json s = to_json(state);
  json doc{{"seq", seq_}, {"crc", crc_of(s.dump())}, {"state", std::move(s)}};
  auto tmp = snapshot_path();
  tmp += ".tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0640);
  if (fd < 0)
    io_failure("cannot write " + tmp.string());
  try {
    write_all(fd, doc.dump() + "\n", "write " + tmp.string());
    if (::fsync(fd) != 0)
      io_failure("sync " + tmp.string());
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  std::filesystem::rename(tmp, snapshot_path());
}

} // namespace csc
