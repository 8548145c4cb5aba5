#pragma once

#include "csc/sandbox.hpp"

#include <chrono>
#include <string>
#include <string_view>

namespace csc::detail {

/// Feeds stdin and captures stdout/stderr of a child without blocking,
/// keeping at most `max_bytes` per stream and draining the rest.
class OutputPump
{
public:
  OutputPump(int stdin_fd, int stdout_fd, int stderr_fd, std::string_view input, std::size_t max_bytes);
  OutputPump(const OutputPump&) = delete;
  OutputPump& operator=(const OutputPump&) = delete;
  ~OutputPump();

  /// Waits up to `timeout_ms` for I/O and services every ready descriptor.
  void poll_once(int timeout_ms);
  bool outputs_closed() const { return stdout_fd_ < 0 && stderr_fd_ < 0; }
  void close_all();

  std::string stdout_data;
  std::string stderr_data;
  bool stdout_truncated = false;
  bool stderr_truncated = false;

private:
  void read_into(int& fd, std::string& sink, bool& truncated);

  int stdin_fd_;
  int stdout_fd_;
  int stderr_fd_;
  std::string_view input_;
  std::size_t written_ = 0;
  std::size_t max_bytes_;
};

void ignore_sigpipe_once();
void set_nonblocking(int fd);
double seconds_since(std::chrono::steady_clock::time_point start);

/// Recursively hands ownership of `dir` to uid/gid.
void chown_tree(const std::filesystem::path& dir, int uid, int gid);

ExecutionOutcome sandbox_failure(std::string reason);

} // namespace csc::detail
