#include "csc/sandbox.hpp"

#include "csc/error.hpp"
#include "sandbox_internal.hpp"

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>

#include <fcntl.h>
#include <poll.h>
#include <unistd.h>

namespace csc {

namespace fs = std::filesystem;

void ResourceLimits::validate() const
{
  auto bad = [](const std::string& why) { throw SandboxError("InvalidLimits", "invalid resource limits: " + why); };
  if (!(cpu_seconds > 0) || !std::isfinite(cpu_seconds))
    bad("cpu_seconds must be positive and finite");
  if (!(wall_seconds > 0) || !std::isfinite(wall_seconds))
    bad("wall_seconds must be positive and finite");
  if (wall_seconds < cpu_seconds)
    bad("wall_seconds must be >= cpu_seconds");
  if (memory_bytes == 0)
    bad("memory_bytes must be positive");
  if (max_processes <= 0)
    bad("max_processes must be positive");
  if (max_output_bytes == 0)
    bad("max_output_bytes must be positive");
}

std::string_view to_string(ExecStatus s)
{
  switch (s) {
    case ExecStatus::Exited: return "Exited";
    case ExecStatus::CpuTimeout: return "CpuTimeout";
    case ExecStatus::WallTimeout: return "WallTimeout";
    case ExecStatus::MemoryKill: return "MemoryKill";
    case ExecStatus::OutputTruncatedExit: return "OutputTruncatedExit";
    case ExecStatus::SandboxError: return "SandboxError";
  }
  return "?";
}

// ---- scratch ---------------------------------------------------------------

Scratch::Scratch(fs::path dir)
  : dir_(std::move(dir))
{
}

Scratch::Scratch(Scratch&& other) noexcept
  : dir_(std::exchange(other.dir_, {}))
{
}

Scratch& Scratch::operator=(Scratch&& other) noexcept
{
  if (this != &other) {
    dispose();
    dir_ = std::exchange(other.dir_, {});
  }
  return *this;
}

Scratch::~Scratch()
{
  dispose();
}

void Scratch::dispose()
{
  if (dir_.empty())
    return;
  std::error_code ec;
  fs::remove_all(dir_, ec);
  dir_.clear();
}

fs::path default_scratch_root()
{
  if (const char* env = std::getenv("CSC_SCRATCH_ROOT"); env && *env)
    return env;
  return fs::temp_directory_path() / "csc-scratch";
}

Scratch make_scratch(const std::map<std::string, std::string>& files, const fs::path& root)
{
  if (files.empty())
    throw SandboxError("EmptyProject", "project has no files");
  for (const auto& [path, _] : files)
    check_relative_path(path);

  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec)
    throw SandboxError("DiskFull", "cannot create scratch root '" + root.string() + "': " + ec.message());
  // Slot users must traverse the root but not list it.
  fs::permissions(root, fs::perms::owner_all | fs::perms::group_exec | fs::perms::others_exec, ec);

  std::string templ = (root / "run-XXXXXX").string();
  if (::mkdtemp(templ.data()) == nullptr)
    throw SandboxError("DiskFull", "mkdtemp failed: " + std::string(std::strerror(errno)));
  Scratch scratch{fs::path(templ)};

  for (const auto& [rel, contents] : files) {
    fs::path target = scratch.path() / rel;
    fs::create_directories(target.parent_path(), ec);
    if (ec)
      throw SandboxError("DiskFull", "cannot create '" + target.parent_path().string() + "': " + ec.message());
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.close();
    if (!out)
      throw SandboxError("DiskFull", "cannot write '" + target.string() + "'");
  }
  return scratch;
}

Scratch make_scratch(const CodeProject& project, const fs::path& root)
{
  return make_scratch(project.files, root);
}

// ---- config ----------------------------------------------------------------

std::optional<BackendKind> parse_backend(std::string_view s)
{
  if (s == "process")
    return BackendKind::Process;
  if (s == "container")
    return BackendKind::Container;
  return std::nullopt;
}

SandboxConfig SandboxConfig::from_env()
{
  SandboxConfig cfg;
  if (const char* env = std::getenv("CSC_SANDBOX_BACKEND"); env && *env) {
    auto kind = parse_backend(env);
    if (!kind)
      throw SandboxError("ConfigInvalid", "CSC_SANDBOX_BACKEND must be 'process' or 'container', got '" + std::string(env) + "'");
    cfg.backend = *kind;
  }
  if (const char* env = std::getenv("CSC_SANDBOX_IMAGE"); env && *env)
    cfg.container_image = env;
  return cfg;
}

// ---- pool ------------------------------------------------------------------

namespace {

std::unique_ptr<IsolationBackend> backend_for(const SandboxConfig& cfg)
{
  if (cfg.backend == BackendKind::Container)
    return make_container_backend(cfg.container_runtime, cfg.container_image, cfg.base_uid);
  return make_process_backend(cfg.base_uid);
}

} // namespace

Sandbox::Sandbox(SandboxConfig config)
  : Sandbox(config, backend_for(config))
{
}

Sandbox::Sandbox(SandboxConfig config, std::unique_ptr<IsolationBackend> backend)
  : config_(std::move(config))
  , backend_(std::move(backend))
  , busy_(static_cast<std::size_t>(std::max(1, config_.pool_size)), false)
{
  detail::ignore_sigpipe_once();
}

int Sandbox::acquire_slot()
{
  std::unique_lock lock(mutex_);
  for (;;) {
    for (std::size_t i = 0; i < busy_.size(); ++i) {
      if (!busy_[i]) {
        busy_[i] = true;
        return static_cast<int>(i);
      }
    }
    slot_freed_.wait(lock);
  }
}

void Sandbox::release_slot(int slot)
{
  {
    std::lock_guard lock(mutex_);
    busy_[static_cast<std::size_t>(slot)] = false;
  }
  slot_freed_.notify_one();
}

ExecutionOutcome Sandbox::execute(const ExecutionRequest& request, const ResourceLimits& limits, const fs::path& scratch)
{
  limits.validate();
  if (request.argv.empty())
    return detail::sandbox_failure("empty argv");
  if (auto why = backend_->unavailable_reason())
    return detail::sandbox_failure(*why);
  if (!fs::is_directory(scratch))
    return detail::sandbox_failure("scratch directory '" + scratch.string() + "' does not exist");

  int slot = acquire_slot();
  struct Release
  {
    Sandbox* self;
    int slot;
    ~Release() { self->release_slot(slot); }
  } release{this, slot};
  return backend_->run(request, limits, fs::absolute(scratch), slot);
}

// ---- shared helpers --------------------------------------------------------

namespace detail {

void ignore_sigpipe_once()
{
  static std::once_flag once;
  std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

void set_nonblocking(int fd)
{
  int flags = ::fcntl(fd, F_GETFL);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void chown_tree(const fs::path& dir, int uid, int gid)
{
  if (::lchown(dir.c_str(), static_cast<uid_t>(uid), static_cast<gid_t>(gid)) != 0)
    throw SandboxError("SandboxError", "chown of scratch failed: " + std::string(std::strerror(errno)));
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (::lchown(entry.path().c_str(), static_cast<uid_t>(uid), static_cast<gid_t>(gid)) != 0)
      throw SandboxError("SandboxError", "chown of scratch failed: " + std::string(std::strerror(errno)));
  }
}

ExecutionOutcome sandbox_failure(std::string reason)
{
  ExecutionOutcome out;
  out.status = ExecStatus::SandboxError;
  out.reason = std::move(reason);
  return out;
}

OutputPump::OutputPump(int stdin_fd, int stdout_fd, int stderr_fd, std::string_view input, std::size_t max_bytes)
  : stdin_fd_(stdin_fd)
  , stdout_fd_(stdout_fd)
  , stderr_fd_(stderr_fd)
  , input_(input)
  , max_bytes_(max_bytes)
{
  set_nonblocking(stdin_fd_);
  set_nonblocking(stdout_fd_);
  set_nonblocking(stderr_fd_);
  if (input_.empty()) {
    ::close(stdin_fd_);
    stdin_fd_ = -1;
  }
}

OutputPump::~OutputPump()
{
  close_all();
}

void OutputPump::close_all()
{
  for (int* fd : {&stdin_fd_, &stdout_fd_, &stderr_fd_}) {
    if (*fd >= 0) {
      ::close(*fd);
      *fd = -1;
    }
  }
}

void OutputPump::read_into(int& fd, std::string& sink, bool& truncated)
{
  char buf[65536];
  for (;;) {
    ssize_t n = ::read(fd, buf, sizeof buf);
    if (n > 0) {
      std::size_t room = max_bytes_ > sink.size() ? max_bytes_ - sink.size() : 0;
      std::size_t take = std::min(room, static_cast<std::size_t>(n));
      sink.append(buf, take);
      if (take < static_cast<std::size_t>(n))
        truncated = true;
      continue;
    }
    if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
      ::close(fd);
      fd = -1;
    }
    return;
  }
}

void OutputPump::poll_once(int timeout_ms)
{
  pollfd fds[3];
  nfds_t count = 0;
  if (stdout_fd_ >= 0)
    fds[count++] = {stdout_fd_, POLLIN, 0};
  if (stderr_fd_ >= 0)
    fds[count++] = {stderr_fd_, POLLIN, 0};
  if (stdin_fd_ >= 0)
    fds[count++] = {stdin_fd_, POLLOUT, 0};
  if (count == 0) {
    ::usleep(static_cast<useconds_t>(timeout_ms) * 1000);
    return;
  }
  int rc = ::poll(fds, count, timeout_ms);
  if (rc <= 0)
    return;
  for (nfds_t i = 0; i < count; ++i) {
    if (fds[i].revents == 0)
      continue;
    if (fds[i].fd == stdout_fd_)
      read_into(stdout_fd_, stdout_data, stdout_truncated);
    else if (fds[i].fd == stderr_fd_)
      read_into(stderr_fd_, stderr_data, stderr_truncated);
    else if (fds[i].fd == stdin_fd_) {
      if (fds[i].revents & (POLLERR | POLLHUP)) {
        ::close(stdin_fd_);
        stdin_fd_ = -1;
        continue;
      }
      ssize_t n = ::write(stdin_fd_, input_.data() + written_, input_.size() - written_);
      if (n > 0)
        written_ += static_cast<std::size_t>(n);
      if ((n < 0 && errno != EAGAIN && errno != EINTR) || written_ == input_.size()) {
        ::close(stdin_fd_);
        stdin_fd_ = -1;
      }
    }
  }
}

} // namespace detail
} // namespace csc
