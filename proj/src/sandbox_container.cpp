// Container isolation: delegates limits to an OCI runtime CLI (docker or
// podman). The scratch directory is mounted at /work; everything else in the
// image is read-only and the network is disabled.

#include "csc/error.hpp"
#include "csc/sandbox.hpp"
#include "sandbox_internal.hpp"

#include <cerrno>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

namespace csc {
namespace {

namespace fs = std::filesystem;

std::optional<std::string> find_on_path(const std::string& name)
{
  const char* path = std::getenv("PATH");
  std::string dirs = path ? path : "/usr/local/bin:/usr/bin:/bin";
  std::size_t start = 0;
  while (start <= dirs.size()) {
    std::size_t end = dirs.find(':', start);
    if (end == std::string::npos)
      end = dirs.size();
    fs::path candidate = fs::path(dirs.substr(start, end - start)) / name;
    if (::access(candidate.c_str(), X_OK) == 0)
      return candidate.string();
    start = end + 1;
  }
  return std::nullopt;
}

class ContainerBackend final : public IsolationBackend
{
public:
  ContainerBackend(std::string runtime, std::string image, int base_uid)
    : runtime_(std::move(runtime))
    , image_(std::move(image))
    , base_uid_(base_uid)
  {
  }

  std::string_view name() const override { return "container"; }

  std::optional<std::string> unavailable_reason() const override
  {
    if (!find_on_path(runtime_))
      return "container backend: runtime '" + runtime_ + "' not found on PATH";
    return std::nullopt;
  }

  std::vector<std::string> command_line(const ExecutionRequest& request, const ResourceLimits& limits,
                                        const fs::path& scratch, int slot) const
  {
    const auto cpu = static_cast<long>(std::ceil(limits.cpu_seconds));
    std::vector<std::string> argv = {
      runtime_, "run", "--rm", "-i",
      "--network", "none",
      "--read-only",
      "--tmpfs", "/tmp:rw,noexec,size=16m",
      "--cap-drop", "ALL",
      "--security-opt", "no-new-privileges",
      "--memory", std::to_string(limits.memory_bytes),
      "--memory-swap", std::to_string(limits.memory_bytes),
      "--pids-limit", std::to_string(limits.max_processes),
      "--ulimit", "cpu=" + std::to_string(cpu) + ":" + std::to_string(cpu + 1),
      "--ulimit", "fsize=" + std::to_string(kMaxFileBytes),
      "--user", std::to_string(base_uid_ + slot),
      "-v", scratch.string() + ":/work:rw",
      "-w", "/work",
    };
    for (const auto& [k, v] : request.env) {
      argv.push_back("-e");
      argv.push_back(k + "=" + v);
    }
    argv.push_back(image_);
    for (std::size_t i = 0; i < request.argv.size(); ++i) {
      const std::string& a = request.argv[i];
      if (i == 0 && a.find('/') != std::string::npos && a.front() != '/')
        argv.push_back((fs::path("/work") / a).lexically_normal().string());
      else
        argv.push_back(a);
    }
    return argv;
  }

  ExecutionOutcome run(const ExecutionRequest& request, const ResourceLimits& limits, const fs::path& scratch,
                       int slot) override
  {
    std::vector<std::string> args = command_line(request, limits, scratch, slot);
    std::vector<char*> argv;
    for (auto& a : args)
      argv.push_back(a.data());
    argv.push_back(nullptr);
    std::string runtime_path = *find_on_path(runtime_);

    int in[2], out[2], err[2];
    if (::pipe2(in, O_CLOEXEC) != 0 || ::pipe2(out, O_CLOEXEC) != 0 || ::pipe2(err, O_CLOEXEC) != 0)
      return detail::sandbox_failure("pipe: " + std::string(std::strerror(errno)));

    const auto start = std::chrono::steady_clock::now();
    pid_t pid = ::fork();
    if (pid < 0)
      return detail::sandbox_failure("fork: " + std::string(std::strerror(errno)));
    if (pid == 0) {
      ::dup2(in[0], 0);
      ::dup2(out[1], 1);
      ::dup2(err[1], 2);
      ::setpgid(0, 0);
      ::execv(runtime_path.c_str(), argv.data());
      ::_exit(127);
    }
    ::close(in[0]);
    ::close(out[1]);
    ::close(err[1]);

    detail::OutputPump pump(in[1], out[0], err[0], request.stdin_data, limits.max_output_bytes);
    bool reaped = false;
    bool wall_killed = false;
    int status = 0;
    rusage usage{};
    while (!(reaped && pump.outputs_closed())) {
      pump.poll_once(10);
      if (!reaped && ::wait4(pid, &status, WNOHANG, &usage) == pid)
        reaped = true;
      if (!reaped && !wall_killed && detail::seconds_since(start) > limits.wall_seconds) {
        wall_killed = true;
        ::kill(-pid, SIGKILL);
      }
    }

    ExecutionOutcome o;
    o.wall_used = detail::seconds_since(start);
    o.stdout_data = std::move(pump.stdout_data);
    o.stderr_data = std::move(pump.stderr_data);
    o.stdout_truncated = pump.stdout_truncated;
    o.stderr_truncated = pump.stderr_truncated;
    if (wall_killed) {
      o.status = ExecStatus::WallTimeout;
      o.exit_code = 128 + SIGKILL;
      o.term_signal = SIGKILL;
      return o;
    }
    o.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    // The runtime reports container deaths as 128+signal exit codes; 125 means
    // the runtime itself failed.
    if (o.exit_code == 125)
      return detail::sandbox_failure("container runtime failed: " + o.stderr_data);
    if (o.exit_code == 128 + SIGXCPU)
      o.status = ExecStatus::CpuTimeout;
    else if (o.exit_code == 128 + SIGKILL)
      o.status = ExecStatus::MemoryKill;
    else
      o.status = (o.stdout_truncated || o.stderr_truncated) ? ExecStatus::OutputTruncatedExit : ExecStatus::Exited;
    if (o.exit_code > 128)
      o.term_signal = o.exit_code - 128;
    return o;
  }

private:
  std::string runtime_;
  std::string image_;
  int base_uid_;
};

} // namespace

std::unique_ptr<IsolationBackend> make_container_backend(std::string runtime, std::string image, int base_uid)
{
  return std::make_unique<ContainerBackend>(std::move(runtime), std::move(image), base_uid);
}

} // namespace csc
