#pragma once

#include "csc/challenge.hpp"

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace csc {

/// Hard limits for one execution. Network access is always denied and the
/// scratch directory is the only writable location; neither is configurable.
struct ResourceLimits
{
  double cpu_seconds = 5.0;
  double wall_seconds = 20.0;
  std::uint64_t memory_bytes = 256ull << 20;
  int max_processes = 16;
  std::size_t max_output_bytes = 1u << 20;

  /// Throws SandboxError("InvalidLimits").
  void validate() const;
};

/// CPU time may overshoot `cpu_seconds` by at most this much before the
/// watchdog or RLIMIT_CPU stops the program.
inline constexpr double kCpuSlackSeconds = 0.25;

/// Largest file a sandboxed program may create.
inline constexpr std::uint64_t kMaxFileBytes = 64ull << 20;

enum class ExecStatus { Exited, CpuTimeout, WallTimeout, MemoryKill, OutputTruncatedExit, SandboxError };

std::string_view to_string(ExecStatus);

struct ExecutionOutcome
{
  ExecStatus status = ExecStatus::SandboxError;
  /// Exit code for Exited/OutputTruncatedExit; 128+signal when the program
  /// died from a signal.
  int exit_code = -1;
  int term_signal = 0;
  std::string stdout_data;
  std::string stderr_data;
  bool stdout_truncated = false;
  bool stderr_truncated = false;
  double cpu_used = 0.0;
  std::uint64_t mem_peak = 0;
  int peak_processes = 0;
  double wall_used = 0.0;
  std::string reason; // SandboxError detail or kill reason

  bool exited_cleanly() const { return status == ExecStatus::Exited && exit_code == 0; }
};

struct ExecutionRequest
{
  /// argv[0] containing '/' is resolved relative to the scratch directory;
  /// otherwise it is looked up in /usr/local/bin:/usr/bin:/bin.
  std::vector<std::string> argv;
  std::string stdin_data;
  std::vector<std::pair<std::string, std::string>> env;
  /// Sanitizer-instrumented binaries reserve huge virtual ranges; they run
  /// with only the RSS watchdog.
  bool limit_address_space = true;
};

/// Owns a scratch directory; removes it on destruction.
class Scratch
{
public:
  Scratch() = default;
  explicit Scratch(std::filesystem::path dir);
  Scratch(Scratch&& other) noexcept;
  Scratch& operator=(Scratch&& other) noexcept;
  Scratch(const Scratch&) = delete;
  Scratch& operator=(const Scratch&) = delete;
  ~Scratch();

  const std::filesystem::path& path() const { return dir_; }
  void dispose();

private:
  std::filesystem::path dir_;
};

std::filesystem::path default_scratch_root();

/// Materializes files into a fresh directory below `root`. Throws
/// SandboxError("EmptyProject"), BundleError("PathTraversal") or
/// SandboxError("DiskFull").
Scratch make_scratch(const std::map<std::string, std::string>& files,
                     const std::filesystem::path& root = default_scratch_root());
Scratch make_scratch(const CodeProject& project, const std::filesystem::path& root = default_scratch_root());

enum class BackendKind { Process, Container };

struct SandboxConfig
{
  BackendKind backend = BackendKind::Process;
  int pool_size = 4;
  /// Slot i runs as uid/gid base_uid + i.
  int base_uid = 61000;
  std::string container_runtime = "docker";
  std::string container_image = "csc-sandbox:latest";

  /// Reads CSC_SANDBOX_BACKEND (process|container) and CSC_SANDBOX_IMAGE.
  static SandboxConfig from_env();
};

std::optional<BackendKind> parse_backend(std::string_view);

class IsolationBackend
{
public:
  virtual ~IsolationBackend() = default;
  virtual std::string_view name() const = 0;
  /// Why the backend cannot isolate on this host, or nullopt when usable.
  virtual std::optional<std::string> unavailable_reason() const = 0;
  virtual ExecutionOutcome run(const ExecutionRequest& request, const ResourceLimits& limits,
                               const std::filesystem::path& scratch, int slot) = 0;
};

std::unique_ptr<IsolationBackend> make_process_backend(int base_uid);
std::unique_ptr<IsolationBackend> make_container_backend(std::string runtime, std::string image, int base_uid);

/// Bounded pool of isolated executions. Thread-safe; `execute` blocks while
/// all slots are busy.
class Sandbox
{
public:
  explicit Sandbox(SandboxConfig config = SandboxConfig::from_env());
  Sandbox(SandboxConfig config, std::unique_ptr<IsolationBackend> backend);

  /// Never runs the program unisolated: an unusable backend yields a
  /// SandboxError outcome.
  ExecutionOutcome execute(const ExecutionRequest& request, const ResourceLimits& limits,
                           const std::filesystem::path& scratch);

  std::optional<std::string> unavailable_reason() const { return backend_->unavailable_reason(); }
  std::string_view backend_name() const { return backend_->name(); }
  const SandboxConfig& config() const { return config_; }

private:
  int acquire_slot();
  void release_slot(int slot);

  SandboxConfig config_;
  std::unique_ptr<IsolationBackend> backend_;
  std::mutex mutex_;
  std::condition_variable slot_freed_;
  std::vector<bool> busy_;
};

} // namespace csc
