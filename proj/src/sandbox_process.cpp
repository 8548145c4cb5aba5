// Process-level isolation: every run gets fresh pid, network, mount, IPC and
// UTS namespaces, an unprivileged per-slot uid, rlimits, and a seccomp filter
// that refuses non-local sockets and namespace/mount/tracing syscalls.
//
// Layout of one run:
//   parent (watchdog) --clone--> init (pid 1 of the new pid namespace, root)
//                                  --fork--> program (slot uid, limits, seccomp)
// When init exits the kernel kills everything left in the namespace, so no
// process outlives the run.

#include "csc/error.hpp"
#include "csc/sandbox.hpp"
#include "sandbox_internal.hpp"

#include <algorithm>
#include <array>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstddef>
#include <cstdio>
#include <cstring>
#include <dirent.h>
#include <fcntl.h>
#include <grp.h>
#include <linux/audit.h>
#include <linux/filter.h>
#include <linux/seccomp.h>
#include <map>
#include <sched.h>
#include <sys/mount.h>
#include <sys/prctl.h>
#include <sys/resource.h>
#include <sys/socket.h>
#include <sys/stat.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

namespace csc {
namespace {

namespace fs = std::filesystem;

#if defined(__x86_64__)
constexpr std::uint32_t kAuditArch = AUDIT_ARCH_X86_64;
#elif defined(__aarch64__)
constexpr std::uint32_t kAuditArch = AUDIT_ARCH_AARCH64;
#else
constexpr std::uint32_t kAuditArch = 0;
#endif

constexpr int kTickMs = 10;
constexpr std::size_t kChildStack = 256 * 1024;

// Status records written by init to the parent.
enum class InitReport : int { SetupFailed = 1, ProgramStatus = 2 };

struct InitMessage
{
  int kind;
  int value;
  int stage;
};

enum SetupStage : int {
  kStageMountPrivate = 1,
  kStageMountProc,
  kStageHideDir,
  kStageBindScratch,
  kStageRemountRo,
  kStageFork,
};

std::vector<sock_filter> build_seccomp_filter()
{
  std::vector<sock_filter> f;
  auto stmt = [&](std::uint16_t code, std::uint32_t k) { f.push_back(BPF_STMT(code, k)); };
  auto jump = [&](std::uint16_t code, std::uint32_t k, std::uint8_t jt, std::uint8_t jf) {
    f.push_back(BPF_JUMP(code, k, jt, jf));
  };
  const std::uint32_t deny = SECCOMP_RET_ERRNO | (EPERM & SECCOMP_RET_DATA);

  stmt(BPF_LD | BPF_W | BPF_ABS, offsetof(seccomp_data, arch));
  jump(BPF_JMP | BPF_JEQ | BPF_K, kAuditArch, 1, 0);
  stmt(BPF_RET | BPF_K, SECCOMP_RET_KILL_PROCESS);
  stmt(BPF_LD | BPF_W | BPF_ABS, offsetof(seccomp_data, nr));
#if defined(__x86_64__)
  // x32 ABI numbers alias the 64-bit table; refuse them outright.
  jump(BPF_JMP | BPF_JGE | BPF_K, 0x40000000u, 0, 1);
  stmt(BPF_RET | BPF_K, deny);
#endif
  // socket(): only AF_UNIX.
  jump(BPF_JMP | BPF_JEQ | BPF_K, SYS_socket, 0, 4);
  stmt(BPF_LD | BPF_W | BPF_ABS, offsetof(seccomp_data, args[0]));
  jump(BPF_JMP | BPF_JEQ | BPF_K, AF_UNIX, 0, 1);
  stmt(BPF_RET | BPF_K, SECCOMP_RET_ALLOW);
  stmt(BPF_RET | BPF_K, SECCOMP_RET_ERRNO | (EACCES & SECCOMP_RET_DATA));

  const long denied[] = {
    SYS_ptrace,          SYS_mount,           SYS_umount2,         SYS_pivot_root,     SYS_chroot,
    SYS_unshare,         SYS_setns,           SYS_bpf,             SYS_perf_event_open, SYS_kexec_load,
    SYS_init_module,     SYS_finit_module,    SYS_delete_module,   SYS_keyctl,         SYS_add_key,
    SYS_request_key,     SYS_swapon,          SYS_swapoff,         SYS_reboot,         SYS_process_vm_readv,
    SYS_process_vm_writev, SYS_io_uring_setup, SYS_io_uring_enter, SYS_io_uring_register, SYS_userfaultfd,
    SYS_open_by_handle_at, SYS_name_to_handle_at,
  };
  for (long nr : denied) {
    jump(BPF_JMP | BPF_JEQ | BPF_K, static_cast<std::uint32_t>(nr), 0, 1);
    stmt(BPF_RET | BPF_K, deny);
  }
  stmt(BPF_RET | BPF_K, SECCOMP_RET_ALLOW);
  return f;
}

/// A world-writable directory replaced by an empty read-only tmpfs inside the
/// sandbox. When the scratch directory lives below it, the scratch directory
/// is bound back at its original path.
struct HiddenDir
{
  std::string path;
  std::vector<std::string> chain; // directories to recreate down to scratch
  bool holds_scratch = false;
};

/// Everything the cloned child needs, prepared before clone() so the child
/// never allocates.
struct ChildPlan
{
  int stdin_fd;
  int stdout_fd;
  int stderr_fd;
  int report_fd;
  std::array<int, 4> keep_fds; // sorted
  std::string scratch;
  std::vector<HiddenDir> hidden;
  std::vector<const char*> hidden_paths;
  std::vector<std::vector<const char*>> hidden_chains;

  std::string program;
  std::vector<std::string> argv_storage;
  std::vector<std::string> env_storage;
  std::vector<char*> argv;
  std::vector<char*> envp;

  rlim_t cpu_soft;
  rlim_t cpu_hard;
  rlim_t address_space; // 0 = unlimited
  rlim_t nproc;
  uid_t uid;
  gid_t gid;
  sock_fprog seccomp;
  std::vector<sock_filter> filter;
};

void write_all(int fd, const void* data, std::size_t size)
{
  const char* p = static_cast<const char*>(data);
  while (size > 0) {
    ssize_t n = ::write(fd, p, size);
    if (n <= 0) {
      if (n < 0 && errno == EINTR)
        continue;
      return;
    }
    p += n;
    size -= static_cast<std::size_t>(n);
  }
}

void write_str(int fd, const char* s)
{
  write_all(fd, s, std::strlen(s));
}

void write_int(int fd, int v)
{
  char buf[16];
  int i = 15;
  buf[i] = '\0';
  bool neg = v < 0;
  unsigned u = neg ? static_cast<unsigned>(-v) : static_cast<unsigned>(v);
  do {
    buf[--i] = static_cast<char>('0' + u % 10);
    u /= 10;
  } while (u && i > 1);
  if (neg)
    buf[--i] = '-';
  write_str(fd, buf + i);
}

[[noreturn]] void init_fail(const ChildPlan& plan, int stage)
{
  InitMessage msg{static_cast<int>(InitReport::SetupFailed), errno, stage};
  write_all(plan.report_fd, &msg, sizeof msg);
  ::_exit(125);
}

[[noreturn]] void program_fail(const char* what)
{
  int err = errno;
  write_str(2, "csc-sandbox: ");
  write_str(2, what);
  write_str(2, " failed: errno ");
  write_int(2, err);
  write_str(2, "\n");
  ::_exit(127);
}

void close_from(int lowest)
{
  ::syscall(SYS_close_range, lowest, ~0u, 0);
}

[[noreturn]] void run_program(const ChildPlan& plan)
{
  ::dup2(plan.stdin_fd, 0);
  ::dup2(plan.stdout_fd, 1);
  ::dup2(plan.stderr_fd, 2);
  close_from(3);

  rlimit cpu{plan.cpu_soft, plan.cpu_hard};
  rlimit nproc{plan.nproc, plan.nproc};
  rlimit fsize{kMaxFileBytes, kMaxFileBytes};
  rlimit core{0, 0};
  rlimit nofile{256, 256};
  if (::setrlimit(RLIMIT_CPU, &cpu) != 0 || ::setrlimit(RLIMIT_NPROC, &nproc) != 0 ||
      ::setrlimit(RLIMIT_FSIZE, &fsize) != 0 || ::setrlimit(RLIMIT_CORE, &core) != 0 ||
      ::setrlimit(RLIMIT_NOFILE, &nofile) != 0)
    program_fail("setrlimit");
  if (plan.address_space != 0) {
    rlimit as{plan.address_space, plan.address_space};
    if (::setrlimit(RLIMIT_AS, &as) != 0)
      program_fail("setrlimit(AS)");
  }

  if (::setgroups(0, nullptr) != 0)
    program_fail("setgroups");
  if (::setresgid(plan.gid, plan.gid, plan.gid) != 0)
    program_fail("setresgid");
  if (::setresuid(plan.uid, plan.uid, plan.uid) != 0)
    program_fail("setresuid");
  if (::chdir(plan.scratch.c_str()) != 0)
    program_fail("chdir");
  if (::prctl(PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0) != 0)
    program_fail("no_new_privs");
  if (::prctl(PR_SET_SECCOMP, SECCOMP_MODE_FILTER, &plan.seccomp) != 0)
    program_fail("seccomp");

  ::execve(plan.program.c_str(), plan.argv.data(), plan.envp.data());
  program_fail("exec");
}

// Drops descriptors inherited from the (multithreaded) parent, such as pipes
// of concurrent runs, which would otherwise delay their EOF.
void close_all_but(const std::array<int, 4>& keep)
{
  int next = 3;
  for (int fd : keep) {
    if (fd < next)
      continue;
    if (fd > next)
      ::syscall(SYS_close_range, next, fd - 1, 0);
    next = fd + 1;
  }
  ::syscall(SYS_close_range, next, ~0u, 0);
}

int init_main(void* arg)
{
  const ChildPlan& plan = *static_cast<const ChildPlan*>(arg);
  ::prctl(PR_SET_PDEATHSIG, SIGKILL, 0, 0, 0);
  close_all_but(plan.keep_fds);

  if (::mount(nullptr, "/", nullptr, MS_REC | MS_PRIVATE, nullptr) != 0)
    init_fail(plan, kStageMountPrivate);
  if (::mount("proc", "/proc", "proc", MS_NOSUID | MS_NODEV | MS_NOEXEC, nullptr) != 0)
    init_fail(plan, kStageMountProc);

  // A bind source must belong to this mount namespace, so the scratch is
  // reopened here rather than reusing the parent's descriptor.
  int local_scratch = ::open(plan.scratch.c_str(), O_PATH | O_DIRECTORY | O_CLOEXEC);
  if (local_scratch < 0)
    init_fail(plan, kStageBindScratch);
  char local_scratch_path[40];
  std::snprintf(local_scratch_path, sizeof local_scratch_path, "/proc/self/fd/%d", local_scratch);

  for (std::size_t i = 0; i < plan.hidden.size(); ++i) {
    const char* dir = plan.hidden_paths[i];
    if (::mount("tmpfs", dir, "tmpfs", MS_NOSUID | MS_NODEV, "size=64k,mode=755") != 0)
      init_fail(plan, kStageHideDir);
    if (plan.hidden[i].holds_scratch) {
      for (const char* sub : plan.hidden_chains[i]) {
        if (::mkdir(sub, 0755) != 0 && errno != EEXIST)
          init_fail(plan, kStageBindScratch);
      }
      if (::mount(local_scratch_path, plan.scratch.c_str(), nullptr, MS_BIND, nullptr) != 0)
        init_fail(plan, kStageBindScratch);
    }
    if (::mount(nullptr, dir, nullptr, MS_REMOUNT | MS_RDONLY | MS_NOSUID | MS_NODEV, nullptr) != 0)
      init_fail(plan, kStageRemountRo);
  }
  if (::sethostname("csc-sandbox", 11) != 0)
    init_fail(plan, kStageMountPrivate);

  pid_t program = ::fork();
  if (program < 0)
    init_fail(plan, kStageFork);
  if (program == 0)
    run_program(plan);

  ::close(plan.stdin_fd);
  ::close(plan.stdout_fd);
  ::close(plan.stderr_fd);
  ::close(local_scratch);

  // Reap everything; report the program's status once it exits. Returning
  // tears down the namespace and kills stragglers.
  for (;;) {
    int status = 0;
    pid_t w = ::waitpid(-1, &status, 0);
    if (w == program) {
      InitMessage msg{static_cast<int>(InitReport::ProgramStatus), status, 0};
      write_all(plan.report_fd, &msg, sizeof msg);
      return 0;
    }
    if (w < 0 && errno != EINTR)
      return 0;
  }
}

std::string resolve_program(const std::string& argv0, const fs::path& scratch)
{
  if (argv0.find('/') != std::string::npos) {
    fs::path p(argv0);
    return p.is_absolute() ? argv0 : (scratch / p).lexically_normal().string();
  }
  for (const char* dir : {"/usr/local/bin", "/usr/bin", "/bin"}) {
    fs::path candidate = fs::path(dir) / argv0;
    if (::access(candidate.c_str(), X_OK) == 0)
      return candidate.string();
  }
  return argv0; // exec fails inside the sandbox with exit 127
}

std::vector<HiddenDir> plan_hidden_dirs(const fs::path& scratch)
{
  std::vector<HiddenDir> out;
  for (const char* candidate : {"/tmp", "/var/tmp", "/dev/shm"}) {
    struct stat st{};
    if (::lstat(candidate, &st) != 0 || !S_ISDIR(st.st_mode) || !(st.st_mode & S_IWOTH))
      continue;
    HiddenDir h;
    h.path = candidate;
    fs::path base(candidate);
    auto rel = scratch.lexically_relative(base);
    if (!rel.empty() && *rel.begin() != "..") {
      h.holds_scratch = true;
      fs::path cur = base;
      for (const auto& part : rel) {
        cur /= part;
        h.chain.push_back(cur.string());
      }
    }
    out.push_back(std::move(h));
  }
  return out;
}

struct ProcSample
{
  std::uint64_t rss_bytes = 0;
  double cpu_seconds = 0.0;
  int processes = 0;
};

/// Sums RSS and CPU over every process in the sandbox pid namespace.
class NamespaceWatch
{
public:
  NamespaceWatch(pid_t init_pid)
    : init_pid_(init_pid)
    , page_size_(static_cast<std::uint64_t>(::sysconf(_SC_PAGESIZE)))
    , ticks_(static_cast<double>(::sysconf(_SC_CLK_TCK)))
  {
    struct stat st{};
    std::string path = "/proc/" + std::to_string(init_pid) + "/ns/pid";
    if (::stat(path.c_str(), &st) == 0) {
      ns_inode_ = st.st_ino;
      ns_dev_ = st.st_dev;
      valid_ = true;
    }
  }

  ProcSample sample()
  {
    ProcSample s;
    if (!valid_)
      return s;
    DIR* dir = ::opendir("/proc");
    if (!dir)
      return s;
    while (dirent* e = ::readdir(dir)) {
      if (e->d_name[0] < '0' || e->d_name[0] > '9')
        continue;
      pid_t pid = static_cast<pid_t>(std::atol(e->d_name));
      std::string base = std::string("/proc/") + e->d_name;
      struct stat st{};
      if (::stat((base + "/ns/pid").c_str(), &st) != 0 || st.st_ino != ns_inode_ || st.st_dev != ns_dev_)
        continue;
      if (pid != init_pid_)
        ++s.processes;
      s.rss_bytes += read_rss(base);
      double cpu = read_cpu(base);
      if (cpu >= 0)
        cpu_by_pid_[pid] = std::max(cpu_by_pid_[pid], cpu);
    }
    ::closedir(dir);
    for (const auto& [_, cpu] : cpu_by_pid_)
      s.cpu_seconds += cpu;
    return s;
  }

private:
  std::uint64_t read_rss(const std::string& base) const
  {
    int fd = ::open((base + "/statm").c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0)
      return 0;
    char buf[128];
    ssize_t n = ::read(fd, buf, sizeof buf - 1);
    ::close(fd);
    if (n <= 0)
      return 0;
    buf[n] = '\0';
    unsigned long long size = 0, resident = 0;
    if (std::sscanf(buf, "%llu %llu", &size, &resident) != 2)
      return 0;
    return resident * page_size_;
  }

  double read_cpu(const std::string& base) const
  {
    int fd = ::open((base + "/stat").c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0)
      return -1;
    char buf[1024];
    ssize_t n = ::read(fd, buf, sizeof buf - 1);
    ::close(fd);
    if (n <= 0)
      return -1;
    buf[n] = '\0';
    // Fields after the parenthesized command name; utime/stime are 14/15.
    const char* p = std::strrchr(buf, ')');
    if (!p)
      return -1;
    unsigned long long utime = 0, stime = 0;
    if (std::sscanf(p + 2, "%*c %*d %*d %*d %*d %*d %*u %*u %*u %*u %*u %llu %llu", &utime, &stime) != 2)
      return -1;
    return static_cast<double>(utime + stime) / ticks_;
  }

  pid_t init_pid_;
  std::uint64_t page_size_;
  double ticks_;
  ino_t ns_inode_ = 0;
  dev_t ns_dev_ = 0;
  bool valid_ = false;
  std::map<pid_t, double> cpu_by_pid_;
};

double timeval_seconds(const timeval& tv)
{
  return static_cast<double>(tv.tv_sec) + static_cast<double>(tv.tv_usec) / 1e6;
}

class ProcessBackend final : public IsolationBackend
{
public:
  explicit ProcessBackend(int base_uid)
    : base_uid_(base_uid)
  {
  }

  std::string_view name() const override { return "process"; }

  std::optional<std::string> unavailable_reason() const override
  {
    if (kAuditArch == 0)
      return "process backend: seccomp filter not available for this architecture";
    if (::geteuid() != 0)
      return "process backend requires root to create namespaces and switch to slot users; "
             "configure CSC_SANDBOX_BACKEND=container";
    return std::nullopt;
  }

  ExecutionOutcome run(const ExecutionRequest& request, const ResourceLimits& limits, const fs::path& scratch,
                       int slot) override;

private:
  int base_uid_;
};

struct Pipe
{
  int fds[2] = {-1, -1};
  bool open() { return ::pipe2(fds, O_CLOEXEC) == 0; }
  void close_end(int i)
  {
    if (fds[i] >= 0) {
      ::close(fds[i]);
      fds[i] = -1;
    }
  }
  ~Pipe()
  {
    close_end(0);
    close_end(1);
  }
};

ExecutionOutcome ProcessBackend::run(const ExecutionRequest& request, const ResourceLimits& limits,
                                     const fs::path& scratch_in, int slot)
{
  const fs::path scratch = fs::weakly_canonical(scratch_in);
  const int uid = base_uid_ + slot;
  try {
    detail::chown_tree(scratch, uid, uid);
  }
  catch (const SandboxError& e) {
    return detail::sandbox_failure(e.what());
  }

  Pipe in, out, err, report;
  if (!in.open() || !out.open() || !err.open() || !report.open())
    return detail::sandbox_failure("pipe: " + std::string(std::strerror(errno)));

  ChildPlan plan;
  plan.stdin_fd = in.fds[0];
  plan.stdout_fd = out.fds[1];
  plan.stderr_fd = err.fds[1];
  plan.report_fd = report.fds[1];
  plan.keep_fds = {plan.stdin_fd, plan.stdout_fd, plan.stderr_fd, plan.report_fd};
  std::sort(plan.keep_fds.begin(), plan.keep_fds.end());
  plan.scratch = scratch.string();
  plan.hidden = plan_hidden_dirs(scratch);
  for (const auto& h : plan.hidden) {
    plan.hidden_paths.push_back(h.path.c_str());
    std::vector<const char*> chain;
    for (const auto& c : h.chain)
      chain.push_back(c.c_str());
    plan.hidden_chains.push_back(std::move(chain));
  }

  plan.program = resolve_program(request.argv.front(), scratch);
  plan.argv_storage = request.argv;
  for (auto& a : plan.argv_storage)
    plan.argv.push_back(a.data());
  plan.argv.push_back(nullptr);
  plan.env_storage = {"PATH=/usr/local/bin:/usr/bin:/bin", "HOME=" + plan.scratch, "TMPDIR=" + plan.scratch, "LANG=C",
                      "LC_ALL=C"};
  for (const auto& [k, v] : request.env)
    plan.env_storage.push_back(k + "=" + v);
  for (auto& e : plan.env_storage)
    plan.envp.push_back(e.data());
  plan.envp.push_back(nullptr);

  auto cpu_whole = static_cast<rlim_t>(std::ceil(limits.cpu_seconds));
  plan.cpu_soft = cpu_whole;
  plan.cpu_hard = cpu_whole + 1;
  plan.address_space = request.limit_address_space ? static_cast<rlim_t>(4 * limits.memory_bytes + (256ull << 20)) : 0;
  plan.nproc = static_cast<rlim_t>(limits.max_processes);
  plan.uid = static_cast<uid_t>(uid);
  plan.gid = static_cast<gid_t>(uid);
  plan.filter = build_seccomp_filter();
  plan.seccomp.len = static_cast<unsigned short>(plan.filter.size());
  plan.seccomp.filter = plan.filter.data();

  std::vector<char> stack(kChildStack);
  const auto start = std::chrono::steady_clock::now();
  pid_t init_pid = ::clone(init_main, stack.data() + stack.size(),
                           CLONE_NEWPID | CLONE_NEWNET | CLONE_NEWNS | CLONE_NEWIPC | CLONE_NEWUTS | SIGCHLD, &plan);
  if (init_pid < 0)
    return detail::sandbox_failure("clone: " + std::string(std::strerror(errno)));

  in.close_end(0);
  out.close_end(1);
  err.close_end(1);
  report.close_end(1);

  NamespaceWatch watch(init_pid);
  detail::OutputPump pump(std::exchange(in.fds[1], -1), std::exchange(out.fds[0], -1), std::exchange(err.fds[0], -1),
                          request.stdin_data, limits.max_output_bytes);

  std::optional<ExecStatus> kill_reason;
  std::string kill_detail;
  ProcSample peak;
  double watched_cpu = 0.0;
  bool init_reaped = false;
  int init_status = 0;
  rusage usage{};
  std::optional<std::chrono::steady_clock::time_point> reaped_at;

  auto kill_all = [&](ExecStatus why, std::string detail_text) {
    if (!kill_reason) {
      kill_reason = why;
      kill_detail = std::move(detail_text);
    }
    ::kill(init_pid, SIGKILL);
  };

  auto next_sample = start;
  while (!(init_reaped && pump.outputs_closed())) {
    pump.poll_once(kTickMs);

    if (!init_reaped) {
      pid_t w = ::wait4(init_pid, &init_status, WNOHANG, &usage);
      if (w == init_pid) {
        init_reaped = true;
        reaped_at = std::chrono::steady_clock::now();
      }
    }
    else if (detail::seconds_since(*reaped_at) > 2.0) {
      break; // descriptors leaked to something outside the namespace
    }

    if (!init_reaped && !kill_reason && std::chrono::steady_clock::now() >= next_sample) {
      next_sample = std::chrono::steady_clock::now() + std::chrono::milliseconds(kTickMs);
      ProcSample s = watch.sample();
      peak.rss_bytes = std::max(peak.rss_bytes, s.rss_bytes);
      peak.processes = std::max(peak.processes, s.processes);
      watched_cpu = std::max(watched_cpu, s.cpu_seconds);
      if (s.rss_bytes > limits.memory_bytes)
        kill_all(ExecStatus::MemoryKill, "resident memory exceeded " + std::to_string(limits.memory_bytes) + " bytes");
      else if (watched_cpu > limits.cpu_seconds + kCpuSlackSeconds)
        kill_all(ExecStatus::CpuTimeout, "cpu time exceeded");
      else if (detail::seconds_since(start) > limits.wall_seconds)
        kill_all(ExecStatus::WallTimeout, "wall time exceeded");
    }
  }
  if (!init_reaped) {
    ::kill(init_pid, SIGKILL);
    ::wait4(init_pid, &init_status, 0, &usage);
  }
  pump.close_all();

  ExecutionOutcome outcome;
  outcome.wall_used = detail::seconds_since(start);
  outcome.stdout_data = std::move(pump.stdout_data);
  outcome.stderr_data = std::move(pump.stderr_data);
  outcome.stdout_truncated = pump.stdout_truncated;
  outcome.stderr_truncated = pump.stderr_truncated;
  outcome.cpu_used = std::max(timeval_seconds(usage.ru_utime) + timeval_seconds(usage.ru_stime), watched_cpu);
  outcome.mem_peak = std::max(peak.rss_bytes, static_cast<std::uint64_t>(usage.ru_maxrss) * 1024u);
  outcome.peak_processes = peak.processes;

  std::optional<InitMessage> message;
  {
    InitMessage msg{};
    detail::set_nonblocking(report.fds[0]);
    if (::read(report.fds[0], &msg, sizeof msg) == static_cast<ssize_t>(sizeof msg))
      message = msg;
  }
  if (message && message->kind == static_cast<int>(InitReport::SetupFailed)) {
    return detail::sandbox_failure("isolation setup failed at stage " + std::to_string(message->stage) + ": " +
                                   std::strerror(message->value));
  }

  if (kill_reason) {
    outcome.status = *kill_reason;
    outcome.reason = kill_detail;
    outcome.exit_code = 128 + SIGKILL;
    outcome.term_signal = SIGKILL;
    return outcome;
  }
  if (!message) {
    return detail::sandbox_failure("sandbox init ended without reporting program status");
  }

  int status = message->value;
  if (WIFSIGNALED(status)) {
    int sig = WTERMSIG(status);
    outcome.term_signal = sig;
    outcome.exit_code = 128 + sig;
    if (sig == SIGXCPU || (sig == SIGKILL && outcome.cpu_used + kCpuSlackSeconds >= limits.cpu_seconds)) {
      outcome.status = ExecStatus::CpuTimeout;
      outcome.reason = "cpu time exceeded";
      return outcome;
    }
  }
  else {
    outcome.exit_code = WEXITSTATUS(status);
  }
  outcome.status = (outcome.stdout_truncated || outcome.stderr_truncated) ? ExecStatus::OutputTruncatedExit
                                                                          : ExecStatus::Exited;
  return outcome;
}

} // namespace

std::unique_ptr<IsolationBackend> make_process_backend(int base_uid)
{
  return std::make_unique<ProcessBackend>(base_uid);
}

} // namespace csc
