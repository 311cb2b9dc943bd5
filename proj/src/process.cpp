#include "ctune/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sched.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>

#include "ctune/error.hpp"

namespace ctune {

namespace {

double timeval_seconds(const timeval& tv) {
  return static_cast<double>(tv.tv_sec) + static_cast<double>(tv.tv_usec) * 1e-6;
}

}  // namespace

ExecResult run_command(const std::string& command, const std::string& workdir,
                       const std::vector<std::pair<std::string, std::string>>& extra_env,
                       double timeout_seconds, int cpu) {
  int pipefd[2];
  if (::pipe(pipefd) != 0) raise(errc::run_failed, "pipe: " + std::string(std::strerror(errno)));

  const auto start = std::chrono::steady_clock::now();
  pid_t pid = ::fork();
  if (pid < 0) {
    ::close(pipefd[0]);
    ::close(pipefd[1]);
    raise(errc::run_failed, "fork: " + std::string(std::strerror(errno)));
  }

  if (pid == 0) {
    ::setpgid(0, 0);
    if (!workdir.empty() && ::chdir(workdir.c_str()) != 0) _exit(126);
    if (cpu >= 0) {
      cpu_set_t mask;
      CPU_ZERO(&mask);
      CPU_SET(static_cast<unsigned>(cpu), &mask);
      sched_setaffinity(0, sizeof(mask), &mask);  // best-effort
    }
    for (const auto& [key, value] : extra_env) ::setenv(key.c_str(), value.c_str(), 1);
    ::close(pipefd[0]);
    ::dup2(pipefd[1], STDOUT_FILENO);
    ::dup2(pipefd[1], STDERR_FILENO);
    ::close(pipefd[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }

  ::setpgid(pid, pid);  // also from the parent to close the race
  ::close(pipefd[1]);

  ExecResult result;
  const auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                    std::chrono::duration<double>(timeout_seconds));
  char buf[4096];
  bool open = true;
  while (open) {
    auto now = std::chrono::steady_clock::now();
    if (timeout_seconds > 0 && now >= deadline) {
      result.timed_out = true;
      ::kill(-pid, SIGKILL);
      break;
    }
    int wait_ms = 200;
    if (timeout_seconds > 0) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
      wait_ms = static_cast<int>(std::min<long long>(wait_ms, std::max<long long>(left, 1)));
    }
    pollfd pfd{pipefd[0], POLLIN, 0};
    int ready = ::poll(&pfd, 1, wait_ms);
    if (ready > 0) {
      ssize_t n = ::read(pipefd[0], buf, sizeof(buf));
      if (n > 0) {
        result.output.append(buf, static_cast<size_t>(n));
      } else {
        open = false;  // EOF: child side closed
      }
    }
  }
  // drain whatever remains after a kill
  for (;;) {
    ssize_t n = ::read(pipefd[0], buf, sizeof(buf));
    if (n <= 0) break;
    result.output.append(buf, static_cast<size_t>(n));
  }
  ::close(pipefd[0]);

  int status = 0;
  rusage usage{};
  while (::wait4(pid, &status, 0, &usage) < 0 && errno == EINTR) {
  }
  // reap any group stragglers created by the shell
  while (::waitpid(-pid, nullptr, WNOHANG) > 0) {
  }

  result.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.user = timeval_seconds(usage.ru_utime);
  result.sys = timeval_seconds(usage.ru_stime);
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.signaled = true;
    result.exit_code = 128 + WTERMSIG(status);
  }
  return result;
}

}  // namespace ctune
