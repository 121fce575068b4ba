#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "vpbo/errors.hpp"
#include "vpbo/space.hpp"

namespace vpbo {

/// Encodes one request line: {"h":[...],"x":[...]} followed by '\n'.
inline std::string encode_request(const MixedPoint& z) {
  nlohmann::json j;
  j["h"] = z.h;
  j["x"] = std::vector<double>(z.x.data(), z.x.data() + z.x.size());
  return j.dump() + "\n";
}

/// Decodes one response line ({"y":number} or {"error":text}). Throws
/// ProtocolError on anything else and EvaluationError for reported errors.
inline double decode_response(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError("malformed response line '" + line + "': " + e.what());
  }
  if (!j.is_object()) throw ProtocolError("response is not a JSON object: '" + line + "'");
  if (j.contains("error")) {
    const auto& e = j["error"];
    throw EvaluationError("objective reported an error: " + (e.is_string() ? e.get<std::string>() : e.dump()));
  }
  if (!j.contains("y") || !j["y"].is_number()) throw ProtocolError("response lacks a numeric 'y': '" + line + "'");
  return j["y"].get<double>();
}

/// Handle on one external objective process. The child is spawned lazily on
/// the first evaluation and kept alive between requests; only one request is
/// ever in flight. After a timeout or a crash the child is reaped and the next
/// evaluation starts a fresh one. Not thread-safe: one handle per caller.
///
/// Writing to a dead child must not kill the caller, so SIGPIPE is ignored
/// process-wide the first time a handle is created.
class ExternalObjective {
public:
  ExternalObjective(std::vector<std::string> argv, double timeout_s = 600.0)
      : argv_(std::move(argv)), timeout_s_(timeout_s) {
    if (argv_.empty()) throw ConfigError("external objective needs a command");
    static std::once_flag once;
    std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
  }

  ExternalObjective(const ExternalObjective&) = delete;
  ExternalObjective& operator=(const ExternalObjective&) = delete;
  ExternalObjective(ExternalObjective&& o) noexcept { steal(o); }
  ExternalObjective& operator=(ExternalObjective&& o) noexcept {
    if (this != &o) {
      shutdown();
      steal(o);
    }
    return *this;
  }
  ~ExternalObjective() { shutdown(); }

  bool running() const { return pid_ > 0; }
  pid_t pid() const { return pid_; }

  double evaluate(const MixedPoint& z) {
    if (!running()) spawn();
    const std::string req = encode_request(z);
    write_all(req);
    const std::string line = read_line();
    return decode_response(line);
  }

  double operator()(const MixedPoint& z) { return evaluate(z); }

  /// Closes the child's stdin, waits briefly for a clean exit, then kills.
  void shutdown() noexcept {
    if (to_child_ >= 0) ::close(to_child_);
    to_child_ = -1;
    if (pid_ > 0) {
      int status = 0;
      bool reaped = false;
      for (int i = 0; i < 50 && !reaped; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) == pid_) reaped = true;
        else ::usleep(2000);
      }
      if (!reaped) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
      }
    }
    pid_ = -1;
    if (from_child_ >= 0) ::close(from_child_);
    from_child_ = -1;
    buffer_.clear();
  }

private:
  void steal(ExternalObjective& o) {
    argv_ = std::move(o.argv_);
    timeout_s_ = o.timeout_s_;
    pid_ = o.pid_;
    to_child_ = o.to_child_;
    from_child_ = o.from_child_;
    buffer_ = std::move(o.buffer_);
    o.pid_ = -1;
    o.to_child_ = -1;
    o.from_child_ = -1;
  }

  std::string command_text() const {
    std::string s;
    for (const auto& a : argv_) s += (s.empty() ? "" : " ") + a;
    return s;
  }

  void spawn() {
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw EvaluationError(std::string("pipe failed: ") + std::strerror(errno));
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      throw EvaluationError(std::string("pipe failed: ") + std::strerror(errno));
    }
    std::vector<char*> args;
    for (auto& a : argv_) args.push_back(a.data());
    args.push_back(nullptr);

    const pid_t pid = ::fork();
    if (pid < 0) {
      for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
      throw EvaluationError(std::string("fork failed: ") + std::strerror(errno));
    }
    if (pid == 0) {
      ::dup2(in_pipe[0], STDIN_FILENO);
      ::dup2(out_pipe[1], STDOUT_FILENO);
      ::execvp(args[0], args.data());
      ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    buffer_.clear();
  }

  [[noreturn]] void fail_dead(const std::string& what) {
    int status = 0;
    std::string detail;
    if (pid_ > 0 && ::waitpid(pid_, &status, 0) == pid_) {
      if (WIFEXITED(status)) detail = " (exit status " + std::to_string(WEXITSTATUS(status)) + ")";
      else if (WIFSIGNALED(status)) detail = " (killed by signal " + std::to_string(WTERMSIG(status)) + ")";
      pid_ = -1;
    }
    shutdown();
    throw EvaluationError("external objective '" + command_text() + "' " + what + detail);
  }

  void write_all(const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::write(to_child_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail_dead(std::string("closed its input: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line() {
    using clock = std::chrono::steady_clock;
    const auto deadline = clock::now() + std::chrono::duration<double>(timeout_s_);
    for (;;) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
      if (left <= 0) {
        ::kill(pid_, SIGKILL);
        fail_dead("timed out after " + std::to_string(timeout_s_) + " s");
      }
      pollfd p{from_child_, POLLIN, 0};
      const int r = ::poll(&p, 1, static_cast<int>(std::min<long long>(left, 1000 * 60)));
      if (r < 0) {
        if (errno == EINTR) continue;
        fail_dead(std::string("poll failed: ") + std::strerror(errno));
      }
      if (r == 0) continue;
      char chunk[4096];
      const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail_dead(std::string("read failed: ") + std::strerror(errno));
      }
      if (n == 0) fail_dead("exited before responding");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::vector<std::string> argv_;
  double timeout_s_ = 600.0;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

} // namespace vpbo
