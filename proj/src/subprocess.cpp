#include "findview/subprocess.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "findview/error.hpp"

namespace findview {

namespace {

void ignore_sigpipe() {
  static const bool once = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

}  // namespace

ChildProcess::ChildProcess(const std::vector<std::string>& argv) {
  if (argv.empty()) throw Error(ErrorCode::Io, "empty command");
  ignore_sigpipe();
  int in[2], out[2];
  if (pipe(in) != 0) throw Error(ErrorCode::Io, std::string("pipe: ") + std::strerror(errno));
  if (pipe(out) != 0) {
    ::close(in[0]);
    ::close(in[1]);
    throw Error(ErrorCode::Io, std::string("pipe: ") + std::strerror(errno));
  }
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_ = fork();
  if (pid_ < 0) throw Error(ErrorCode::Io, std::string("fork: ") + std::strerror(errno));
  if (pid_ == 0) {
    dup2(in[0], STDIN_FILENO);
    dup2(out[1], STDOUT_FILENO);
    ::close(in[0]);
    ::close(in[1]);
    ::close(out[0]);
    ::close(out[1]);
    execvp(args[0], args.data());
    _exit(127);
  }
  ::close(in[0]);
  ::close(out[1]);
  to_child_ = in[1];
  from_child_ = out[0];
  fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  fcntl(from_child_, F_SETFD, FD_CLOEXEC);
}

ChildProcess::~ChildProcess() {
  close_stdin();
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    kill(pid_, SIGTERM);
    wait();
  }
}

void ChildProcess::close_stdin() {
  if (to_child_ >= 0) {
    ::close(to_child_);
    to_child_ = -1;
  }
}

int ChildProcess::wait() {
  if (pid_ <= 0) return -1;
  int status = 0;
  while (waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
  }
  pid_ = -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return -WTERMSIG(status);
  return -1;
}

ProcessResult run_process(const std::vector<std::string>& argv, std::span<const std::uint8_t> input) {
  ChildProcess child(argv);
  ProcessResult result;
  std::size_t written = 0;
  if (input.empty()) child.close_stdin();
  fcntl(child.in_fd(), F_SETFL, O_NONBLOCK);

  std::uint8_t buf[65536];
  bool out_open = true;
  while (out_open) {
    pollfd fds[2];
    int n = 0;
    fds[n++] = {child.out_fd(), POLLIN, 0};
    const bool writing = child.in_fd() >= 0;
    if (writing) fds[n++] = {child.in_fd(), POLLOUT, 0};
    if (poll(fds, n, -1) < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::Io, std::string("poll: ") + std::strerror(errno));
    }
    if (writing && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const ssize_t w = ::write(child.in_fd(), input.data() + written, input.size() - written);
      if (w > 0) written += static_cast<std::size_t>(w);
      if (w < 0 && errno != EAGAIN && errno != EINTR) written = input.size();
      if (written == input.size()) child.close_stdin();
    }
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      const ssize_t r = ::read(child.out_fd(), buf, sizeof buf);
      if (r > 0) {
        result.out.insert(result.out.end(), buf, buf + r);
      } else if (r == 0 || (errno != EINTR && errno != EAGAIN)) {
        out_open = false;
      }
    }
  }
  child.close_stdin();
  result.exit_code = child.wait();
  return result;
}

}  // namespace findview
