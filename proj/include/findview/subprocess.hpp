#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace findview {

struct ProcessResult {
  int exit_code = -1;
  std::vector<std::uint8_t> out;
};

/// Runs argv[0] (PATH lookup) with `input` on stdin and collects stdout. Throws Io on spawn failure.
ProcessResult run_process(const std::vector<std::string>& argv, std::span<const std::uint8_t> input);

/// Long-lived child with piped stdin/stdout; stderr is inherited.
class ChildProcess {
 public:
  explicit ChildProcess(const std::vector<std::string>& argv);
  ~ChildProcess();
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  int in_fd() const noexcept { return to_child_; }
  int out_fd() const noexcept { return from_child_; }
  void close_stdin();
  /// Waits for exit and returns the status code (or -signal).
  int wait();

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
};

}  // namespace findview
