#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "findview/agents.hpp"
#include "findview/subprocess.hpp"

namespace findview {

/// Agent living in a child process, spoken to over stdin/stdout with the framed agent protocol
/// (see docs/protocol.md). Any transport or reply failure throws AgentCrash; the next reset()
/// starts a fresh child.
class RemoteAgent : public Agent {
 public:
  explicit RemoteAgent(std::vector<std::string> argv);
  ~RemoteAgent() override;

  void reset() override;
  Action act(const AgentInput& input) override;
  std::string name() const override { return name_; }

 private:
  void start();
  void stop();
  nlohmann::ordered_json exchange(const nlohmann::ordered_json& msg, const std::vector<std::uint8_t>* obs);

  std::vector<std::string> argv_;
  std::unique_ptr<ChildProcess> child_;
  std::string name_ = "remote";
  int t_ = 0;
};

/// Agent side of the protocol: answers requests on in_fd/out_fd until close or EOF.
/// Returns false when the peer broke the protocol.
bool serve_agent(Agent& agent, int in_fd, int out_fd);

}  // namespace findview
