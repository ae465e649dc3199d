#include "findview/remote_agent.hpp"

#include "findview/error.hpp"
#include "findview/protocol.hpp"

namespace findview {

using ordered_json = nlohmann::ordered_json;

namespace {

std::vector<std::uint8_t> to_bytes(const ordered_json& j) {
  const std::string s = j.dump();
  return {s.begin(), s.end()};
}

ordered_json read_json(int fd) {
  auto frame = read_frame(fd);
  if (!frame) throw Error(ErrorCode::Io, "peer closed the stream");
  return ordered_json::parse(frame->begin(), frame->end());
}

}  // namespace

RemoteAgent::RemoteAgent(std::vector<std::string> argv) : argv_(std::move(argv)) {
  if (argv_.empty()) throw Error(ErrorCode::InvalidSpec, "remote agent needs a command");
}

RemoteAgent::~RemoteAgent() { stop(); }

void RemoteAgent::start() {
  child_ = std::make_unique<ChildProcess>(argv_);
  const auto reply = exchange({{"op", "hello"}, {"version", kProtocolVersion}}, nullptr);
  if (reply.contains("name") && reply["name"].is_string()) name_ = reply["name"].get<std::string>();
}

void RemoteAgent::stop() {
  if (!child_) return;
  try {
    write_frame(child_->in_fd(), to_bytes({{"op", "close"}}));
  } catch (const Error&) {
  }
  child_.reset();
}

ordered_json RemoteAgent::exchange(const ordered_json& msg, const std::vector<std::uint8_t>* obs) {
  try {
    if (obs) {
      const std::vector<std::vector<std::uint8_t>> frames{to_bytes(msg), *obs};
      write_frames(child_->in_fd(), frames);
    } else {
      write_frame(child_->in_fd(), to_bytes(msg));
    }
    auto reply = read_json(child_->out_fd());
    if (!reply.is_object() || reply.value("ok", false) != true) {
      throw Error(ErrorCode::AgentCrash, "agent refused " + msg["op"].get<std::string>() + ": " + reply.dump());
    }
    return reply;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::AgentCrash) {
      child_.reset();
      throw;
    }
    child_.reset();
    throw Error(ErrorCode::AgentCrash, e.what());
  } catch (const nlohmann::json::exception& e) {
    child_.reset();
    throw Error(ErrorCode::AgentCrash, std::string("unreadable agent reply: ") + e.what());
  }
}

void RemoteAgent::reset() {
  if (!child_) start();
  exchange({{"op", "reset"}}, nullptr);
  t_ = 0;
}

Action RemoteAgent::act(const AgentInput& input) {
  if (!child_) throw Error(ErrorCode::AgentCrash, "agent process is not running");
  const auto obs = encode_observation(*input.obs.target, input.obs.current);
  const ordered_json msg = {{"op", "act"},
                            {"t", t_++},
                            {"obs_shape", {input.obs.current.height(), input.obs.current.width(), 3}},
                            {"obs_bytes", obs.size()}};
  const auto reply = exchange(msg, &obs);
  const auto action = reply.contains("action") && reply["action"].is_string()
                          ? parse_action(reply["action"].get<std::string>())
                          : std::nullopt;
  if (!action) {
    child_.reset();
    throw Error(ErrorCode::AgentCrash, "agent replied without a valid action: " + reply.dump());
  }
  return *action;
}

bool serve_agent(Agent& agent, int in_fd, int out_fd) {
  std::shared_ptr<const PerspImage> target;
  auto violation = [&](const std::string& message) {
    write_frame(out_fd, to_bytes({{"ok", false}, {"error", "protocol-violation"}, {"message", message}}));
    return false;
  };
  while (true) {
    auto frame = read_frame(in_fd);
    if (!frame) return true;
    ordered_json msg;
    try {
      msg = ordered_json::parse(frame->begin(), frame->end());
    } catch (const nlohmann::json::exception&) {
      return violation("request is not JSON");
    }
    std::string op;
    if (msg.is_object() && msg.contains("op") && msg["op"].is_string()) op = msg["op"].get<std::string>();
    if (op == "hello") {
      write_frame(out_fd, to_bytes({{"ok", true}, {"op", "hello"}, {"version", kProtocolVersion}, {"name", agent.name()}}));
    } else if (op == "reset") {
      agent.reset();
      target.reset();
      write_frame(out_fd, to_bytes({{"ok", true}, {"op", "reset"}}));
    } else if (op == "act") {
      auto payload = read_frame(in_fd);
      if (!payload) return violation("act without observation frame");
      int height = 0, width = 0;
      try {
        height = msg.at("obs_shape").at(0).get<int>();
        width = msg.at("obs_shape").at(1).get<int>();
      } catch (const nlohmann::json::exception&) {
        return violation("act needs obs_shape");
      }
      auto [tgt, cur] = decode_observation(*payload, width, height);
      if (!target || *target != tgt) target = std::make_shared<const PerspImage>(std::move(tgt));
      const Observation obs{target, std::move(cur)};
      const Action a = agent.act(AgentInput{obs, std::nullopt, std::nullopt});
      write_frame(out_fd, to_bytes({{"ok", true}, {"op", "act"}, {"action", std::string(to_string(a))}}));
    } else if (op == "close") {
      return true;
    } else {
      return violation("unknown op '" + op + "'");
    }
  }
}

}  // namespace findview
