#include "findview/server.hpp"

#include <cerrno>
#include <cstring>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include "findview/error.hpp"
#include "findview/protocol.hpp"

namespace findview {

using ordered_json = nlohmann::ordered_json;

namespace {

// Error frames that keep the session open.
struct RequestError {
  std::string code;
  std::string message;
};

ordered_json rotation_json(const ViewRotation& r) {
  return {{"pitch", static_cast<int>(r.pitch)}, {"yaw", static_cast<int>(r.yaw)}};
}

ordered_json error_frame(const std::string& code, const std::string& message, const ordered_json& msg) {
  ordered_json j;
  j["ok"] = false;
  j["op"] = msg.is_object() && msg.contains("op") ? msg["op"] : ordered_json();
  if (msg.is_object() && msg.contains("env")) j["env"] = msg["env"];
  j["error"] = code;
  j["message"] = message;
  return j;
}

std::vector<std::uint8_t> to_bytes(const ordered_json& j) {
  const std::string s = j.dump();
  return {s.begin(), s.end()};
}

}  // namespace

void ServerConfig::validate() const {
  if (n_envs < 1 || n_envs > 1024) throw Error(ErrorCode::InvalidSpec, "n_envs must be in 1..1024");
  if (episodes.empty() && panos.empty()) {
    throw Error(ErrorCode::InvalidSpec, "server needs an episode file or a panorama list for sampling");
  }
  if (episodes.empty() && difficulty == Difficulty::Unclassified) {
    throw Error(ErrorCode::InvalidSpec, "cannot sample unclassified episodes");
  }
  for (const auto& e : episodes) {
    if (e.fov != fov) throw Error(ErrorCode::InvalidSpec, "episode fov differs from server fov");
  }
  env.validate();
}

Session::Session(ServerConfig cfg, std::shared_ptr<const PanoramaSource> panoramas)
    : cfg_(std::move(cfg)), panoramas_(std::move(panoramas)) {
  cfg_.env.camera = default_camera(cfg_.fov);
  cfg_.validate();
  for (int i = 0; i < cfg_.n_envs; ++i) {
    Slot s;
    s.env = std::make_unique<FindViewEnv>(cfg_.env, panoramas_);
    slots_.push_back(std::move(s));
  }
}

EpisodeSpec Session::episode_at(int env, std::uint64_t cursor) const {
  if (!cfg_.episodes.empty()) {
    const std::uint64_t n = cfg_.episodes.size();
    return cfg_.episodes[(static_cast<std::uint64_t>(env) + cursor * static_cast<std::uint64_t>(cfg_.n_envs)) % n];
  }
  Rng rng(mix_seed(cfg_.seed + static_cast<std::uint64_t>(env), cursor));
  const auto& pano = cfg_.panos[static_cast<std::size_t>(
      uniform_int(rng, 0, static_cast<std::int64_t>(cfg_.panos.size()) - 1))];
  return sample_episode(cfg_.difficulty, pano, cfg_.fov, rng, cfg_.sampler);
}

ordered_json Session::step_reply(const char* op, int env, const StepResult& r, std::vector<std::uint8_t>& obs) const {
  obs = encode_observation(*r.observation.target, r.observation.current);
  ordered_json j;
  j["ok"] = true;
  j["op"] = op;
  j["env"] = env;
  j["t"] = r.info.step;
  j["reward"] = r.reward;
  j["done"] = r.done;
  j["stop_called"] = r.info.stop_called;
  j["forced_termination"] = r.info.forced_termination;
  if (!cfg_.hide_state) j["rotation"] = rotation_json(r.info.rotation);
  j["obs_bytes"] = obs.size();
  return j;
}

ordered_json Session::handle(const ordered_json& msg, std::vector<std::uint8_t>& obs) {
  if (!msg.is_object() || !msg.contains("op") || !msg["op"].is_string()) {
    throw Error(ErrorCode::ProtocolViolation, "message must be an object with a string 'op'");
  }
  const std::string op = msg["op"].get<std::string>();
  if (op == "hello") {
    if (!msg.contains("version") || msg["version"] != kProtocolVersion) {
      throw Error(ErrorCode::ProtocolViolation, "unsupported protocol version");
    }
    greeted_ = true;
    ordered_json j;
    j["ok"] = true;
    j["op"] = "hello";
    j["version"] = kProtocolVersion;
    j["n_envs"] = cfg_.n_envs;
    j["obs_shape"] = {cfg_.env.camera.height(), cfg_.env.camera.width(), 3};
    j["fov"] = static_cast<int>(cfg_.fov);
    j["actions"] = ordered_json::array();
    for (Action a : kAllActions) j["actions"].push_back(std::string(to_string(a)));
    j["hide_state"] = cfg_.hide_state;
    j["episode_source"] = cfg_.episodes.empty() ? "sampler" : "file";
    return j;
  }
  if (!greeted_) throw Error(ErrorCode::ProtocolViolation, "first message must be hello");
  if (op == "close") {
    closing_ = true;
    return {{"ok", true}, {"op", "close"}};
  }

  if (!msg.contains("env") || !msg["env"].is_number_integer()) {
    throw RequestError{"bad-request", "missing integer 'env'"};
  }
  const int env = msg["env"].get<int>();
  if (env < 0 || env >= cfg_.n_envs) throw RequestError{"bad-request", "env out of range"};
  Slot& slot = slots_[static_cast<std::size_t>(env)];

  if (op == "seek" || op == "reset") {
    if (msg.contains("cursor")) {
      if (!msg["cursor"].is_number_unsigned() && !(msg["cursor"].is_number_integer() && msg["cursor"].get<long long>() >= 0))
        throw RequestError{"bad-request", "cursor must be a non-negative integer"};
      slot.cursor = msg["cursor"].get<std::uint64_t>();
    }
    if (op == "seek") return {{"ok", true}, {"op", "seek"}, {"env", env}, {"cursor", slot.cursor}};

    EpisodeSpec spec;
    std::optional<std::uint64_t> used_cursor;
    if (msg.contains("episode")) {
      try {
        spec = parse_episode(msg["episode"].dump());
      } catch (const Error& e) {
        throw RequestError{"bad-request", e.what()};
      }
    }
    StepResult r;
    try {
      if (!msg.contains("episode")) {
        used_cursor = slot.cursor;
        spec = episode_at(env, slot.cursor++);
      }
      r = slot.env->reset(spec);
    } catch (const Error& e) {
      throw RequestError{std::string(to_string(e.code())), e.what()};
    }
    ordered_json j = step_reply("reset", env, r, obs);
    if (used_cursor) j["cursor"] = *used_cursor;
    if (cfg_.hide_state) {
      j["episode"] = {{"pano", spec.pano}, {"difficulty", std::string(to_string(spec.difficulty))}};
    } else {
      j["episode"] = ordered_json::parse(serialize_episode(spec));
    }
    // Keep obs_bytes last so every observation-bearing reply ends the same way.
    const auto bytes = j["obs_bytes"];
    j.erase("obs_bytes");
    j["obs_bytes"] = bytes;
    return j;
  }
  if (op == "step") {
    if (!msg.contains("action") || !msg["action"].is_string()) throw RequestError{"bad-request", "missing 'action'"};
    const auto action = parse_action(msg["action"].get<std::string>());
    if (!action) throw RequestError{"bad-request", "unknown action " + msg["action"].dump()};
    if (!slot.env->active() || slot.env->done()) throw RequestError{"env-done", "env has no running episode; reset it"};
    return step_reply("step", env, slot.env->step(*action), obs);
  }
  throw Error(ErrorCode::ProtocolViolation, "unknown op '" + op + "'");
}

bool Session::run(int in_fd, int out_fd) {
  closing_ = false;
  while (!closing_) {
    std::optional<std::vector<std::uint8_t>> frame;
    ordered_json msg;
    try {
      frame = read_frame(in_fd);
      if (!frame) return false;
      msg = ordered_json::parse(frame->begin(), frame->end());
    } catch (const nlohmann::json::parse_error&) {
      write_frame(out_fd, error_frame("protocol-violation", "control frame is not valid JSON", {}).dump());
      return false;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ProtocolViolation) {
        try {
          write_frame(out_fd, error_frame("protocol-violation", e.what(), {}).dump());
        } catch (const Error&) {
        }
      }
      return false;
    }

    std::vector<std::uint8_t> obs;
    try {
      const ordered_json reply = handle(msg, obs);
      if (obs.empty()) {
        write_frame(out_fd, reply.dump());
      } else {
        const std::vector<std::uint8_t> frames[2] = {to_bytes(reply), std::move(obs)};
        write_frames(out_fd, frames);
      }
    } catch (const RequestError& e) {
      write_frame(out_fd, error_frame(e.code, e.message, msg).dump());
    } catch (const nlohmann::json::exception& e) {
      write_frame(out_fd, error_frame("bad-request", e.what(), msg).dump());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ProtocolViolation) throw;
      write_frame(out_fd, error_frame("protocol-violation", e.what(), msg).dump());
      return false;
    }
  }
  return true;
}

bool serve_tcp(const ServerConfig& cfg, std::shared_ptr<const PanoramaSource> panoramas, const std::string& host,
               int port, const std::function<void(int)>& on_listening) {
  Session session(cfg, std::move(panoramas));
  const int lfd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (lfd < 0) throw Error(ErrorCode::BindFailure, std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  setsockopt(lfd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(lfd);
    throw Error(ErrorCode::BindFailure, "not an IPv4 address: " + host);
  }
  if (::bind(lfd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(lfd, 1) != 0) {
    const std::string why = std::strerror(errno);
    ::close(lfd);
    throw Error(ErrorCode::BindFailure, "cannot listen on " + host + ":" + std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  getsockname(lfd, reinterpret_cast<sockaddr*>(&addr), &len);
  if (on_listening) on_listening(ntohs(addr.sin_port));

  int cfd;
  while ((cfd = ::accept(lfd, nullptr, nullptr)) < 0 && errno == EINTR) {
  }
  ::close(lfd);
  if (cfd < 0) throw Error(ErrorCode::Io, std::string("accept: ") + std::strerror(errno));
  setsockopt(cfd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  bool clean = false;
  try {
    clean = session.run(cfd, cfd);
  } catch (...) {
    ::close(cfd);
    throw;
  }
  ::close(cfd);
  return clean;
}

int connect_tcp(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
    throw Error(ErrorCode::Io, "cannot resolve " + host);
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const int rc = fd < 0 ? -1 : ::connect(fd, res->ai_addr, res->ai_addrlen);
  freeaddrinfo(res);
  if (rc != 0) {
    if (fd >= 0) ::close(fd);
    throw Error(ErrorCode::Io, "cannot connect to " + host + ":" + std::to_string(port));
  }
  const int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

void RemoteClient::send(const ordered_json& msg) { write_frame(out_, msg.dump()); }

RemoteClient::Reply RemoteClient::receive() {
  auto frame = read_frame(in_);
  if (!frame) throw Error(ErrorCode::Io, "server closed the connection");
  Reply r;
  r.control = ordered_json::parse(frame->begin(), frame->end());
  if (r.control.value("ok", false) && r.control.contains("obs_bytes")) {
    auto obs = read_frame(in_);
    if (!obs) throw Error(ErrorCode::Io, "server closed before the observation frame");
    r.obs = std::move(*obs);
  }
  return r;
}

RemoteClient::Reply RemoteClient::request(const ordered_json& msg) {
  send(msg);
  return receive();
}

ordered_json RemoteClient::hello() { return request({{"op", "hello"}, {"version", kProtocolVersion}}).control; }

RemoteClient::Reply RemoteClient::reset(int env, std::optional<std::uint64_t> cursor) {
  ordered_json msg{{"op", "reset"}, {"env", env}};
  if (cursor) msg["cursor"] = *cursor;
  return request(msg);
}

RemoteClient::Reply RemoteClient::step(int env, Action a) {
  return request({{"op", "step"}, {"env", env}, {"action", std::string(to_string(a))}});
}

void RemoteClient::close() { request({{"op", "close"}}); }

}  // namespace findview
