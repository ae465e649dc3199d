#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "findview/environment.hpp"

namespace findview {

struct ServerConfig {
  int n_envs = 16;
  std::uint64_t seed = 0;
  double fov = 90.0;
  bool hide_state = false;
  EnvConfig env;  // camera is replaced by default_camera(fov)

  /// Episode-file mode when non-empty; env i starts at record i and advances by n_envs.
  std::vector<EpisodeSpec> episodes;
  /// Sampler mode otherwise: episode k of env i is drawn from seed mix(seed + i, k).
  Difficulty difficulty = Difficulty::Easy;
  std::vector<std::string> panos;
  SamplerConfig sampler;

  /// Throws InvalidSpec.
  void validate() const;
};

/// One client session over a pair of file descriptors (socket or pipes).
class Session {
 public:
  Session(ServerConfig cfg, std::shared_ptr<const PanoramaSource> panoramas);

  /// Serves until the client sends close or disconnects. Protocol violations send an error frame
  /// and end the session; they are reported through the return value.
  /// Returns true on a clean close.
  bool run(int in_fd, int out_fd);

  /// Episode the env would load at a cursor position.
  EpisodeSpec episode_at(int env, std::uint64_t cursor) const;

 private:
  struct Slot {
    std::unique_ptr<FindViewEnv> env;
    std::uint64_t cursor = 0;
  };

  nlohmann::ordered_json handle(const nlohmann::ordered_json& msg, std::vector<std::uint8_t>& obs);
  nlohmann::ordered_json step_reply(const char* op, int env, const StepResult& r, std::vector<std::uint8_t>& obs) const;

  ServerConfig cfg_;
  std::shared_ptr<const PanoramaSource> panoramas_;
  std::vector<Slot> slots_;
  bool greeted_ = false;
  bool closing_ = false;
};

/// Listens on host:port (port 0 picks one), reports the bound port, serves a single client.
/// Throws BindFailure when the address cannot be bound.
bool serve_tcp(const ServerConfig& cfg, std::shared_ptr<const PanoramaSource> panoramas, const std::string& host,
               int port, const std::function<void(int)>& on_listening = {});

/// Connects to a TCP server; returns the socket fd. Throws Io.
int connect_tcp(const std::string& host, int port);

/// Minimal synchronous client used by tests, tools and the remote agent bridge.
class RemoteClient {
 public:
  struct Reply {
    nlohmann::ordered_json control;
    std::vector<std::uint8_t> obs;  // empty when the reply carries no observation
  };

  RemoteClient(int in_fd, int out_fd) : in_(in_fd), out_(out_fd) {}

  nlohmann::ordered_json hello();
  Reply reset(int env, std::optional<std::uint64_t> cursor = std::nullopt);
  Reply step(int env, Action a);
  Reply request(const nlohmann::ordered_json& msg);
  void send(const nlohmann::ordered_json& msg);
  Reply receive();
  void close();

 private:
  int in_;
  int out_;
};

}  // namespace findview
