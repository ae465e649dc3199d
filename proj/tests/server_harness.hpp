#pragma once

#include <sys/socket.h>
#include <unistd.h>

#include <memory>
#include <thread>

#include "findview/dataset.hpp"
#include "findview/server.hpp"

namespace findview::oracle {

// Runs a Session on one end of a socketpair in a background thread.
class LocalServer {
 public:
  LocalServer(ServerConfig cfg, std::shared_ptr<const PanoramaSource> panos) {
    int fds[2];
    if (socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) throw std::runtime_error("socketpair");
    client_fd_ = fds[0];
    server_fd_ = fds[1];
    session_ = std::make_unique<Session>(std::move(cfg), std::move(panos));
    thread_ = std::thread([this] {
      clean_ = session_->run(server_fd_, server_fd_);
      ::shutdown(server_fd_, SHUT_RDWR);
    });
  }
  ~LocalServer() {
    ::shutdown(client_fd_, SHUT_RDWR);
    if (thread_.joinable()) thread_.join();
    ::close(client_fd_);
    ::close(server_fd_);
  }
  int fd() const { return client_fd_; }
  bool finish() {
    if (thread_.joinable()) thread_.join();
    return clean_;
  }

 private:
  int client_fd_ = -1;
  int server_fd_ = -1;
  std::unique_ptr<Session> session_;
  std::thread thread_;
  bool clean_ = false;
};

inline std::shared_ptr<PanoramaStore> synthetic_store() { return std::make_shared<PanoramaStore>(); }

inline ServerConfig sampler_config(int n_envs, std::uint64_t seed, int pano_width = 512) {
  ServerConfig cfg;
  cfg.n_envs = n_envs;
  cfg.seed = seed;
  cfg.difficulty = Difficulty::Easy;
  cfg.panos = {synth_id(SynthKind::GridTags, 1, pano_width), synth_id(SynthKind::Voronoi, 2, pano_width)};
  return cfg;
}

}  // namespace findview::oracle
