#include "findview/protocol.hpp"

#include <cerrno>
#include <cstring>

#include <sys/uio.h>
#include <unistd.h>

#include "findview/error.hpp"

namespace findview {

bool read_exact(int fd, std::uint8_t* data, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::read(fd, data + got, n - got);
    if (r == 0) {
      if (got == 0) return false;
      throw Error(ErrorCode::Io, "stream ended inside a frame");
    }
    if (r < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::Io, std::string("read: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

void write_all(int fd, const std::uint8_t* data, std::size_t n) {
  std::size_t done = 0;
  while (done < n) {
    const ssize_t w = ::write(fd, data + done, n - done);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::Io, std::string("write: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(w);
  }
}

namespace {

void put_length(std::uint8_t* out, std::uint32_t n) {
  out[0] = static_cast<std::uint8_t>(n >> 24);
  out[1] = static_cast<std::uint8_t>(n >> 16);
  out[2] = static_cast<std::uint8_t>(n >> 8);
  out[3] = static_cast<std::uint8_t>(n);
}

}  // namespace

std::optional<std::vector<std::uint8_t>> read_frame(int fd) {
  std::uint8_t head[4];
  if (!read_exact(fd, head, 4)) return std::nullopt;
  const std::uint32_t n = (std::uint32_t(head[0]) << 24) | (std::uint32_t(head[1]) << 16) |
                          (std::uint32_t(head[2]) << 8) | std::uint32_t(head[3]);
  if (n > kMaxFrameBytes) throw Error(ErrorCode::ProtocolViolation, "frame of " + std::to_string(n) + " bytes");
  std::vector<std::uint8_t> payload(n);
  if (n > 0 && !read_exact(fd, payload.data(), n)) throw Error(ErrorCode::Io, "stream ended inside a frame");
  return payload;
}

void write_frame(int fd, std::span<const std::uint8_t> payload) {
  const std::vector<std::uint8_t> one(payload.begin(), payload.end());
  write_frames(fd, std::span(&one, 1));
}

void write_frame(int fd, const std::string& payload) {
  write_frame(fd, std::span(reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()));
}

void write_frames(int fd, std::span<const std::vector<std::uint8_t>> payloads) {
  std::vector<std::uint8_t> heads(payloads.size() * 4);
  std::vector<iovec> iov;
  for (std::size_t i = 0; i < payloads.size(); ++i) {
    if (payloads[i].size() > kMaxFrameBytes) throw Error(ErrorCode::ProtocolViolation, "outgoing frame too large");
    put_length(heads.data() + 4 * i, static_cast<std::uint32_t>(payloads[i].size()));
    iov.push_back({heads.data() + 4 * i, 4});
    if (!payloads[i].empty()) iov.push_back({const_cast<std::uint8_t*>(payloads[i].data()), payloads[i].size()});
  }
  std::size_t idx = 0;
  while (idx < iov.size()) {
    const int count = static_cast<int>(std::min<std::size_t>(iov.size() - idx, 512));
    ssize_t w = ::writev(fd, iov.data() + idx, count);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::Io, std::string("write: ") + std::strerror(errno));
    }
    while (idx < iov.size() && static_cast<std::size_t>(w) >= iov[idx].iov_len) {
      w -= static_cast<ssize_t>(iov[idx].iov_len);
      ++idx;
    }
    if (idx < iov.size() && w > 0) {
      iov[idx].iov_base = static_cast<std::uint8_t*>(iov[idx].iov_base) + w;
      iov[idx].iov_len -= static_cast<std::size_t>(w);
    }
  }
}

std::vector<std::uint8_t> encode_observation(const RgbImage& target, const RgbImage& current) {
  if (target.width() != current.width() || target.height() != current.height()) {
    throw Error(ErrorCode::SizeMismatch, "target and current views differ in size");
  }
  std::vector<std::uint8_t> out;
  out.reserve(target.byte_size() * 2);
  out.insert(out.end(), target.bytes().begin(), target.bytes().end());
  out.insert(out.end(), current.bytes().begin(), current.bytes().end());
  return out;
}

std::pair<RgbImage, RgbImage> decode_observation(std::span<const std::uint8_t> payload, int width, int height) {
  const std::size_t one = static_cast<std::size_t>(width) * height * 3;
  if (payload.size() != 2 * one) {
    throw Error(ErrorCode::SizeMismatch, "observation payload of " + std::to_string(payload.size()) +
                                             " bytes, expected " + std::to_string(2 * one));
  }
  return {RgbImage(width, height, std::vector<std::uint8_t>(payload.begin(), payload.begin() + one)),
          RgbImage(width, height, std::vector<std::uint8_t>(payload.begin() + one, payload.end()))};
}

}  // namespace findview
