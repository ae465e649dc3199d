#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "findview/image.hpp"

namespace findview {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

/// Blocking frame I/O on a file descriptor: 4-byte big-endian length, then payload.
/// read_frame returns nullopt on a clean EOF before the length prefix; throws Io on a truncated
/// frame and ProtocolViolation on an oversized one.
std::optional<std::vector<std::uint8_t>> read_frame(int fd);
void write_frame(int fd, std::span<const std::uint8_t> payload);
void write_frame(int fd, const std::string& payload);

/// Writes several frames with one syscall where possible.
void write_frames(int fd, std::span<const std::vector<std::uint8_t>> payloads);

/// Raw interleaved RGB8, target first then current: 2 * W * H * 3 bytes. Throws SizeMismatch.
std::vector<std::uint8_t> encode_observation(const RgbImage& target, const RgbImage& current);
std::pair<RgbImage, RgbImage> decode_observation(std::span<const std::uint8_t> payload, int width, int height);

/// Reads and writes exactly n bytes, retrying on EINTR. Throws Io on failure.
bool read_exact(int fd, std::uint8_t* data, std::size_t n);
void write_all(int fd, const std::uint8_t* data, std::size_t n);

}  // namespace findview
