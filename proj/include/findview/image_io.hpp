#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "findview/image.hpp"

namespace findview {

/// Decodes PNG/JPEG (anything the codec backend reads) into 8-bit RGB. Throws Io on failure.
RgbImage load_image(const std::filesystem::path& path);

/// Writes by extension (.png, .jpg). Throws Io on failure.
void save_image(const RgbImage& img, const std::filesystem::path& path);

RgbImage decode_image(std::span<const std::uint8_t> encoded);
std::vector<std::uint8_t> encode_png(const RgbImage& img);
std::vector<std::uint8_t> encode_jpeg(const RgbImage& img, int quality);

/// Reads only the header; nullopt when the file is not a decodable image.
std::optional<std::pair<int, int>> probe_image_size(const std::filesystem::path& path);

}  // namespace findview
