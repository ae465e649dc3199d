#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "findview/image.hpp"

namespace findview {

enum class CorruptionKind {
  MotionBlur,
  DefocusBlur,
  GlassBlur,
  GaussianBlur,
  GaussianNoise,
  ImpulseNoise,
  ShotNoise,
  SpeckleNoise,
  Brightness,
  Contrast,
  Saturation,
  JpegCompression,
  Snow,
  Spatter,
  Fog,
  Frost,
};

enum class CorruptionCategory { Blur, Noise, Digital, Weather };

inline constexpr std::array<CorruptionKind, 16> kAllCorruptions{
    CorruptionKind::MotionBlur,    CorruptionKind::DefocusBlur,  CorruptionKind::GlassBlur,
    CorruptionKind::GaussianBlur,  CorruptionKind::GaussianNoise, CorruptionKind::ImpulseNoise,
    CorruptionKind::ShotNoise,     CorruptionKind::SpeckleNoise, CorruptionKind::Brightness,
    CorruptionKind::Contrast,      CorruptionKind::Saturation,   CorruptionKind::JpegCompression,
    CorruptionKind::Snow,          CorruptionKind::Spatter,      CorruptionKind::Fog,
    CorruptionKind::Frost,
};

/// Lowercase hyphenated identifier, e.g. "motion-blur".
std::string_view to_string(CorruptionKind kind);
std::optional<CorruptionKind> parse_corruption_kind(std::string_view name);
CorruptionCategory category_of(CorruptionKind kind);

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::GaussianNoise;
  int severity = 1;  // 1..5
  std::uint64_t seed = 0;

  friend bool operator==(const CorruptionSpec&, const CorruptionSpec&) = default;
};

/// Named scalar parameters for one (kind, severity) cell.
struct ParamRecord {
  std::vector<std::pair<std::string, double>> fields;

  double get(std::string_view name) const;
  friend bool operator==(const ParamRecord&, const ParamRecord&) = default;
};

/// Total over the 16x5 grid. Throws InvalidSeverity outside 1..5.
ParamRecord severity_params(CorruptionKind kind, int severity);

/// Same dimensions as the input; deterministic in (img, kind, severity, seed).
/// Throws InvalidSeverity outside 1..5.
RgbImage corrupt(const RgbImage& img, const CorruptionSpec& spec);

/// Parses "kind:severity", e.g. "fog:3".
CorruptionSpec parse_corruption_arg(std::string_view text, std::uint64_t seed = 0);

}  // namespace findview
