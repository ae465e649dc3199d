#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "findview/image.hpp"

namespace findview {

struct Keypoint {
  float x = 0.0f;  // pixel index, column
  float y = 0.0f;  // row
  float angle = 0.0f;  // degrees in [0, 360)
  float response = 0.0f;
};

enum class DescriptorMetric { Hamming, L2 };

/// Keypoints with row-major descriptors, `descriptor_bytes` per keypoint.
/// Hamming descriptors are bit strings; L2 descriptors are uint8 vectors (e.g. quantized SIFT).
struct Features {
  std::vector<Keypoint> keypoints;
  std::vector<std::uint8_t> descriptors;
  int descriptor_bytes = 32;
  DescriptorMetric metric = DescriptorMetric::Hamming;

  std::size_t size() const noexcept { return keypoints.size(); }
  std::span<const std::uint8_t> descriptor(std::size_t i) const {
    return {descriptors.data() + i * descriptor_bytes, static_cast<std::size_t>(descriptor_bytes)};
  }
};

struct OrbConfig {
  int fast_threshold = 20;
  int max_keypoints = 1000;
  int edge = 19;  // keypoints closer to the border than this are dropped
};

/// FAST-9 corners with non-max suppression, Harris ranking, intensity-centroid orientation and
/// steered 256-bit BRIEF. Deterministic and reentrant.
Features detect_and_compute(const GrayImage& img, const OrbConfig& cfg = {});

int hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
double descriptor_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b, DescriptorMetric m);

struct Match {
  int query = 0;  // index into the current-view features
  int train = 0;  // index into the target-view features
  double distance = 0.0;
};

/// Two nearest target descriptors per current descriptor; keeps the best iff
/// best < ratio * second. Fewer than two target descriptors yields no matches.
std::vector<Match> knn_ratio_match(const Features& current, const Features& target, double ratio);

class FeatureDetector {
 public:
  virtual ~FeatureDetector() = default;
  virtual Features detect(const GrayImage& img) const = 0;
};

class OrbDetector : public FeatureDetector {
 public:
  explicit OrbDetector(OrbConfig cfg = {}) : cfg_(cfg) {}
  Features detect(const GrayImage& img) const override { return detect_and_compute(img, cfg_); }

 private:
  OrbConfig cfg_;
};

}  // namespace findview
