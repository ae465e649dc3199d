#pragma once

#include <array>
#include <cstddef>
#include <list>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "findview/image.hpp"

namespace findview {

/// Camera orientation in degrees. Canonical form: pitch in [-90, 90], yaw in (-180, 180].
/// Positive pitch looks up, positive yaw looks right.
struct ViewRotation {
  double pitch = 0.0;
  double yaw = 0.0;

  friend bool operator==(const ViewRotation&, const ViewRotation&) = default;
};

/// Wraps an angle in degrees into (-180, 180].
double wrap_yaw(double yaw_deg);

/// Clamps pitch to [-90, 90] and wraps yaw.
ViewRotation canonicalize(ViewRotation rot);

bool is_canonical(const ViewRotation& rot);

/// Full 360x180 panorama; width is always twice the height.
class EquirectImage {
 public:
  EquirectImage() = default;
  explicit EquirectImage(RgbImage pixels);

  int width() const noexcept { return pixels_.width(); }
  int height() const noexcept { return pixels_.height(); }
  const RgbImage& pixels() const noexcept { return pixels_; }

  friend bool operator==(const EquirectImage&, const EquirectImage&) = default;

 private:
  RgbImage pixels_;
};

using PerspImage = RgbImage;

/// Pinhole intrinsics with the principal point at the image center.
class CameraIntrinsics {
 public:
  /// 90 degree FoV at 256x256.
  CameraIntrinsics() = default;

  double fov_deg() const noexcept { return fov_deg_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  /// Focal length in pixels, derived from the horizontal FoV and width.
  double focal() const noexcept;
  double cx() const noexcept { return width_ / 2.0; }
  double cy() const noexcept { return height_ / 2.0; }

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;

 private:
  friend CameraIntrinsics make_intrinsics(double fov_deg, int width, int height);
  CameraIntrinsics(double fov_deg, int width, int height) : fov_deg_(fov_deg), width_(width), height_(height) {}

  double fov_deg_ = 90.0;
  int width_ = 256;
  int height_ = 256;
};

/// Throws InvalidFov unless 0 < fov_deg < 180, InvalidSize for empty dimensions.
CameraIntrinsics make_intrinsics(double fov_deg, int width, int height);

/// Unit vector in the world frame (+x right, +y down, +z forward at identity).
struct SphereDirection {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;
};

struct SphereAngles {
  double yaw_deg = 0.0;    // alpha
  double pitch_deg = 0.0;  // beta, positive up
};

struct EquirectCoord {
  double col = 0.0;  // u_i
  double row = 0.0;  // u_j
};

/// Image-plane coordinates of the centre of pixel (i, j).
inline std::array<double, 2> pixel_center(int i, int j) { return {i + 0.5, j + 0.5}; }

/// Ray through continuous image-plane point (vx, vy) after rotating the camera by rot.
/// Pixel (i, j) covers [i, i+1) x [j, j+1); use pixel_center for its sample point.
SphereDirection pixel_ray(double vx, double vy, const CameraIntrinsics& cam, const ViewRotation& rot);

SphereAngles direction_to_angles(const SphereDirection& p);

SphereAngles pixel_to_sphere(double vx, double vy, const CameraIntrinsics& cam, const ViewRotation& rot);

EquirectCoord sphere_to_equirect(double yaw_deg, double pitch_deg, int equi_width, int equi_height);

/// Bilinear sample before quantization. Columns wrap, rows clamp.
std::array<double, 3> bilinear_sample(const RgbImage& img, double col, double row);

/// Rounds and clamps a pre-quantization channel value.
std::uint8_t quantize(double v) noexcept;

/// Precomputed per-pixel sphere angles for one (intrinsics, pitch) pair. Yaw only shifts columns.
struct RayTable {
  int width = 0;
  int height = 0;
  std::vector<double> yaw_turns;    // (alpha at yaw 0) / 360deg
  std::vector<double> pitch_turns;  // (beta + 90deg) / 180deg
};

/// Renders perspective views, caching ray tables per (intrinsics, pitch). Thread-safe.
class PerspectiveRenderer {
 public:
  explicit PerspectiveRenderer(std::size_t cache_capacity = 128);

  PerspImage render(const EquirectImage& img, const ViewRotation& rot, const CameraIntrinsics& cam) const;

  /// Channel values before quantization, interleaved RGB.
  std::vector<double> render_linear(const EquirectImage& img, const ViewRotation& rot,
                                    const CameraIntrinsics& cam) const;

  std::shared_ptr<const RayTable> table(const CameraIntrinsics& cam, double pitch_deg) const;

 private:
  struct Entry {
    CameraIntrinsics cam;
    double pitch;
    std::shared_ptr<const RayTable> table;
  };
  std::size_t capacity_;
  mutable std::mutex mutex_;
  mutable std::list<Entry> entries_;  // most recently used first
};

/// Process-wide renderer used by the free functions below.
const PerspectiveRenderer& default_renderer();

PerspImage render_perspective(const EquirectImage& img, const ViewRotation& rot, const CameraIntrinsics& cam);

/// Renders each request; output order matches input order. Throws LengthMismatch when
/// panoramas and rotations differ in length.
std::vector<PerspImage> render_batch(std::span<const EquirectImage* const> panoramas,
                                     std::span<const ViewRotation> rotations, const CameraIntrinsics& cam);

}  // namespace findview
