#include "findview/projection.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>
#include <string>
#include <thread>

#include "findview/error.hpp"

namespace findview {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

inline double wrap_col(double col, int width) {
  const double w = width;
  if (col >= 0.0 && col < w) return col;
  double c = col - std::floor(col / w) * w;
  if (c >= w) c -= w;  // floor rounding at tiny negatives
  return c;
}

// Shared bilinear kernel; writes three channel values through Sink.
template <typename Sink>
inline void sample_into(const RgbImage& img, double col, double row, Sink&& sink) {
  const int w = img.width();
  const int h = img.height();
  col = wrap_col(col, w);
  row = std::clamp(row, 0.0, static_cast<double>(h - 1));

  const int x0 = static_cast<int>(col);
  const int y0 = static_cast<int>(row);
  const double fx = col - x0;
  const double fy = row - y0;
  const int x1 = x0 + 1 == w ? 0 : x0 + 1;
  const int y1 = std::min(y0 + 1, h - 1);

  const std::uint8_t* r0 = img.row(y0);
  const std::uint8_t* r1 = img.row(y1);
  const std::uint8_t* p00 = r0 + 3 * x0;
  const std::uint8_t* p01 = r0 + 3 * x1;
  const std::uint8_t* p10 = r1 + 3 * x0;
  const std::uint8_t* p11 = r1 + 3 * x1;
  const double w00 = (1.0 - fx) * (1.0 - fy);
  const double w01 = fx * (1.0 - fy);
  const double w10 = (1.0 - fx) * fy;
  const double w11 = fx * fy;
  for (int c = 0; c < 3; ++c) {
    sink(c, w00 * p00[c] + w01 * p01[c] + w10 * p10[c] + w11 * p11[c]);
  }
}

std::shared_ptr<RayTable> build_table(const CameraIntrinsics& cam, double pitch_deg) {
  auto table = std::make_shared<RayTable>();
  table->width = cam.width();
  table->height = cam.height();
  const std::size_t n = static_cast<std::size_t>(cam.width()) * cam.height();
  table->yaw_turns.resize(n);
  table->pitch_turns.resize(n);

  const ViewRotation level{pitch_deg, 0.0};
  std::size_t k = 0;
  for (int j = 0; j < cam.height(); ++j) {
    for (int i = 0; i < cam.width(); ++i, ++k) {
      const auto [vx, vy] = pixel_center(i, j);
      const SphereAngles a = direction_to_angles(pixel_ray(vx, vy, cam, level));
      table->yaw_turns[k] = a.yaw_deg / 360.0;
      table->pitch_turns[k] = (a.pitch_deg + 90.0) / 180.0;
    }
  }
  return table;
}

template <typename Sink>
void render_with(const RayTable& table, const EquirectImage& img, const ViewRotation& rot, Sink&& sink) {
  const RgbImage& src = img.pixels();
  const double w = src.width();
  const double h = src.height();
  const double yaw_shift = 0.5 + rot.yaw / 360.0;
  const std::size_t n = table.yaw_turns.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double col = (table.yaw_turns[k] + yaw_shift) * w;
    const double row = table.pitch_turns[k] * h;
    sample_into(src, col, row, [&](int c, double v) { sink(3 * k + c, v); });
  }
}

}  // namespace

double wrap_yaw(double yaw_deg) {
  double r = std::fmod(yaw_deg, 360.0);
  if (r <= -180.0) r += 360.0;
  if (r > 180.0) r -= 360.0;
  return r;
}

ViewRotation canonicalize(ViewRotation rot) {
  return {std::clamp(rot.pitch, -90.0, 90.0), wrap_yaw(rot.yaw)};
}

bool is_canonical(const ViewRotation& rot) {
  return rot.pitch >= -90.0 && rot.pitch <= 90.0 && rot.yaw > -180.0 && rot.yaw <= 180.0;
}

EquirectImage::EquirectImage(RgbImage pixels) : pixels_(std::move(pixels)) {
  if (pixels_.height() < 1 || pixels_.width() < 2) {
    throw Error(ErrorCode::InvalidSize, "panorama must be at least 2x1");
  }
  if (pixels_.width() != 2 * pixels_.height()) {
    throw Error(ErrorCode::BadAspect, "panorama is " + std::to_string(pixels_.width()) + "x" +
                                          std::to_string(pixels_.height()) + ", expected 2:1");
  }
}

double CameraIntrinsics::focal() const noexcept {
  return width_ / (2.0 * std::tan(fov_deg_ * kDegToRad / 2.0));
}

CameraIntrinsics make_intrinsics(double fov_deg, int width, int height) {
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) {
    throw Error(ErrorCode::InvalidFov, "fov must lie in (0, 180), got " + std::to_string(fov_deg));
  }
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidSize, "perspective size must be positive");
  }
  return CameraIntrinsics(fov_deg, width, height);
}

SphereDirection pixel_ray(double vx, double vy, const CameraIntrinsics& cam, const ViewRotation& rot) {
  const double f = cam.focal();
  // K^-1 v
  const double x = (vx - cam.cx()) / f;
  const double y = (vy - cam.cy()) / f;
  const double z = 1.0;

  // Pitch about x: positive pitch tilts +z toward -y (up).
  const double sp = std::sin(rot.pitch * kDegToRad);
  const double cp = std::cos(rot.pitch * kDegToRad);
  const double y1 = y * cp - z * sp;
  const double z1 = y * sp + z * cp;

  // Yaw about y: positive yaw turns +z toward +x (right).
  const double sy = std::sin(rot.yaw * kDegToRad);
  const double cy = std::cos(rot.yaw * kDegToRad);
  const double x2 = x * cy + z1 * sy;
  const double z2 = -x * sy + z1 * cy;

  const double norm = std::sqrt(x2 * x2 + y1 * y1 + z2 * z2);
  return {x2 / norm, y1 / norm, z2 / norm};
}

SphereAngles direction_to_angles(const SphereDirection& p) {
  const double norm = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
  const double s = std::clamp(-p.y / norm, -1.0, 1.0);
  return {std::atan2(p.x, p.z) * kRadToDeg, std::asin(s) * kRadToDeg};
}

SphereAngles pixel_to_sphere(double vx, double vy, const CameraIntrinsics& cam, const ViewRotation& rot) {
  return direction_to_angles(pixel_ray(vx, vy, cam, rot));
}

EquirectCoord sphere_to_equirect(double yaw_deg, double pitch_deg, int equi_width, int equi_height) {
  const double col = (yaw_deg * kDegToRad + std::numbers::pi) * (equi_width / (2.0 * std::numbers::pi));
  const double row = (pitch_deg * kDegToRad + std::numbers::pi / 2.0) * (equi_height / std::numbers::pi);
  return {wrap_col(col, equi_width), row};
}

std::array<double, 3> bilinear_sample(const RgbImage& img, double col, double row) {
  std::array<double, 3> out{};
  sample_into(img, col, row, [&](int c, double v) { out[c] = v; });
  return out;
}

std::uint8_t quantize(double v) noexcept {
  if (v >= 0.0 && v < 255.0) return static_cast<std::uint8_t>(v + 0.5);
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

PerspectiveRenderer::PerspectiveRenderer(std::size_t cache_capacity) : capacity_(std::max<std::size_t>(1, cache_capacity)) {}

std::shared_ptr<const RayTable> PerspectiveRenderer::table(const CameraIntrinsics& cam, double pitch_deg) const {
  {
    std::lock_guard lock(mutex_);
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
      if (it->cam == cam && it->pitch == pitch_deg) {
        entries_.splice(entries_.begin(), entries_, it);
        return entries_.front().table;
      }
    }
  }
  std::shared_ptr<const RayTable> built = build_table(cam, pitch_deg);
  std::lock_guard lock(mutex_);
  entries_.push_front({cam, pitch_deg, built});
  while (entries_.size() > capacity_) entries_.pop_back();
  return built;
}

PerspImage PerspectiveRenderer::render(const EquirectImage& img, const ViewRotation& rot,
                                       const CameraIntrinsics& cam) const {
  const auto t = table(cam, rot.pitch);
  PerspImage out(cam.width(), cam.height());
  std::uint8_t* dst = out.bytes().data();
  render_with(*t, img, rot, [dst](std::size_t idx, double v) { dst[idx] = quantize(v); });
  return out;
}

std::vector<double> PerspectiveRenderer::render_linear(const EquirectImage& img, const ViewRotation& rot,
                                                       const CameraIntrinsics& cam) const {
  const auto t = table(cam, rot.pitch);
  std::vector<double> out(static_cast<std::size_t>(cam.width()) * cam.height() * 3);
  render_with(*t, img, rot, [&out](std::size_t idx, double v) { out[idx] = v; });
  return out;
}

const PerspectiveRenderer& default_renderer() {
  static const PerspectiveRenderer renderer;
  return renderer;
}

PerspImage render_perspective(const EquirectImage& img, const ViewRotation& rot, const CameraIntrinsics& cam) {
  return default_renderer().render(img, rot, cam);
}

std::vector<PerspImage> render_batch(std::span<const EquirectImage* const> panoramas,
                                     std::span<const ViewRotation> rotations, const CameraIntrinsics& cam) {
  if (panoramas.size() != rotations.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(panoramas.size()) + " panoramas vs " +
                                               std::to_string(rotations.size()) + " rotations");
  }
  std::vector<PerspImage> out(panoramas.size());
  const std::size_t workers =
      std::min<std::size_t>(panoramas.size(), std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < panoramas.size(); ++i) out[i] = render_perspective(*panoramas[i], rotations[i], cam);
    return out;
  }
  std::vector<std::future<void>> jobs;
  jobs.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < panoramas.size(); i += workers) {
        out[i] = render_perspective(*panoramas[i], rotations[i], cam);
      }
    }));
  }
  for (auto& j : jobs) j.get();
  return out;
}

}  // namespace findview
