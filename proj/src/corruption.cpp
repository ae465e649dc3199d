#include "findview/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "findview/error.hpp"
#include "findview/random.hpp"

namespace findview {

namespace {

struct KindInfo {
  CorruptionKind kind;
  std::string_view name;
  CorruptionCategory category;
};

constexpr std::array<KindInfo, 16> kKinds{{
    {CorruptionKind::MotionBlur, "motion-blur", CorruptionCategory::Blur},
    {CorruptionKind::DefocusBlur, "defocus-blur", CorruptionCategory::Blur},
    {CorruptionKind::GlassBlur, "glass-blur", CorruptionCategory::Blur},
    {CorruptionKind::GaussianBlur, "gaussian-blur", CorruptionCategory::Blur},
    {CorruptionKind::GaussianNoise, "gaussian-noise", CorruptionCategory::Noise},
    {CorruptionKind::ImpulseNoise, "impulse-noise", CorruptionCategory::Noise},
    {CorruptionKind::ShotNoise, "shot-noise", CorruptionCategory::Noise},
    {CorruptionKind::SpeckleNoise, "speckle-noise", CorruptionCategory::Noise},
    {CorruptionKind::Brightness, "brightness", CorruptionCategory::Digital},
    {CorruptionKind::Contrast, "contrast", CorruptionCategory::Digital},
    {CorruptionKind::Saturation, "saturation", CorruptionCategory::Digital},
    {CorruptionKind::JpegCompression, "jpeg-compression", CorruptionCategory::Digital},
    {CorruptionKind::Snow, "snow", CorruptionCategory::Weather},
    {CorruptionKind::Spatter, "spatter", CorruptionCategory::Weather},
    {CorruptionKind::Fog, "fog", CorruptionCategory::Weather},
    {CorruptionKind::Frost, "frost", CorruptionCategory::Weather},
}};

const KindInfo& info(CorruptionKind kind) {
  for (const auto& k : kKinds)
    if (k.kind == kind) return k;
  throw Error(ErrorCode::UnknownCorruption, "unknown corruption kind");
}

// Per-severity parameter columns.
struct Column {
  std::string_view name;
  std::array<double, 5> values;
};

struct ParamTable {
  CorruptionKind kind;
  std::vector<Column> columns;
};

const std::vector<ParamTable>& param_tables() {
  static const std::vector<ParamTable> tables{
      {CorruptionKind::MotionBlur, {{"length_px", {5, 9, 13, 17, 23}}, {"sigma_px", {2, 3, 4.5, 6, 8}}}},
      {CorruptionKind::DefocusBlur, {{"radius_px", {2, 3, 4, 6, 8}}, {"alias_sigma", {0.5, 0.5, 0.5, 0.5, 0.5}}}},
      {CorruptionKind::GlassBlur,
       {{"sigma", {0.7, 0.9, 1.0, 1.1, 1.5}}, {"max_delta", {1, 2, 2, 3, 4}}, {"iterations", {1, 1, 2, 2, 3}}}},
      {CorruptionKind::GaussianBlur, {{"sigma", {1, 2, 3, 4, 6}}}},
      {CorruptionKind::GaussianNoise, {{"sigma", {0.08, 0.12, 0.18, 0.26, 0.38}}}},
      {CorruptionKind::ImpulseNoise, {{"amount", {0.03, 0.06, 0.09, 0.17, 0.27}}}},
      {CorruptionKind::ShotNoise, {{"photons", {60, 25, 12, 5, 3}}}},
      {CorruptionKind::SpeckleNoise, {{"sigma", {0.15, 0.2, 0.35, 0.45, 0.6}}}},
      {CorruptionKind::Brightness, {{"value_shift", {0.1, 0.2, 0.3, 0.4, 0.5}}}},
      {CorruptionKind::Contrast, {{"factor", {0.4, 0.3, 0.2, 0.1, 0.05}}}},
      {CorruptionKind::Saturation, {{"saturation_scale", {0.7, 0.5, 0.3, 0.15, 0.0}}}},
      {CorruptionKind::JpegCompression, {{"quality", {25, 18, 15, 10, 7}}}},
      {CorruptionKind::Snow,
       {{"flake_density", {0.01, 0.02, 0.03, 0.045, 0.06}},
        {"streak_px", {5, 7, 9, 11, 13}},
        {"whiten", {0.1, 0.2, 0.3, 0.4, 0.5}}}},
      {CorruptionKind::Spatter,
       {{"coverage", {0.06, 0.12, 0.18, 0.26, 0.35}}, {"opacity", {0.5, 0.6, 0.65, 0.7, 0.8}}}},
      {CorruptionKind::Fog, {{"blend", {0.25, 0.35, 0.45, 0.55, 0.7}}, {"scale_px", {64, 64, 48, 48, 32}}}},
      {CorruptionKind::Frost, {{"image_weight", {0.75, 0.65, 0.55, 0.45, 0.35}}, {"frost_weight", {0.25, 0.35, 0.45, 0.55, 0.65}}}},
  };
  return tables;
}

void check_severity(int severity) {
  if (severity < 1 || severity > 5) {
    throw Error(ErrorCode::InvalidSeverity, "severity must be 1..5, got " + std::to_string(severity));
  }
}

// Float image in [0, 1], 3 channels, RGB order.
cv::Mat to_float(const RgbImage& img) {
  cv::Mat u8(img.height(), img.width(), CV_8UC3, const_cast<std::uint8_t*>(img.bytes().data()));
  cv::Mat f;
  u8.convertTo(f, CV_32FC3, 1.0 / 255.0);
  return f;
}

RgbImage from_float(const cv::Mat& f) {
  RgbImage out(f.cols, f.rows);
  for (int y = 0; y < f.rows; ++y) {
    const float* src = f.ptr<float>(y);
    std::uint8_t* dst = out.row(y);
    for (int x = 0; x < f.cols * 3; ++x) {
      const float v = std::clamp(src[x], 0.0f, 1.0f) * 255.0f;
      dst[x] = static_cast<std::uint8_t>(std::floor(v + 0.5f));
    }
  }
  return out;
}

cv::Mat gray_of(const cv::Mat& rgb) {
  cv::Mat g;
  cv::cvtColor(rgb, g, cv::COLOR_RGB2GRAY);
  return g;
}

// Multi-octave value noise in [0, 1].
cv::Mat fractal_noise(int w, int h, Rng& rng, double base_scale, int octaves, double persistence) {
  cv::Mat acc = cv::Mat::zeros(h, w, CV_32F);
  double amp = 1.0, total = 0.0, scale = base_scale;
  for (int o = 0; o < octaves; ++o) {
    const int gw = std::max(2, static_cast<int>(std::ceil(w / scale)) + 2);
    const int gh = std::max(2, static_cast<int>(std::ceil(h / scale)) + 2);
    cv::Mat grid(gh, gw, CV_32F);
    for (int y = 0; y < gh; ++y)
      for (int x = 0; x < gw; ++x) grid.at<float>(y, x) = static_cast<float>(uniform01(rng));
    cv::Mat up;
    cv::resize(grid, up, cv::Size(static_cast<int>(gw * scale), static_cast<int>(gh * scale)), 0, 0, cv::INTER_CUBIC);
    acc += up(cv::Rect(0, 0, w, h)) * amp;
    total += amp;
    amp *= persistence;
    scale = std::max(1.0, scale / 2.0);
  }
  acc /= total;
  cv::normalize(acc, acc, 0.0, 1.0, cv::NORM_MINMAX);
  return acc;
}

cv::Mat motion_kernel(double length, double sigma, double angle_rad) {
  const int half = static_cast<int>(std::ceil(length / 2.0));
  const int size = 2 * half + 1;
  cv::Mat k = cv::Mat::zeros(size, size, CV_32F);
  const double dx = std::cos(angle_rad), dy = std::sin(angle_rad);
  // One-sided streak, Gaussian-weighted along its length.
  for (int i = 0; i <= static_cast<int>(length); ++i) {
    const double w = std::exp(-(i * i) / (2.0 * sigma * sigma));
    const int x = half + static_cast<int>(std::lround(i * dx * half / std::max(1.0, length)));
    const int y = half + static_cast<int>(std::lround(i * dy * half / std::max(1.0, length)));
    k.at<float>(std::clamp(y, 0, size - 1), std::clamp(x, 0, size - 1)) += static_cast<float>(w);
  }
  k /= cv::sum(k)[0];
  return k;
}

cv::Mat disk_kernel(double radius, double alias_sigma) {
  const int r = static_cast<int>(std::ceil(radius));
  const int size = 2 * r + 1;
  cv::Mat k = cv::Mat::zeros(size, size, CV_32F);
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x)
      if (x * x + y * y <= radius * radius) k.at<float>(y + r, x + r) = 1.0f;
  k /= cv::sum(k)[0];
  cv::GaussianBlur(k, k, cv::Size(3, 3), alias_sigma);
  k /= cv::sum(k)[0];
  return k;
}

cv::Mat apply_hsv(const cv::Mat& rgb, int channel, double scale, double shift) {
  cv::Mat hsv;
  cv::cvtColor(rgb, hsv, cv::COLOR_RGB2HSV);  // float: H in [0,360), S,V in [0,1]
  std::vector<cv::Mat> planes;
  cv::split(hsv, planes);
  planes[channel] = planes[channel] * scale + shift;
  cv::min(planes[channel], 1.0, planes[channel]);
  cv::max(planes[channel], 0.0, planes[channel]);
  cv::merge(planes, hsv);
  cv::Mat out;
  cv::cvtColor(hsv, out, cv::COLOR_HSV2RGB);
  return out;
}

}  // namespace

std::string_view to_string(CorruptionKind kind) { return info(kind).name; }

std::optional<CorruptionKind> parse_corruption_kind(std::string_view name) {
  for (const auto& k : kKinds)
    if (k.name == name) return k.kind;
  return std::nullopt;
}

CorruptionCategory category_of(CorruptionKind kind) { return info(kind).category; }

double ParamRecord::get(std::string_view name) const {
  for (const auto& [k, v] : fields)
    if (k == name) return v;
  throw Error(ErrorCode::InvalidSpec, "no corruption parameter named " + std::string(name));
}

ParamRecord severity_params(CorruptionKind kind, int severity) {
  check_severity(severity);
  for (const auto& t : param_tables()) {
    if (t.kind != kind) continue;
    ParamRecord rec;
    for (const auto& c : t.columns) rec.fields.emplace_back(std::string(c.name), c.values[severity - 1]);
    return rec;
  }
  throw Error(ErrorCode::UnknownCorruption, "no parameters for kind");
}

CorruptionSpec parse_corruption_arg(std::string_view text, std::uint64_t seed) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) throw Error(ErrorCode::Parse, "expected kind:severity, got " + std::string(text));
  const auto kind = parse_corruption_kind(text.substr(0, colon));
  if (!kind) throw Error(ErrorCode::UnknownCorruption, std::string(text.substr(0, colon)));
  int severity = 0;
  try {
    severity = std::stoi(std::string(text.substr(colon + 1)));
  } catch (const std::exception&) {
    throw Error(ErrorCode::Parse, "bad severity in " + std::string(text));
  }
  check_severity(severity);
  return {*kind, severity, seed};
}

RgbImage corrupt(const RgbImage& img, const CorruptionSpec& spec) {
  check_severity(spec.severity);
  const ParamRecord p = severity_params(spec.kind, spec.severity);
  if (img.width() == 0 || img.height() == 0) return img;
  Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(spec.kind)));
  const int w = img.width(), h = img.height();
  cv::Mat x = to_float(img);
  cv::Mat out;

  switch (spec.kind) {
    case CorruptionKind::MotionBlur: {
      const double angle = uniform_real(rng, -std::numbers::pi, std::numbers::pi);
      cv::filter2D(x, out, -1, motion_kernel(p.get("length_px"), p.get("sigma_px"), angle), cv::Point(-1, -1), 0,
                   cv::BORDER_REFLECT);
      break;
    }
    case CorruptionKind::DefocusBlur:
      cv::filter2D(x, out, -1, disk_kernel(p.get("radius_px"), p.get("alias_sigma")), cv::Point(-1, -1), 0,
                   cv::BORDER_REFLECT);
      break;
    case CorruptionKind::GlassBlur: {
      const double sigma = p.get("sigma");
      const int delta = static_cast<int>(p.get("max_delta"));
      const int iterations = static_cast<int>(p.get("iterations"));
      cv::GaussianBlur(x, out, cv::Size(0, 0), sigma);
      // Local pixel shuffling, as through frosted glass.
      for (int it = 0; it < iterations; ++it) {
        for (int y = h - delta - 1; y >= delta; --y) {
          for (int xx = w - delta - 1; xx >= delta; --xx) {
            const int dx = static_cast<int>(uniform_int(rng, -delta, delta - 1));
            const int dy = static_cast<int>(uniform_int(rng, -delta, delta - 1));
            std::swap(out.at<cv::Vec3f>(y, xx), out.at<cv::Vec3f>(y + dy, xx + dx));
          }
        }
      }
      cv::GaussianBlur(out, out, cv::Size(0, 0), sigma);
      break;
    }
    case CorruptionKind::GaussianBlur:
      cv::GaussianBlur(x, out, cv::Size(0, 0), p.get("sigma"));
      break;
    case CorruptionKind::GaussianNoise: {
      const double sigma = p.get("sigma");
      out = x.clone();
      for (int y = 0; y < h; ++y) {
        float* row = out.ptr<float>(y);
        for (int i = 0; i < w * 3; ++i) row[i] += static_cast<float>(sigma * standard_normal(rng));
      }
      break;
    }
    case CorruptionKind::ImpulseNoise: {
      const double amount = p.get("amount");
      out = x.clone();
      for (int y = 0; y < h; ++y) {
        float* row = out.ptr<float>(y);
        for (int i = 0; i < w * 3; ++i) {
          if (uniform01(rng) < amount) row[i] = uniform01(rng) < 0.5 ? 0.0f : 1.0f;
        }
      }
      break;
    }
    case CorruptionKind::ShotNoise: {
      const double photons = p.get("photons");
      out = x.clone();
      for (int y = 0; y < h; ++y) {
        float* row = out.ptr<float>(y);
        for (int i = 0; i < w * 3; ++i) {
          row[i] = static_cast<float>(static_cast<double>(poisson(rng, row[i] * photons)) / photons);
        }
      }
      break;
    }
    case CorruptionKind::SpeckleNoise: {
      const double sigma = p.get("sigma");
      out = x.clone();
      for (int y = 0; y < h; ++y) {
        float* row = out.ptr<float>(y);
        for (int i = 0; i < w * 3; ++i) row[i] += static_cast<float>(row[i] * sigma * standard_normal(rng));
      }
      break;
    }
    case CorruptionKind::Brightness:
      out = apply_hsv(x, 2, 1.0, p.get("value_shift"));
      break;
    case CorruptionKind::Contrast: {
      const double factor = p.get("factor");
      cv::Scalar mean = cv::mean(x);
      const double m = (mean[0] + mean[1] + mean[2]) / 3.0;
      out = (x - cv::Scalar::all(m)) * factor + cv::Scalar::all(m);
      break;
    }
    case CorruptionKind::Saturation:
      out = apply_hsv(x, 1, p.get("saturation_scale"), 0.0);
      break;
    case CorruptionKind::JpegCompression: {
      cv::Mat bgr;
      cv::Mat u8(h, w, CV_8UC3, const_cast<std::uint8_t*>(img.bytes().data()));
      cv::cvtColor(u8, bgr, cv::COLOR_RGB2BGR);
      std::vector<std::uint8_t> buf;
      cv::imencode(".jpg", bgr, buf, {cv::IMWRITE_JPEG_QUALITY, static_cast<int>(p.get("quality"))});
      cv::Mat decoded = cv::imdecode(buf, cv::IMREAD_COLOR);
      cv::cvtColor(decoded, decoded, cv::COLOR_BGR2RGB);
      decoded.convertTo(out, CV_32FC3, 1.0 / 255.0);
      break;
    }
    case CorruptionKind::Snow: {
      const double density = p.get("flake_density");
      const double whiten = p.get("whiten");
      cv::Mat flakes = cv::Mat::zeros(h, w, CV_32F);
      for (int y = 0; y < h; ++y) {
        float* row = flakes.ptr<float>(y);
        for (int i = 0; i < w; ++i)
          if (uniform01(rng) < density) row[i] = static_cast<float>(0.6 + 0.4 * uniform01(rng));
      }
      // Streaks fall at a common angle near vertical.
      const double angle = std::numbers::pi / 2.0 + uniform_real(rng, -0.5, 0.5);
      cv::Mat streaks;
      cv::filter2D(flakes, streaks, -1, motion_kernel(p.get("streak_px"), p.get("streak_px") / 2.0, angle));
      streaks *= 2.5;
      cv::Mat g = gray_of(x);
      cv::Mat lifted;
      cv::Mat g_lift = g * 1.5 + 0.5;
      cv::Mat g3;
      cv::cvtColor(g_lift, g3, cv::COLOR_GRAY2RGB);
      cv::max(x, g3, lifted);
      out = x * (1.0 - whiten) + lifted * whiten;
      cv::Mat s3;
      cv::cvtColor(streaks, s3, cv::COLOR_GRAY2RGB);
      out += s3;
      break;
    }
    case CorruptionKind::Spatter: {
      const double coverage = p.get("coverage");
      const double opacity = p.get("opacity");
      cv::Mat field = fractal_noise(w, h, rng, 12.0, 3, 0.5);
      // Threshold at the (1 - coverage) quantile so the wet fraction tracks the parameter.
      std::vector<float> vals(field.begin<float>(), field.end<float>());
      const std::size_t q = static_cast<std::size_t>((1.0 - coverage) * (vals.size() - 1));
      std::nth_element(vals.begin(), vals.begin() + q, vals.end());
      const float cut = vals[q];
      cv::Mat mask;
      cv::threshold(field, mask, cut, 1.0, cv::THRESH_BINARY);
      cv::GaussianBlur(mask, mask, cv::Size(0, 0), 1.5);
      const cv::Vec3f mud(0.25f, 0.17f, 0.09f);
      out = x.clone();
      for (int y = 0; y < h; ++y) {
        const float* m = mask.ptr<float>(y);
        auto* px = out.ptr<cv::Vec3f>(y);
        for (int i = 0; i < w; ++i) {
          const float a = static_cast<float>(opacity) * m[i];
          px[i] = px[i] * (1.0f - a) + mud * a;
        }
      }
      break;
    }
    case CorruptionKind::Fog: {
      const double blend = p.get("blend");
      cv::Mat haze = fractal_noise(w, h, rng, p.get("scale_px"), 4, 0.6);
      haze = 0.5 + 0.5 * haze;
      out = x.clone();
      for (int y = 0; y < h; ++y) {
        const float* m = haze.ptr<float>(y);
        auto* px = out.ptr<cv::Vec3f>(y);
        for (int i = 0; i < w; ++i) {
          const float a = static_cast<float>(blend) * m[i];
          px[i] = px[i] * (1.0f - a) + cv::Vec3f(0.85f, 0.87f, 0.9f) * a;
        }
      }
      break;
    }
    case CorruptionKind::Frost: {
      // Procedural ice: sharpened high-frequency noise over a coarse bright mask.
      cv::Mat fine = fractal_noise(w, h, rng, 3.0, 3, 0.7);
      cv::Mat coarse = fractal_noise(w, h, rng, 40.0, 2, 0.5);
      cv::Mat crystals;
      cv::Laplacian(fine, crystals, CV_32F, 3);
      crystals = cv::abs(crystals);
      cv::normalize(crystals, crystals, 0.0, 1.0, cv::NORM_MINMAX);
      cv::Mat ice = 0.55 * coarse + 0.45 * crystals;
      cv::Mat ice3;
      cv::cvtColor(ice, ice3, cv::COLOR_GRAY2RGB);
      ice3 = ice3.mul(cv::Scalar(0.92, 0.96, 1.0));
      out = x * p.get("image_weight") + ice3 * p.get("frost_weight");
      break;
    }
  }
  return from_float(out);
}

}  // namespace findview
