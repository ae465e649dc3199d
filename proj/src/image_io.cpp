#include "findview/image_io.hpp"

#include <cstring>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "findview/error.hpp"

namespace findview {

namespace {

RgbImage from_bgr(const cv::Mat& decoded) {
  cv::Mat rgb;
  if (decoded.channels() == 1) {
    cv::cvtColor(decoded, rgb, cv::COLOR_GRAY2RGB);
  } else if (decoded.channels() == 4) {
    cv::cvtColor(decoded, rgb, cv::COLOR_BGRA2RGB);
  } else {
    cv::cvtColor(decoded, rgb, cv::COLOR_BGR2RGB);
  }
  if (rgb.depth() != CV_8U) rgb.convertTo(rgb, CV_8U);
  RgbImage out(rgb.cols, rgb.rows);
  for (int y = 0; y < rgb.rows; ++y) std::memcpy(out.row(y), rgb.ptr(y), static_cast<std::size_t>(rgb.cols) * 3);
  return out;
}

cv::Mat to_bgr(const RgbImage& img) {
  // cv::Mat wants a non-const pointer; the clone below never writes through it.
  cv::Mat rgb(img.height(), img.width(), CV_8UC3, const_cast<std::uint8_t*>(img.bytes().data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

}  // namespace

RgbImage load_image(const std::filesystem::path& path) {
  cv::Mat decoded = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (decoded.empty()) throw Error(ErrorCode::Io, "cannot decode image " + path.string());
  return from_bgr(decoded);
}

void save_image(const RgbImage& img, const std::filesystem::path& path) {
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), to_bgr(img));
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::Io, "cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

RgbImage decode_image(std::span<const std::uint8_t> encoded) {
  cv::Mat buf(1, static_cast<int>(encoded.size()), CV_8UC1, const_cast<std::uint8_t*>(encoded.data()));
  cv::Mat decoded = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (decoded.empty()) throw Error(ErrorCode::Io, "cannot decode image buffer");
  return from_bgr(decoded);
}

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", to_bgr(img), out)) throw Error(ErrorCode::Io, "png encode failed");
  return out;
}

std::vector<std::uint8_t> encode_jpeg(const RgbImage& img, int quality) {
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".jpg", to_bgr(img), out, {cv::IMWRITE_JPEG_QUALITY, quality})) {
    throw Error(ErrorCode::Io, "jpeg encode failed");
  }
  return out;
}

std::optional<std::pair<int, int>> probe_image_size(const std::filesystem::path& path) {
  cv::Mat decoded = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (decoded.empty()) return std::nullopt;
  return std::make_pair(decoded.cols, decoded.rows);
}

}  // namespace findview
