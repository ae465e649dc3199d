#include "findview/image.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "findview/error.hpp"

namespace findview {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidFov: return "invalid-fov";
    case ErrorCode::InvalidSize: return "invalid-size";
    case ErrorCode::LengthMismatch: return "length-mismatch";
    case ErrorCode::InvalidSeverity: return "invalid-severity";
    case ErrorCode::UnknownCorruption: return "unknown-corruption";
    case ErrorCode::InvalidSpec: return "invalid-spec";
    case ErrorCode::MissingPanorama: return "missing-panorama";
    case ErrorCode::StepAfterDone: return "step-after-done";
    case ErrorCode::InfeasibleDifficulty: return "infeasible-difficulty";
    case ErrorCode::OffGrid: return "off-grid";
    case ErrorCode::EmptyInput: return "empty-input";
    case ErrorCode::EmptyDirectory: return "empty-directory";
    case ErrorCode::BadAspect: return "bad-aspect";
    case ErrorCode::SizeMismatch: return "size-mismatch";
    case ErrorCode::ProtocolViolation: return "protocol-violation";
    case ErrorCode::BindFailure: return "bind-failure";
    case ErrorCode::Io: return "io";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::ContractViolation: return "contract-violation";
    case ErrorCode::AgentCrash: return "agent-crash";
  }
  return "unknown";
}

RgbImage::RgbImage(int width, int height) : RgbImage(width, height, Rgb{}) {}

RgbImage::RgbImage(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw Error(ErrorCode::InvalidSize, "negative image dimensions");
  data_.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
  }
}

RgbImage::RgbImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 0 || height < 0 || data_.size() != static_cast<std::size_t>(width) * height * 3) {
    throw Error(ErrorCode::InvalidSize, "pixel buffer does not match " + std::to_string(width) + "x" +
                                            std::to_string(height));
  }
}

GrayImage to_gray(const RgbImage& img) {
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    const std::uint8_t* src = img.row(y);
    std::uint8_t* dst = out.row(y);
    for (int x = 0; x < img.width(); ++x, src += 3) {
      // Fixed-point 0.299/0.587/0.114 with rounding.
      dst[x] = static_cast<std::uint8_t>((src[0] * 4899 + src[1] * 9617 + src[2] * 1868 + 8192) >> 14);
    }
  }
  return out;
}

double mean_abs_diff(const RgbImage& a, const RgbImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::SizeMismatch, "mean_abs_diff on differently sized images");
  }
  if (a.byte_size() == 0) return 0.0;
  auto pa = a.bytes();
  auto pb = b.bytes();
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < pa.size(); ++i) sum += static_cast<std::uint64_t>(std::abs(int(pa[i]) - int(pb[i])));
  return static_cast<double>(sum) / static_cast<double>(pa.size());
}

}  // namespace findview
