#include "findview/features.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>

#include "brief_pattern.hpp"
#include "findview/error.hpp"

namespace findview {

namespace {

constexpr std::array<std::array<int, 2>, 16> kCircle{{{0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1},
                                                      {2, 2}, {1, 3}, {0, 3}, {-1, 3}, {-2, 2}, {-3, 1},
                                                      {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}}};
constexpr int kArc = 9;
constexpr int kPatchRadius = 15;

bool has_arc(std::uint32_t mask16) {
  std::uint32_t m = mask16 | (mask16 << 16);
  for (int i = 1; i < kArc; ++i) m &= m >> 1;
  return m != 0;
}

// Returns the corner score (0 when not a corner).
int fast_score(const GrayImage& img, int x, int y, int t, const std::array<int, 16>& offsets) {
  const std::uint8_t* p = img.row(y) + x;
  const int c = *p;
  const int hi = c + t, lo = c - t;
  int compass_hi = 0, compass_lo = 0;
  for (int k = 0; k < 16; k += 4) {
    const int v = p[offsets[k]];
    compass_hi += v > hi;
    compass_lo += v < lo;
  }
  if (compass_hi < 2 && compass_lo < 2) return 0;

  std::uint32_t bright = 0, dark = 0;
  int sum_bright = 0, sum_dark = 0;
  for (int k = 0; k < 16; ++k) {
    const int v = p[offsets[k]];
    if (v > hi) {
      bright |= 1U << k;
      sum_bright += v - hi;
    } else if (v < lo) {
      dark |= 1U << k;
      sum_dark += lo - v;
    }
  }
  int score = 0;
  if (has_arc(bright)) score = std::max(score, sum_bright + 1);
  if (has_arc(dark)) score = std::max(score, sum_dark + 1);
  return score;
}

struct Gradients {
  int width = 0;
  std::vector<int> gx, gy;
};

// Sobel gradients; zero on the one-pixel border.
Gradients sobel(const GrayImage& img) {
  const int W = img.width(), H = img.height();
  Gradients g{W, std::vector<int>(static_cast<std::size_t>(W) * H), std::vector<int>(static_cast<std::size_t>(W) * H)};
  for (int y = 1; y < H - 1; ++y) {
    const std::uint8_t* up = img.row(y - 1);
    const std::uint8_t* mid = img.row(y);
    const std::uint8_t* dn = img.row(y + 1);
    for (int x = 1; x < W - 1; ++x) {
      const std::size_t k = static_cast<std::size_t>(y) * W + x;
      g.gx[k] = (up[x + 1] - up[x - 1]) + 2 * (mid[x + 1] - mid[x - 1]) + (dn[x + 1] - dn[x - 1]);
      g.gy[k] = (dn[x - 1] + 2 * dn[x] + dn[x + 1]) - (up[x - 1] + 2 * up[x] + up[x + 1]);
    }
  }
  return g;
}

float harris_response(const Gradients& g, int x, int y) {
  constexpr int r = 3;
  constexpr double k = 0.04;
  std::int64_t a = 0, b = 0, c = 0;
  for (int yy = y - r; yy <= y + r; ++yy) {
    const int* gx = g.gx.data() + static_cast<std::size_t>(yy) * g.width;
    const int* gy = g.gy.data() + static_cast<std::size_t>(yy) * g.width;
    for (int xx = x - r; xx <= x + r; ++xx) {
      a += gx[xx] * gx[xx];
      b += gy[xx] * gy[xx];
      c += gx[xx] * gy[xx];
    }
  }
  const double da = double(a), db = double(b), dc = double(c);
  return static_cast<float>(da * db - dc * dc - k * (da + db) * (da + db));
}

std::array<int, kPatchRadius + 1> circle_extent() {
  std::array<int, kPatchRadius + 1> umax{};
  for (int v = 0; v <= kPatchRadius; ++v) {
    umax[v] = static_cast<int>(std::floor(std::sqrt(double(kPatchRadius * kPatchRadius - v * v)) + 1e-9));
  }
  return umax;
}

float centroid_angle(const GrayImage& img, int x, int y) {
  static const auto umax = circle_extent();
  long m01 = 0, m10 = 0;
  for (int v = -kPatchRadius; v <= kPatchRadius; ++v) {
    const std::uint8_t* row = img.row(y + v);
    const int d = umax[std::abs(v)];
    for (int u = -d; u <= d; ++u) {
      const int val = row[x + u];
      m10 += u * val;
      m01 += v * val;
    }
  }
  double angle = std::atan2(double(m01), double(m10)) * 180.0 / std::numbers::pi;
  if (angle < 0) angle += 360.0;
  return static_cast<float>(angle);
}

GrayImage gaussian_blur(const GrayImage& img) {
  // sigma 2, 7 taps, weights in 1/65536 summing to 65536
  constexpr std::array<int, 7> w{4598, 8590, 12499, 14162, 12499, 8590, 4598};
  const int W = img.width(), H = img.height();
  std::vector<int> tmp(static_cast<std::size_t>(W) * H);
  for (int y = 0; y < H; ++y) {
    const std::uint8_t* row = img.row(y);
    int* dst = tmp.data() + static_cast<std::size_t>(y) * W;
    for (int x = 0; x < W; ++x) {
      int s = 0;
      if (x >= 3 && x < W - 3) {
        for (int k = -3; k <= 3; ++k) s += w[k + 3] * row[x + k];
      } else {
        for (int k = -3; k <= 3; ++k) s += w[k + 3] * row[std::clamp(x + k, 0, W - 1)];
      }
      dst[x] = s;
    }
  }
  GrayImage out(W, H);
  for (int y = 0; y < H; ++y) {
    std::array<const int*, 7> rows;
    for (int k = -3; k <= 3; ++k) rows[k + 3] = tmp.data() + static_cast<std::size_t>(std::clamp(y + k, 0, H - 1)) * W;
    std::uint8_t* dst = out.row(y);
    for (int x = 0; x < W; ++x) {
      std::int64_t s = 0;
      for (int k = 0; k < 7; ++k) s += std::int64_t(w[k]) * rows[k][x];
      dst[x] = static_cast<std::uint8_t>(std::clamp<std::int64_t>((s + (1LL << 31)) >> 32, 0, 255));
    }
  }
  return out;
}

// The sampling pattern steered to each whole-degree orientation.
using SteeredPattern = std::array<std::array<std::int8_t, 4>, 256>;

const std::array<SteeredPattern, 360>& steered_patterns() {
  static const auto table = [] {
    std::array<SteeredPattern, 360> t{};
    for (int deg = 0; deg < 360; ++deg) {
      const double a = deg * std::numbers::pi / 180.0;
      const double ca = std::cos(a), sa = std::sin(a);
      for (int i = 0; i < 256; ++i) {
        const auto& p = detail::kBriefPattern[i];
        for (int j = 0; j < 4; j += 2) {
          t[deg][i][j] = static_cast<std::int8_t>(std::lround(p[j] * ca - p[j + 1] * sa));
          t[deg][i][j + 1] = static_cast<std::int8_t>(std::lround(p[j] * sa + p[j + 1] * ca));
        }
      }
    }
    return t;
  }();
  return table;
}

void brief_descriptor(const GrayImage& blurred, int x, int y, float angle_deg, std::uint8_t* out) {
  const int bin = static_cast<int>(std::lround(angle_deg)) % 360;
  const SteeredPattern& pattern = steered_patterns()[bin];
  const int W = blurred.width();
  const std::uint8_t* center = blurred.row(y) + x;
  std::memset(out, 0, 32);
  for (int i = 0; i < 256; ++i) {
    const auto& p = pattern[i];
    if (center[p[1] * W + p[0]] < center[p[3] * W + p[2]]) out[i / 8] |= static_cast<std::uint8_t>(1U << (i % 8));
  }
}

}  // namespace

Features detect_and_compute(const GrayImage& img, const OrbConfig& cfg) {
  Features out;
  out.descriptor_bytes = 32;
  out.metric = DescriptorMetric::Hamming;
  const int W = img.width(), H = img.height();
  const int edge = std::max(cfg.edge, kPatchRadius + 4);
  if (W <= 2 * edge || H <= 2 * edge) return out;

  std::array<int, 16> offsets{};
  for (int k = 0; k < 16; ++k) offsets[k] = kCircle[k][1] * W + kCircle[k][0];

  // Scores over a band one pixel wider than the keypoint region so suppression sees neighbours.
  const int x0 = edge - 1, x1 = W - edge + 1, y0 = edge - 1, y1 = H - edge + 1;
  std::vector<int> score(static_cast<std::size_t>(W) * H, 0);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) score[static_cast<std::size_t>(y) * W + x] = fast_score(img, x, y, cfg.fast_threshold, offsets);

  struct Candidate {
    int x, y;
    float harris;
  };
  std::vector<Candidate> corners;
  const Gradients grad = sobel(img);
  for (int y = edge; y < H - edge; ++y) {
    for (int x = edge; x < W - edge; ++x) {
      const int s = score[static_cast<std::size_t>(y) * W + x];
      if (s == 0) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int n = score[static_cast<std::size_t>(y + dy) * W + x + dx];
          // Ties go to the earlier pixel in raster order.
          if (n > s || (n == s && (dy < 0 || (dy == 0 && dx < 0)))) {
            is_max = false;
            break;
          }
        }
      if (is_max) corners.push_back({x, y, harris_response(grad, x, y)});
    }
  }
  std::stable_sort(corners.begin(), corners.end(),
                   [](const Candidate& a, const Candidate& b) { return a.harris > b.harris; });
  if (static_cast<int>(corners.size()) > cfg.max_keypoints) corners.resize(static_cast<std::size_t>(cfg.max_keypoints));

  const GrayImage blurred = gaussian_blur(img);
  out.keypoints.reserve(corners.size());
  out.descriptors.resize(corners.size() * 32);
  for (std::size_t i = 0; i < corners.size(); ++i) {
    const auto& c = corners[i];
    const float angle = centroid_angle(img, c.x, c.y);
    out.keypoints.push_back({static_cast<float>(c.x), static_cast<float>(c.y), angle, c.harris});
    brief_descriptor(blurred, c.x, c.y, angle, out.descriptors.data() + i * 32);
  }
  return out;
}

int hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::SizeMismatch, "descriptor lengths differ");
  int d = 0;
  std::size_t i = 0;
  for (; i + 8 <= a.size(); i += 8) {
    std::uint64_t x, y;
    std::memcpy(&x, a.data() + i, 8);
    std::memcpy(&y, b.data() + i, 8);
    d += std::popcount(x ^ y);
  }
  for (; i < a.size(); ++i) d += std::popcount(static_cast<unsigned>(a[i] ^ b[i]));
  return d;
}

double descriptor_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b, DescriptorMetric m) {
  if (m == DescriptorMetric::Hamming) return hamming_distance(a, b);
  if (a.size() != b.size()) throw Error(ErrorCode::SizeMismatch, "descriptor lengths differ");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

std::vector<Match> knn_ratio_match(const Features& current, const Features& target, double ratio) {
  std::vector<Match> out;
  if (target.size() < 2 || current.size() == 0) return out;
  if (current.descriptor_bytes != target.descriptor_bytes || current.metric != target.metric) {
    throw Error(ErrorCode::SizeMismatch, "descriptor formats differ");
  }
  const bool fast = current.metric == DescriptorMetric::Hamming && current.descriptor_bytes == 32;
  for (std::size_t q = 0; q < current.size(); ++q) {
    double best = INFINITY, second = INFINITY;
    int best_idx = -1;
    if (fast) {
      std::uint64_t qa[4];
      std::memcpy(qa, current.descriptors.data() + q * 32, 32);
      const std::uint8_t* tp = target.descriptors.data();
      for (std::size_t t = 0; t < target.size(); ++t, tp += 32) {
        std::uint64_t tb[4];
        std::memcpy(tb, tp, 32);
        const int d = std::popcount(qa[0] ^ tb[0]) + std::popcount(qa[1] ^ tb[1]) + std::popcount(qa[2] ^ tb[2]) +
                      std::popcount(qa[3] ^ tb[3]);
        if (d < best) {
          second = best;
          best = d;
          best_idx = static_cast<int>(t);
        } else if (d < second) {
          second = d;
        }
      }
    } else {
      for (std::size_t t = 0; t < target.size(); ++t) {
        const double d = descriptor_distance(current.descriptor(q), target.descriptor(t), current.metric);
        if (d < best) {
          second = best;
          best = d;
          best_idx = static_cast<int>(t);
        } else if (d < second) {
          second = d;
        }
      }
    }
    if (best < ratio * second) out.push_back({static_cast<int>(q), best_idx, best});
  }
  return out;
}

}  // namespace findview
