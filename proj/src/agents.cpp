#include "findview/agents.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "findview/error.hpp"
#include "findview/image_io.hpp"
#include "findview/subprocess.hpp"

namespace findview {

namespace {

bool opposing(Action a, Action b) {
  return (a == Action::Left && b == Action::Right) || (a == Action::Right && b == Action::Left) ||
         (a == Action::Up && b == Action::Down) || (a == Action::Down && b == Action::Up);
}

std::uint64_t content_hash(const GrayImage& img) {
  // FNV-1a over 8-byte words, seeded with the dimensions.
  std::uint64_t h = 0xcbf29ce484222325ULL ^ (static_cast<std::uint64_t>(img.width()) << 32 | img.height());
  const auto bytes = img.bytes();
  std::size_t i = 0;
  for (; i + 8 <= bytes.size(); i += 8) {
    std::uint64_t w;
    std::memcpy(&w, bytes.data() + i, 8);
    h = (h ^ w) * 0x100000001b3ULL;
    h ^= h >> 29;
  }
  for (; i < bytes.size(); ++i) h = (h ^ bytes[i]) * 0x100000001b3ULL;
  return h;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

void RuleAgentConfig::validate() const {
  if (n_kps < 1) throw Error(ErrorCode::InvalidSpec, "n_kps must be >= 1");
  if (n_matches < 1) throw Error(ErrorCode::InvalidSpec, "n_matches must be >= 1");
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorCode::InvalidSpec, "ratio must be in (0, 1)");
  if (!(zero_px > 0.0)) throw Error(ErrorCode::InvalidSpec, "zero_px must be positive");
  if (sweep_default != Action::Left && sweep_default != Action::Right) {
    throw Error(ErrorCode::InvalidSpec, "sweep direction must be left or right");
  }
  if (oscillation_window < 2) throw Error(ErrorCode::InvalidSpec, "oscillation window must be >= 2");
  if (d_thresh && !(*d_thresh >= 0.0)) throw Error(ErrorCode::InvalidSpec, "d_thresh must be non-negative");
}

Action consensus(std::span<const Match> matches, const Features& current, const Features& target, Action fallback,
                 const RuleAgentConfig& cfg) {
  std::array<int, 5> counts{};
  std::array<int, 5> first_seen{};
  first_seen.fill(-1);
  int n = 0;
  for (const Match& m : matches) {
    if (cfg.d_thresh && m.distance > *cfg.d_thresh) continue;
    const Keypoint& c = current.keypoints[static_cast<std::size_t>(m.query)];
    const Keypoint& t = target.keypoints[static_cast<std::size_t>(m.train)];
    const double dx = double(c.x) - double(t.x);
    const double dy = double(t.y) - double(c.y);
    Action vote;
    if (std::abs(dx) <= cfg.zero_px && std::abs(dy) <= cfg.zero_px) {
      vote = Action::Stop;
    } else if (std::abs(dx) > std::abs(dy)) {
      vote = dx > 0 ? Action::Right : Action::Left;
    } else {
      vote = dy > 0 ? Action::Up : Action::Down;
    }
    const auto k = static_cast<std::size_t>(vote);
    if (first_seen[k] < 0) first_seen[k] = n;
    ++counts[k];
    ++n;
  }
  if (n == 0) return fallback;
  int best = -1;
  for (int k = 0; k < 5; ++k) {
    if (counts[k] == 0) continue;
    if (best < 0 || counts[k] > counts[best] || (counts[k] == counts[best] && first_seen[k] < first_seen[best])) best = k;
  }
  return static_cast<Action>(best);
}

bool is_repeated(std::span<const Action> history, int window) {
  if (window < 2 || history.size() < static_cast<std::size_t>(window)) return false;
  const auto tail = history.subspan(history.size() - static_cast<std::size_t>(window));
  for (std::size_t i = 1; i < tail.size(); ++i) {
    if (!opposing(tail[i - 1], tail[i])) return false;
  }
  return true;
}

Action fallback_action(const RuleAgentState& state, const RuleAgentConfig& cfg) {
  if (state.previous && is_movement(*state.previous)) return *state.previous;
  return cfg.sweep_default;
}

Action oracle_act(const ViewRotation& current, const ViewRotation& target) {
  const double dp = target.pitch - current.pitch;
  const double dy = wrap_yaw(target.yaw - current.yaw);
  if (dp == 0.0 && dy == 0.0) return Action::Stop;
  if (std::abs(dp) >= std::abs(dy)) return dp > 0 ? Action::Up : Action::Down;
  return dy > 0 ? Action::Right : Action::Left;
}

std::shared_ptr<const Features> FeatureCache::get_or_compute(const GrayImage& img, const FeatureDetector& detector) {
  const std::uint64_t key = content_hash(img);
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  auto features = std::make_shared<const Features>(detector.detect(img));
  std::lock_guard lock(mutex_);
  if (entries_.size() >= capacity_) entries_.clear();
  return entries_.try_emplace(key, std::move(features)).first->second;
}

std::size_t FeatureCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

RuleAgent::RuleAgent(RuleAgentConfig cfg, std::shared_ptr<const FeatureDetector> detector,
                     std::shared_ptr<FeatureCache> cache)
    : cfg_(cfg), detector_(std::move(detector)), cache_(std::move(cache)) {
  cfg_.validate();
  if (!detector_) detector_ = std::make_shared<OrbDetector>();
}

void RuleAgent::reset() {
  state_ = {};
  cached_target_ = nullptr;
  target_owner_.reset();
  target_features_.reset();
}

std::shared_ptr<const Features> RuleAgent::features_of(const PerspImage& img) {
  const GrayImage gray = to_gray(img);
  if (cache_) return cache_->get_or_compute(gray, *detector_);
  return std::make_shared<const Features>(detector_->detect(gray));
}

Action RuleAgent::decide(const Observation& obs) {
  if (!obs.target) throw Error(ErrorCode::ContractViolation, "observation without target image");
  if (obs.target.get() != cached_target_ || !target_features_) {
    target_owner_ = obs.target;
    cached_target_ = obs.target.get();
    target_features_ = features_of(*obs.target);
  }
  const Action fallback = fallback_action(state_, cfg_);
  const auto current = features_of(obs.current);
  if (static_cast<int>(current->size()) < cfg_.n_kps || static_cast<int>(target_features_->size()) < cfg_.n_kps) {
    return fallback;
  }
  const auto matches = knn_ratio_match(*current, *target_features_, cfg_.ratio);
  if (static_cast<int>(matches.size()) < cfg_.n_matches) return fallback;
  return consensus(matches, *current, *target_features_, fallback, cfg_);
}

Action RuleAgent::estimate_action(const Observation& obs) {
  Action a = decide(obs);
  state_.history.push_back(a);
  if (is_repeated(state_.history, cfg_.oscillation_window)) {
    a = Action::Stop;
    state_.history.back() = a;
  }
  state_.previous = a;
  return a;
}

Action OracleAgent::act(const AgentInput& input) {
  if (!input.rotation || !input.target) {
    throw Error(ErrorCode::ContractViolation, "oracle agent needs evaluator-only rotations");
  }
  return oracle_act(*input.rotation, *input.target);
}

ExternalDetector::ExternalDetector(std::vector<std::string> argv, DescriptorMetric metric)
    : argv_(std::move(argv)), metric_(metric) {
  if (argv_.empty()) throw Error(ErrorCode::InvalidSpec, "external detector needs a command");
}

Features ExternalDetector::detect(const GrayImage& img) const {
  RgbImage rgb(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) rgb.set(x, y, {img(x, y), img(x, y), img(x, y)});
  const auto png = encode_png(rgb);
  const ProcessResult r = run_process(argv_, png);
  if (r.exit_code != 0) {
    throw Error(ErrorCode::Io, "external detector exited with status " + std::to_string(r.exit_code));
  }
  Features f = parse_keypoint_lines(std::string_view(reinterpret_cast<const char*>(r.out.data()), r.out.size()),
                                    metric_);
  for (const auto& k : f.keypoints) {
    if (k.x < 0 || k.y < 0 || k.x >= img.width() || k.y >= img.height()) {
      throw Error(ErrorCode::Parse, "external detector returned a keypoint outside the image");
    }
  }
  return f;
}

Features parse_keypoint_lines(std::string_view text, DescriptorMetric metric) {
  Features f;
  f.metric = metric;
  f.descriptor_bytes = -1;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::istringstream fields(line);
    Keypoint k;
    std::string hex;
    if (!(fields >> k.x >> k.y >> k.angle >> k.response >> hex) || hex.size() % 2 != 0 || hex.empty()) {
      throw Error(ErrorCode::Parse, "keypoint line " + std::to_string(lineno) + " is malformed");
    }
    const int bytes = static_cast<int>(hex.size() / 2);
    if (f.descriptor_bytes < 0) f.descriptor_bytes = bytes;
    if (bytes != f.descriptor_bytes) {
      throw Error(ErrorCode::Parse, "keypoint line " + std::to_string(lineno) + " has a different descriptor length");
    }
    for (std::size_t i = 0; i < hex.size(); i += 2) {
      const int hi = hex_value(hex[i]), lo = hex_value(hex[i + 1]);
      if (hi < 0 || lo < 0) throw Error(ErrorCode::Parse, "bad hex digit on line " + std::to_string(lineno));
      f.descriptors.push_back(static_cast<std::uint8_t>(hi * 16 + lo));
    }
    f.keypoints.push_back(k);
  }
  if (f.descriptor_bytes < 0) f.descriptor_bytes = metric == DescriptorMetric::Hamming ? 32 : 128;
  return f;
}

std::string format_keypoint_lines(const Features& features) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  char num[96];
  for (std::size_t i = 0; i < features.size(); ++i) {
    const Keypoint& k = features.keypoints[i];
    std::snprintf(num, sizeof num, "%.9g %.9g %.9g %.9g ", k.x, k.y, k.angle, k.response);
    out += num;
    for (std::uint8_t b : features.descriptor(i)) {
      out += kHex[b >> 4];
      out += kHex[b & 15];
    }
    out += '\n';
  }
  return out;
}

}  // namespace findview
