#include "findview/environment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "findview/error.hpp"

namespace findview {

namespace {

using ordered_json = nlohmann::ordered_json;

bool on_grid(double deg, int step) {
  if (std::floor(deg) != deg) return false;
  return static_cast<long long>(deg) % step == 0;
}

int as_int_degrees(const ordered_json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw Error(ErrorCode::Parse, std::string("episode record missing numeric '") + key + "'");
  }
  const double v = j.at(key).get<double>();
  if (std::floor(v) != v) throw Error(ErrorCode::Parse, std::string("'") + key + "' must be integer degrees");
  return static_cast<int>(v);
}

}  // namespace

std::string_view to_string(Action a) {
  switch (a) {
    case Action::Up: return "up";
    case Action::Down: return "down";
    case Action::Left: return "left";
    case Action::Right: return "right";
    case Action::Stop: return "stop";
  }
  return "stop";
}

std::optional<Action> parse_action(std::string_view name) {
  for (Action a : kAllActions)
    if (to_string(a) == name) return a;
  return std::nullopt;
}

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Medium: return "medium";
    case Difficulty::Hard: return "hard";
    case Difficulty::Unclassified: return "unclassified";
  }
  return "unclassified";
}

std::optional<Difficulty> parse_difficulty(std::string_view name) {
  for (Difficulty d : {Difficulty::Easy, Difficulty::Medium, Difficulty::Hard, Difficulty::Unclassified})
    if (to_string(d) == name) return d;
  return std::nullopt;
}

void EnvConfig::validate() const {
  if (step_deg < 1) throw Error(ErrorCode::InvalidSpec, "step_deg must be a positive integer");
  if (pitch_bound <= 0 || pitch_bound > 90) throw Error(ErrorCode::InvalidSpec, "pitch_bound must lie in (0, 90]");
  if (max_steps < 1) throw Error(ErrorCode::InvalidSpec, "max_steps must be >= 1");
  if (!(reward.beta > 0.0)) throw Error(ErrorCode::InvalidSpec, "reward beta must be positive");
}

CameraIntrinsics default_camera(double fov_deg) {
  return make_intrinsics(fov_deg, 256, fov_deg < 90.0 ? 192 : 256);
}

std::string serialize_episode(const EpisodeSpec& spec) {
  ordered_json j;
  j["pano"] = spec.pano;
  j["init_pitch"] = static_cast<int>(spec.initial.pitch);
  j["init_yaw"] = static_cast<int>(spec.initial.yaw);
  j["target_pitch"] = static_cast<int>(spec.target.pitch);
  j["target_yaw"] = static_cast<int>(spec.target.yaw);
  j["difficulty"] = std::string(to_string(spec.difficulty));
  j["fov"] = static_cast<int>(spec.fov);
  if (spec.corruption) {
    j["corruption_kind"] = std::string(to_string(spec.corruption->kind));
    j["corruption_severity"] = spec.corruption->severity;
  }
  j["seed"] = spec.seed;
  return j.dump();
}

EpisodeSpec parse_episode(std::string_view line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Parse, std::string("bad episode record: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::Parse, "episode record must be an object");
  EpisodeSpec spec;
  if (!j.contains("pano") || !j["pano"].is_string()) throw Error(ErrorCode::Parse, "episode record missing 'pano'");
  spec.pano = j["pano"].get<std::string>();
  spec.initial = {double(as_int_degrees(j, "init_pitch")), double(as_int_degrees(j, "init_yaw"))};
  spec.target = {double(as_int_degrees(j, "target_pitch")), double(as_int_degrees(j, "target_yaw"))};
  spec.fov = as_int_degrees(j, "fov");
  const auto diff = j.contains("difficulty") && j["difficulty"].is_string()
                        ? parse_difficulty(j["difficulty"].get<std::string>())
                        : std::nullopt;
  if (!diff) throw Error(ErrorCode::Parse, "episode record has no valid 'difficulty'");
  spec.difficulty = *diff;
  if (!j.contains("seed") || !j["seed"].is_number_integer()) throw Error(ErrorCode::Parse, "episode record missing 'seed'");
  spec.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("corruption_kind")) {
    const auto kind = parse_corruption_kind(j["corruption_kind"].get<std::string>());
    if (!kind) throw Error(ErrorCode::Parse, "unknown corruption kind " + j["corruption_kind"].dump());
    if (!j.contains("corruption_severity")) throw Error(ErrorCode::Parse, "corruption_kind without severity");
    spec.corruption = CorruptionSpec{*kind, j["corruption_severity"].get<int>(), spec.seed};
  }
  return spec;
}

void write_episodes(std::ostream& out, const std::vector<EpisodeSpec>& specs) {
  for (const auto& s : specs) out << serialize_episode(s) << '\n';
}

std::vector<EpisodeSpec> read_episodes(std::istream& in) {
  std::vector<EpisodeSpec> specs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    specs.push_back(parse_episode(line));
  }
  return specs;
}

std::vector<EpisodeSpec> load_episode_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open episode file " + path);
  return read_episodes(in);
}

ViewRotation apply_action(const ViewRotation& rot, Action a, const EnvConfig& cfg) {
  const double d = cfg.step_deg;
  const double bound = cfg.pitch_bound;
  switch (a) {
    case Action::Up: return {std::min(rot.pitch + d, bound), rot.yaw};
    case Action::Down: return {std::max(rot.pitch - d, -bound), rot.yaw};
    case Action::Left: return {rot.pitch, wrap_yaw(rot.yaw - d)};
    case Action::Right: return {rot.pitch, wrap_yaw(rot.yaw + d)};
    case Action::Stop: break;
  }
  throw Error(ErrorCode::ContractViolation, "apply_action called with stop");
}

double wrapped_yaw_gap(double yaw_a, double yaw_b) {
  const double d = std::fmod(std::abs(yaw_a - yaw_b), 360.0);
  return std::min(d, 360.0 - d);
}

double angular_l1(const ViewRotation& a, const ViewRotation& b) {
  return std::abs(a.pitch - b.pitch) + wrapped_yaw_gap(a.yaw, b.yaw);
}

double angular_l2(const ViewRotation& a, const ViewRotation& b) {
  return std::hypot(a.pitch - b.pitch, wrapped_yaw_gap(a.yaw, b.yaw));
}

RewardBreakdown compute_reward(const ViewRotation& prev, const ViewRotation& cur, const ViewRotation& target,
                               bool stopped, bool terminated, const RewardConfig& cfg) {
  if (stopped && terminated) throw Error(ErrorCode::ContractViolation, "a step cannot both stop and be forced");
  RewardBreakdown r;
  const double d_cur = angular_l1(target, cur);
  if (stopped) {
    r.success = cfg.alpha / (d_cur + cfg.beta);
    return r;
  }
  if (terminated) r.success = -cfg.alpha;
  r.dist = cfg.gamma_dist * (angular_l1(target, prev) - d_cur);
  r.slack = cfg.slack;
  return r;
}

Difficulty classify_difficulty(const ViewRotation& init, const ViewRotation& target, double fov_deg, int min_steps,
                               int step_deg) {
  const double d_pitch = std::abs(target.pitch - init.pitch);
  const double d_yaw = wrapped_yaw_gap(target.yaw, init.yaw);
  const double l1 = d_pitch + d_yaw;
  const double l2 = std::hypot(d_pitch, d_yaw);
  // easy and medium overlap; easy takes precedence.
  if (l2 <= std::sqrt(2.0) * fov_deg / 2.0 && l1 >= static_cast<double>(min_steps) * step_deg) return Difficulty::Easy;
  if (l1 > fov_deg / 2.0 && l1 <= fov_deg) return Difficulty::Medium;
  if (d_pitch > fov_deg && d_yaw > fov_deg) return Difficulty::Hard;
  return Difficulty::Unclassified;
}

EpisodeSpec sample_episode(Difficulty difficulty, const std::string& pano, double fov_deg, Rng& rng,
                           const SamplerConfig& cfg) {
  if (difficulty == Difficulty::Unclassified) {
    throw Error(ErrorCode::InvalidSpec, "cannot sample unclassified episodes");
  }
  if (cfg.step_deg < 1 || cfg.pitch_bound < 0) throw Error(ErrorCode::InvalidSpec, "bad sampler config");
  const std::int64_t pitch_cells = cfg.pitch_bound / cfg.step_deg;
  const std::int64_t yaw_lo = -180 / cfg.step_deg + 1;  // (-180, 180]
  const std::int64_t yaw_hi = 180 / cfg.step_deg;
  auto draw = [&]() -> ViewRotation {
    const double p = static_cast<double>(uniform_int(rng, -pitch_cells, pitch_cells) * cfg.step_deg);
    const double y = static_cast<double>(uniform_int(rng, yaw_lo, yaw_hi) * cfg.step_deg);
    return {p, wrap_yaw(y)};
  };

  EpisodeSpec spec;
  spec.pano = pano;
  spec.difficulty = difficulty;
  spec.fov = fov_deg;
  spec.seed = rng();
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    const ViewRotation init = draw();
    const ViewRotation target = draw();
    if (classify_difficulty(init, target, fov_deg, cfg.min_steps, cfg.step_deg) == difficulty) {
      spec.initial = init;
      spec.target = target;
      return spec;
    }
  }
  throw Error(ErrorCode::InfeasibleDifficulty,
              std::string(to_string(difficulty)) + " episodes not found at fov " + std::to_string(fov_deg) +
                  " and pitch bound " + std::to_string(cfg.pitch_bound) + " after " +
                  std::to_string(cfg.max_attempts) + " attempts");
}

FindViewEnv::FindViewEnv(EnvConfig cfg, std::shared_ptr<const PanoramaSource> panoramas)
    : cfg_(std::move(cfg)), panoramas_(std::move(panoramas)) {
  cfg_.validate();
  if (!panoramas_) throw Error(ErrorCode::InvalidSpec, "environment needs a panorama source");
}

StepResult FindViewEnv::reset(const EpisodeSpec& spec) {
  for (const ViewRotation& r : {spec.initial, spec.target}) {
    if (!is_canonical(r) || std::abs(r.pitch) > cfg_.pitch_bound || !on_grid(r.pitch, cfg_.step_deg) ||
        !on_grid(r.yaw, cfg_.step_deg)) {
      throw Error(ErrorCode::InvalidSpec, "episode rotation (" + std::to_string(r.pitch) + ", " +
                                              std::to_string(r.yaw) + ") is off-grid or out of bounds");
    }
  }
  if (spec.fov != cfg_.camera.fov_deg()) {
    throw Error(ErrorCode::InvalidSpec, "episode fov " + std::to_string(spec.fov) + " differs from environment fov " +
                                            std::to_string(cfg_.camera.fov_deg()));
  }
  auto pano = panoramas_->get(spec.pano);
  if (!pano) throw Error(ErrorCode::MissingPanorama, spec.pano);

  PerspImage target = render_perspective(*pano, spec.target, cfg_.camera);
  if (spec.corruption) target = corrupt(target, *spec.corruption);

  pano_ = std::move(pano);
  target_ = std::make_shared<const PerspImage>(std::move(target));
  spec_ = spec;
  rotation_ = spec.initial;
  t_ = 0;
  moves_ = 0;
  active_ = true;
  done_ = false;
  stopped_ = false;
  forced_ = false;
  return make_result({});
}

StepResult FindViewEnv::step(Action a) {
  if (!active_) throw Error(ErrorCode::StepAfterDone, "step before reset");
  if (done_) throw Error(ErrorCode::StepAfterDone, "episode already finished; call reset");
  ++t_;
  if (a == Action::Stop) {
    stopped_ = true;
    done_ = true;
    return make_result(compute_reward(rotation_, rotation_, spec_.target, true, false, cfg_.reward));
  }
  const ViewRotation prev = rotation_;
  rotation_ = apply_action(rotation_, a, cfg_);
  ++moves_;
  if (t_ >= cfg_.max_steps) {
    forced_ = true;
    done_ = true;
  }
  return make_result(compute_reward(prev, rotation_, spec_.target, false, forced_, cfg_.reward));
}

StepResult FindViewEnv::make_result(RewardBreakdown reward) const {
  StepResult r;
  r.observation.target = target_;
  r.observation.current = render_perspective(*pano_, rotation_, cfg_.camera);
  r.reward = reward.total();
  r.done = done_;
  r.info.rotation = rotation_;
  r.info.step = t_;
  r.info.stop_called = stopped_;
  r.info.forced_termination = forced_;
  r.info.reward = reward;
  return r;
}

}  // namespace findview
