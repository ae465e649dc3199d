#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "findview/corruption.hpp"
#include "findview/projection.hpp"
#include "findview/random.hpp"

namespace findview {

enum class Action { Up, Down, Left, Right, Stop };

inline constexpr std::array<Action, 5> kAllActions{Action::Up, Action::Down, Action::Left, Action::Right,
                                                   Action::Stop};

std::string_view to_string(Action a);
std::optional<Action> parse_action(std::string_view name);
inline bool is_movement(Action a) { return a != Action::Stop; }

enum class Difficulty { Easy, Medium, Hard, Unclassified };

std::string_view to_string(Difficulty d);
std::optional<Difficulty> parse_difficulty(std::string_view name);

struct RewardConfig {
  double alpha = 100.0;
  double beta = 10.0;
  double gamma_dist = 0.1;
  double slack = -0.01;
};

struct EnvConfig {
  int step_deg = 1;
  int pitch_bound = 60;
  int max_steps = 5000;
  CameraIntrinsics camera;  // 90 deg, 256x256
  RewardConfig reward;

  /// Throws InvalidSpec on a violated invariant.
  void validate() const;
};

/// Observation size used for a given FoV: 256x256 at 90 degrees, 256x192 at 60 degrees,
/// otherwise a 4:3 frame for narrower FoVs and square above.
CameraIntrinsics default_camera(double fov_deg);

struct EpisodeSpec {
  std::string pano;
  ViewRotation initial;
  ViewRotation target;
  Difficulty difficulty = Difficulty::Unclassified;
  double fov = 90.0;
  std::optional<CorruptionSpec> corruption;
  std::uint64_t seed = 0;

  friend bool operator==(const EpisodeSpec&, const EpisodeSpec&) = default;
};

/// One JSON object per line. Corruption seed is the episode seed.
std::string serialize_episode(const EpisodeSpec& spec);
EpisodeSpec parse_episode(std::string_view line);
void write_episodes(std::ostream& out, const std::vector<EpisodeSpec>& specs);
std::vector<EpisodeSpec> read_episodes(std::istream& in);
std::vector<EpisodeSpec> load_episode_file(const std::string& path);

/// One movement step: pitch clamps to +-pitch_bound, yaw wraps into (-180, 180].
/// Throws ContractViolation for Stop.
ViewRotation apply_action(const ViewRotation& rot, Action a, const EnvConfig& cfg);

/// |dpitch| + wrapped |dyaw|, in degrees.
double angular_l1(const ViewRotation& a, const ViewRotation& b);
/// Euclidean counterpart with the same wrapped yaw difference.
double angular_l2(const ViewRotation& a, const ViewRotation& b);
double wrapped_yaw_gap(double yaw_a, double yaw_b);

struct RewardBreakdown {
  double success = 0.0;
  double dist = 0.0;
  double slack = 0.0;

  double total() const { return success + dist + slack; }
};

/// Stop steps emit only the success term; movement steps emit warmer-colder plus slack,
/// and the forced final step adds -alpha.
RewardBreakdown compute_reward(const ViewRotation& prev, const ViewRotation& cur, const ViewRotation& target,
                               bool stopped, bool terminated, const RewardConfig& cfg);

struct SamplerConfig {
  int pitch_bound = 60;
  int step_deg = 1;
  int min_steps = 10;  // N_min for easy episodes
  int max_attempts = 10000;
};

Difficulty classify_difficulty(const ViewRotation& init, const ViewRotation& target, double fov_deg, int min_steps,
                               int step_deg = 1);

/// Rejection-samples an (init, target) pair of the requested difficulty on the step grid.
/// Throws InfeasibleDifficulty when no pair is found within max_attempts.
EpisodeSpec sample_episode(Difficulty difficulty, const std::string& pano, double fov_deg, Rng& rng,
                           const SamplerConfig& cfg = {});

/// Resolves panorama ids to shared, read-only images.
class PanoramaSource {
 public:
  virtual ~PanoramaSource() = default;
  /// Throws MissingPanorama when the id is unknown or cannot be loaded.
  virtual std::shared_ptr<const EquirectImage> get(const std::string& id) const = 0;
};

struct Observation {
  std::shared_ptr<const PerspImage> target;
  PerspImage current;
};

struct StepInfo {
  ViewRotation rotation;  // evaluator-only
  int step = 0;
  bool stop_called = false;
  bool forced_termination = false;
  RewardBreakdown reward;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// FindView episode state machine. One instance is single-threaded.
class FindViewEnv {
 public:
  FindViewEnv(EnvConfig cfg, std::shared_ptr<const PanoramaSource> panoramas);

  StepResult reset(const EpisodeSpec& spec);
  StepResult step(Action a);

  const EnvConfig& config() const noexcept { return cfg_; }
  const EpisodeSpec& episode() const noexcept { return spec_; }
  const ViewRotation& rotation() const noexcept { return rotation_; }
  int steps() const noexcept { return t_; }
  int path_length() const noexcept { return moves_; }
  bool done() const noexcept { return done_; }
  bool active() const noexcept { return active_; }
  bool stop_called() const noexcept { return stopped_; }
  const std::shared_ptr<const PerspImage>& target_image() const noexcept { return target_; }

 private:
  StepResult make_result(RewardBreakdown reward) const;

  EnvConfig cfg_;
  std::shared_ptr<const PanoramaSource> panoramas_;
  std::shared_ptr<const EquirectImage> pano_;
  std::shared_ptr<const PerspImage> target_;
  EpisodeSpec spec_;
  ViewRotation rotation_;
  int t_ = 0;
  int moves_ = 0;
  bool active_ = false;
  bool done_ = false;
  bool stopped_ = false;
  bool forced_ = false;
};

}  // namespace findview
