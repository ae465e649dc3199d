#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "findview/environment.hpp"
#include "findview/features.hpp"

namespace findview {

/// What an agent sees each step. The true rotations are evaluator-only and are left empty
/// when the agent runs honestly.
struct AgentInput {
  const Observation& obs;
  std::optional<ViewRotation> rotation;
  std::optional<ViewRotation> target;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual void reset() = 0;
  virtual Action act(const AgentInput& input) = 0;
  virtual std::string name() const = 0;
  /// Agents that read the evaluator-only rotations; the harness withholds them from everyone else.
  virtual bool privileged() const { return false; }
};

struct RuleAgentConfig {
  std::optional<double> d_thresh;  // empty means no descriptor-distance gate
  int n_kps = 500;
  int n_matches = 10;
  double ratio = 0.7;
  double zero_px = 1.0;
  Action sweep_default = Action::Right;
  int oscillation_window = 6;

  /// Throws InvalidSpec on a violated invariant.
  void validate() const;
};

struct RuleAgentState {
  std::optional<Action> previous;
  std::vector<Action> history;
};

/// Per-match votes in an x-right / y-up frame, d = (x_c - x_t, y_t - y_c); mode of the votes,
/// ties resolved by first occurrence. No usable match returns `fallback`.
Action consensus(std::span<const Match> matches, const Features& current, const Features& target, Action fallback,
                 const RuleAgentConfig& cfg);

/// True when the last `window` actions alternate between two opposing movements.
bool is_repeated(std::span<const Action> history, int window);

/// Continue the previous movement, or sweep when there was none.
Action fallback_action(const RuleAgentState& state, const RuleAgentConfig& cfg);

/// Shortest-path move toward the target, larger wrapped gap first (pitch on ties); stop at zero.
Action oracle_act(const ViewRotation& current, const ViewRotation& target);

/// Memoizes detector output by image content. Safe to share between agents and threads.
class FeatureCache {
 public:
  explicit FeatureCache(std::size_t capacity = 20000) : capacity_(capacity) {}
  std::shared_ptr<const Features> get_or_compute(const GrayImage& img, const FeatureDetector& detector);
  std::size_t size() const;

 private:
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::unordered_map<std::uint64_t, std::shared_ptr<const Features>> entries_;
};

class RuleAgent : public Agent {
 public:
  explicit RuleAgent(RuleAgentConfig cfg = {}, std::shared_ptr<const FeatureDetector> detector = nullptr,
                     std::shared_ptr<FeatureCache> cache = nullptr);

  void reset() override;
  Action act(const AgentInput& input) override { return estimate_action(input.obs); }
  std::string name() const override { return "rule-orb"; }

  Action estimate_action(const Observation& obs);
  const RuleAgentState& state() const noexcept { return state_; }
  const RuleAgentConfig& config() const noexcept { return cfg_; }

 private:
  std::shared_ptr<const Features> features_of(const PerspImage& img);
  Action decide(const Observation& obs);

  RuleAgentConfig cfg_;
  std::shared_ptr<const FeatureDetector> detector_;
  std::shared_ptr<FeatureCache> cache_;
  RuleAgentState state_;
  const PerspImage* cached_target_ = nullptr;
  std::shared_ptr<const PerspImage> target_owner_;
  std::shared_ptr<const Features> target_features_;
};

/// Cheating agent for tests: needs the evaluator-only rotations.
class OracleAgent : public Agent {
 public:
  void reset() override {}
  Action act(const AgentInput& input) override;
  std::string name() const override { return "oracle"; }
  bool privileged() const override { return true; }
};

/// Runs an external program per image: PNG on stdin, one `x y angle response hex` line per keypoint
/// on stdout. Hex descriptors are raw bytes; Hamming metric treats them as bits, L2 as uint8 vectors.
class ExternalDetector : public FeatureDetector {
 public:
  ExternalDetector(std::vector<std::string> argv, DescriptorMetric metric);
  Features detect(const GrayImage& img) const override;

 private:
  std::vector<std::string> argv_;
  DescriptorMetric metric_;
};

/// Parses plug-in output. Throws Parse on malformed lines or inconsistent descriptor lengths.
Features parse_keypoint_lines(std::string_view text, DescriptorMetric metric);
std::string format_keypoint_lines(const Features& features);

}  // namespace findview
