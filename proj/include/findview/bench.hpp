#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "findview/agents.hpp"
#include "findview/environment.hpp"
#include "findview/metrics.hpp"

namespace findview {

struct EpisodeSet {
  std::string label;  // usually the difficulty name
  std::vector<EpisodeSpec> episodes;
};

/// Creates one agent per worker thread.
using AgentFactory = std::function<std::unique_ptr<Agent>()>;

/// Cell corruption; nullopt keeps whatever the episode file says (normally clean).
using CorruptionCell = std::optional<std::pair<CorruptionKind, int>>;

std::string corruption_label(const CorruptionCell& cell);

struct BenchConfig {
  AgentFactory make_agent;
  std::shared_ptr<const PanoramaSource> panoramas;
  std::vector<EpisodeSet> sets;
  std::vector<CorruptionCell> corruptions{std::nullopt};
  EnvConfig env;  // camera follows each episode's fov
  std::filesystem::path out_dir;  // empty: nothing is written
  bool resume = true;
  int threads = 1;

  /// Throws InvalidSpec.
  void validate() const;
};

enum class EpisodeEnd { Stopped, Forced, Crashed };

struct TraceStep {
  int t = 0;
  Action action = Action::Stop;
  double reward = 0.0;
  int pitch = 0;
  int yaw = 0;
};

struct EpisodeRecord {
  int index = 0;
  EpisodeSpec spec;
  std::vector<TraceStep> steps;
  EpisodeEnd end = EpisodeEnd::Forced;
  std::string message;  // crash reason
};

/// Trace text for one episode: a "# begin" line, one tab-separated line per step
/// (episode, t, action, reward, pitch, yaw), and a "# end" line.
std::string format_record(const EpisodeRecord& record);

struct ParsedTrace {
  std::vector<EpisodeRecord> records;  // complete episodes, in file order
  std::size_t complete_bytes = 0;      // offset just past the last complete episode
};

/// Ignores a trailing partial episode. Throws Parse on malformed complete records.
ParsedTrace parse_trace(std::istream& in);
ParsedTrace read_trace_file(const std::filesystem::path& path);

/// Crashes count as forced failures.
EpisodeOutcome outcome_of(const EpisodeRecord& record);
BenchmarkRow aggregate_records(const std::vector<EpisodeRecord>& records);

struct CellResult {
  std::string set;
  std::string corruption;
  BenchmarkRow row;
  int crashed = 0;
  std::filesystem::path trace;
};

struct BenchResult {
  std::string agent;
  std::vector<CellResult> cells;
};

/// Runs every (set, corruption) cell. With an output directory, traces go to
/// <out>/traces/<set>__<corruption>.trace and finished episodes found there are not rerun.
BenchResult run_benchmark(const BenchConfig& cfg);

inline constexpr const char* kBenchCsvHeader = "difficulty,corruption,eps,omega_stop,omega_perf,spl,n,n_stop,n_perf";

void write_bench_csv(std::ostream& out, const BenchResult& result);
/// One table per corruption, one row per episode set.
void write_bench_tables(std::ostream& out, const BenchResult& result);

using Threshold = std::optional<double>;  // nullopt is the unbounded setting

std::vector<Threshold> default_grid();
/// "10,20,...,100,inf": "..." repeats the step of the two preceding values.
std::vector<Threshold> parse_grid(std::string_view text);
std::string threshold_label(const Threshold& t);

struct GridSearchResult {
  std::vector<Threshold> grid;
  std::vector<std::string> sets;
  std::vector<std::vector<double>> eps;  // [set][grid]
  std::vector<Threshold> best;           // per set; ties go to the smallest threshold
};

using AgentFamily = std::function<std::unique_ptr<Agent>(const Threshold&)>;

/// Throws EmptyInput on an empty grid or no validation sets.
GridSearchResult param_search(const AgentFamily& family, const BenchConfig& base, const std::vector<Threshold>& grid);

void write_grid_table(std::ostream& out, const GridSearchResult& result);

struct FpsResult {
  double fps = 0.0;
  long frames = 0;
  double seconds = 0.0;
};

/// Times act() calls only; rendering and environment stepping are excluded. The first `warmup`
/// calls are not timed; at most `max_frames` calls are timed. Throws EmptyInput without episodes.
FpsResult measure_fps(Agent& agent, const std::vector<EpisodeSpec>& episodes,
                      std::shared_ptr<const PanoramaSource> panoramas, const EnvConfig& env, int warmup = 10,
                      long max_frames = 2000);

/// Two decimal places.
std::string format_fps(double fps);

}  // namespace findview
