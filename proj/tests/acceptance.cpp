// Acceptance gate: one PASS/FAIL line per criterion. Exit status is non-zero when any fails.

#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "findview/agents.hpp"
#include "findview/bench.hpp"
#include "findview/corruption.hpp"
#include "findview/dataset.hpp"
#include "findview/error.hpp"
#include "findview/metrics.hpp"
#include "findview/protocol.hpp"
#include "findview/server.hpp"
#include "graph_oracle.hpp"
#include "reference_render.hpp"

using namespace findview;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;
std::string g_filter;

void criterion(const std::string& name, double limit_s, const std::function<Verdict()>& body) {
  if (name.find(g_filter) == std::string::npos) return;
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0 && secs > limit_s) {
    v.pass = false;
    v.detail += "; over the " + std::to_string(static_cast<int>(limit_s)) + " s budget";
  }
  if (!v.pass) ++g_failures;
  std::printf("%s  %-28s %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int max_abs_diff(const RgbImage& a, const RgbImage& b) {
  int worst = 0;
  for (std::size_t i = 0; i < a.byte_size(); ++i) worst = std::max(worst, std::abs(a.bytes()[i] - b.bytes()[i]));
  return worst;
}

EnvConfig tiny_env() {
  EnvConfig cfg;
  cfg.camera = make_intrinsics(90, 8, 8);
  return cfg;
}

Verdict projection_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> pitch(-90, 90), yaw(-179, 180);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  int worst = 0;
  for (int n = 0; n < 100; ++n) {
    const RgbImage raw = oracle::random_image(512, 256, 500 + n % 10);
    const EquirectImage pano(raw);
    const double fov = n % 2 ? 60.0 : 90.0;
    const auto cam = default_camera(fov);
    const ViewRotation rot{pitch(rng) * 1.0, n < 50 ? yaw(rng) * 1.0 : yaw(rng) + frac(rng)};
    const RgbImage got = render_perspective(pano, canonicalize(rot), cam);
    const auto want = oracle::reference_render(raw, rot.pitch, rot.yaw, fov, cam.width(), cam.height());
    for (std::size_t k = 0; k < want.size(); ++k) {
      const int q = static_cast<int>(std::lround(std::clamp(want[k], 0.0, 255.0)));
      worst = std::max(worst, std::abs(q - got.bytes()[k]));
    }
  }
  return {worst <= 1, fmt("100 cases, max channel error %d", worst)};
}

Verdict yaw_equivariance() {
  const RgbImage raw = oracle::random_image(1024, 512, 77);
  const EquirectImage pano(raw);
  const auto cam = default_camera(90);
  int worst = 0;
  for (int k : {1, 7, 256, 512}) {
    const EquirectImage shifted(oracle::shift_columns_left(raw, k));
    for (const ViewRotation base : {ViewRotation{0, 0}, ViewRotation{35, -120}, ViewRotation{-60, 170}}) {
      const auto a = render_perspective(pano, canonicalize({base.pitch, base.yaw + k * 360.0 / 1024}), cam);
      const auto b = render_perspective(shifted, base, cam);
      worst = std::max(worst, max_abs_diff(a, b));
    }
  }
  return {worst <= 1, fmt("k in {1,7,256,512}, max channel error %d", worst)};
}

Verdict dynamics_fuzz() {
  auto store = std::make_shared<PanoramaStore>();
  store->add("p", EquirectImage(oracle::random_image(64, 32, 1)));
  EnvConfig cfg = tiny_env();
  cfg.max_steps = 2000;
  FindViewEnv env(cfg, store);
  Rng rng(99);
  SamplerConfig sc;
  auto fresh = [&] { return sample_episode(Difficulty::Easy, "p", 90, rng, sc); };
  std::mt19937_64 pick(5);
  long bad = 0, clamps = 0, wraps = 0, after_done_ok = 0, episodes = 0;
  env.reset(fresh());
  for (long i = 0; i < 1000000; ++i) {
    const auto r = pick() % 1000;
    // Long runs of one direction reach the pitch bound and cross the yaw seam.
    const Action a = r == 0 ? Action::Stop : kAllActions[(i / 97 + (r < 100 ? r : 0)) % 4];
    const ViewRotation before = env.rotation();
    const auto res = env.step(a);
    const ViewRotation& rot = res.info.rotation;
    if (!is_canonical(rot) || std::abs(rot.pitch) > 60 || rot.pitch != std::round(rot.pitch) ||
        rot.yaw != std::round(rot.yaw)) {
      ++bad;
    }
    if (a == Action::Up && before.pitch == 60) clamps += rot.pitch == 60;
    if (a == Action::Down && before.pitch == -60) clamps += rot.pitch == -60;
    if (a == Action::Right && before.yaw == 180) wraps += rot.yaw == -179;
    if (a == Action::Left && before.yaw == -179) wraps += rot.yaw == 180;
    if (res.done) {
      try {
        env.step(Action::Up);
      } catch (const Error& e) {
        after_done_ok += e.code() == ErrorCode::StepAfterDone;
      }
      ++episodes;
      env.reset(fresh());
    }
  }
  const bool pass = bad == 0 && after_done_ok == episodes && clamps > 0 && wraps > 0;
  return {pass, fmt("1e6 actions, %ld off-range, %ld clamps, %ld seam wraps, %ld/%ld post-done errors", bad, clamps,
                    wraps, after_done_ok, episodes)};
}

Verdict bfs_equivalence() {
  constexpr int step = 5, bound = 60;
  long pairs = 0, mismatches = 0;
  for (int p0 = -10; p0 <= 10; p0 += step) {
    for (int y0 = -180; y0 < 180; y0 += step) {
      const auto dist = oracle::bfs_distances(p0, wrap_yaw(y0), step, bound);
      for (int p = -10; p <= 10; p += step) {
        for (int y = -180; y < 180; y += step) {
          ++pairs;
          const double l1 = angular_l1({double(p0), double(y0)}, {double(p), double(y)});
          if (l1 / step != oracle::bfs_lookup(dist, p, wrap_yaw(y), step, bound)) ++mismatches;
        }
      }
    }
  }
  return {mismatches == 0, fmt("%ld pairs, %ld mismatches", pairs, mismatches)};
}

// Difficulty conditions written out directly from the definitions.
bool oracle_condition(Difficulty d, const ViewRotation& a, const ViewRotation& b, double f, int n_min) {
  const double dp = std::abs(a.pitch - b.pitch);
  const double raw = std::fmod(std::abs(a.yaw - b.yaw), 360.0);
  const double dy = std::min(raw, 360.0 - raw);
  const bool easy = std::sqrt(dp * dp + dy * dy) <= f * std::sqrt(2.0) / 2 && dp + dy >= n_min;
  const bool medium = dp + dy > f / 2 && dp + dy <= f;
  const bool hard = dp > f && dy > f;
  switch (d) {
    case Difficulty::Easy: return easy;
    case Difficulty::Medium: return medium && !easy;
    case Difficulty::Hard: return hard;
    default: return false;
  }
}

Verdict difficulty_sampling() {
  long checked = 0, bad = 0;
  for (double f : {90.0, 60.0}) {
    for (Difficulty d : {Difficulty::Easy, Difficulty::Medium, Difficulty::Hard}) {
      Rng rng(mix_seed(static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(d)));
      for (int i = 0; i < 10000; ++i) {
        const auto e = sample_episode(d, "p", f, rng);
        ++checked;
        const bool on_grid = std::abs(e.initial.pitch) <= 60 && std::abs(e.target.pitch) <= 60 &&
                             is_canonical(e.initial) && is_canonical(e.target);
        if (!on_grid || classify_difficulty(e.initial, e.target, f, 10) != d ||
            !oracle_condition(d, e.initial, e.target, f, 10)) {
          ++bad;
        }
      }
    }
  }
  bool infeasible = false;
  try {
    Rng rng(1);
    sample_episode(Difficulty::Hard, "p", 130, rng);
  } catch (const Error& e) {
    infeasible = e.code() == ErrorCode::InfeasibleDifficulty;
  }
  return {bad == 0 && infeasible,
          fmt("%ld samples, %ld violations, hard at f=130 %s", checked, bad, infeasible ? "infeasible" : "NOT rejected")};
}

Verdict reward_fixtures() {
  const RewardConfig rc;
  const double stop = compute_reward({5, 5}, {5, 5}, {5, 5}, true, false, rc).total();

  auto store = std::make_shared<PanoramaStore>();
  store->add("p", EquirectImage(oracle::random_image(64, 32, 2)));
  EnvConfig cfg = tiny_env();
  cfg.max_steps = 30;
  FindViewEnv env(cfg, store);
  EpisodeSpec spec;
  spec.pano = "p";
  spec.initial = {0, 0};
  spec.target = {20, 90};
  spec.fov = 90;
  env.reset(spec);
  StepResult last;
  for (int i = 0; i < 30; ++i) last = env.step(Action::Left);
  const double forced = last.info.reward.success;

  env.reset(spec);
  const double stop_env = env.step(Action::Stop).reward;

  cfg.max_steps = 5000;
  FindViewEnv walker(cfg, store);
  std::mt19937_64 rng(8);
  Rng srng(8);
  double worst = 0;
  for (int traj = 0; traj < 200; ++traj) {
    auto e = sample_episode(traj % 2 ? Difficulty::Medium : Difficulty::Hard, "p", 90, srng);
    walker.reset(e);
    const double d0 = angular_l1(e.initial, e.target);
    double sum = 0;
    const int len = 1 + static_cast<int>(rng() % 800);
    for (int t = 0; t < len; ++t) sum += walker.step(kAllActions[rng() % 4]).info.reward.dist;
    worst = std::max(worst, std::abs(sum - 0.1 * (d0 - angular_l1(walker.rotation(), e.target))));
  }
  spec.target = spec.initial;
  env.reset(spec);
  const double stop_at_target = env.step(Action::Stop).reward;
  const bool pass = stop == 10.0 && stop_at_target == 10.0 && forced == -100.0 && worst <= 1e-9 &&
                    stop_env == 100.0 / (110.0 + 10.0);
  return {pass, fmt("stop %.17g, forced %.17g, max |sum r_dist - 0.1 dd| %.3g over 200 walks", stop_at_target, forced,
                    worst)};
}

Verdict oracle_end_to_end() {
  auto store = std::make_shared<PanoramaStore>();
  std::vector<std::string> panos;
  for (int s = 1; s <= 5; ++s) panos.push_back(synth_id(s % 2 ? SynthKind::Voronoi : SynthKind::FractalNoise, s, 1024));
  BenchConfig cfg;
  cfg.make_agent = [] { return std::make_unique<OracleAgent>(); };
  cfg.panoramas = store;
  for (Difficulty d : {Difficulty::Easy, Difficulty::Medium, Difficulty::Hard}) {
    EpisodeSetConfig ec;
    ec.difficulty = d;
    ec.per_pano = 20;
    ec.seed = 300 + static_cast<std::uint64_t>(d);
    cfg.sets.push_back({std::string(to_string(d)), generate_episode_set(panos, ec)});
  }
  const auto result = run_benchmark(cfg);
  bool pass = true;
  std::string detail;
  int n = 0;
  for (const auto& c : result.cells) {
    n += c.row.n;
    pass = pass && c.row.eps == 0.0 && c.row.omega_stop == 100.0 && c.row.omega_perf == 100.0 && c.row.spl == 100.0;
    detail += fmt("%s (%.2f, %.1f%%, %.1f%%, %.1f%%) ", c.set.c_str(), c.row.eps, c.row.omega_stop, c.row.omega_perf,
                  c.row.spl);
  }
  return {pass && n == 300, fmt("%d episodes: ", n) + detail};
}

EpisodeOutcome outcome(ViewRotation init, ViewRotation fin, ViewRotation target, int len, bool stop) {
  EpisodeOutcome o;
  o.initial = init;
  o.final_rotation = fin;
  o.target = target;
  o.path_length = len;
  o.stop_called = stop;
  return o;
}

Verdict metrics_fixtures() {
  const std::vector<EpisodeOutcome> exact{outcome({0, 0}, {0, 10}, {0, 10}, 10, true)};
  const std::vector<EpisodeOutcome> detour{outcome({0, 0}, {0, 10}, {0, 10}, 20, true)};
  const std::vector<EpisodeOutcome> miss{outcome({0, 0}, {0, 9}, {0, 10}, 9, true)};
  const std::vector<EpisodeOutcome> two{outcome({0, 0}, {0, 10}, {0, 10}, 10, true),
                                        outcome({0, 0}, {0, 6}, {0, 10}, 6, true)};
  const auto row = aggregate(two);
  const bool pass = spl(exact) == 100.0 && spl(detour) == 50.0 && spl(miss) == 0.0 && row.eps == 2.0 &&
                    row.omega_perf == 50.0;
  return {pass, fmt("SPL %.1f/%.1f/%.1f, aggregate eps %.1f omega_perf %.1f", spl(exact), spl(detour), spl(miss),
                    row.eps, row.omega_perf)};
}

std::vector<EpisodeSpec> grid_tag_episodes(std::uint64_t first_seed, int panos, int per_pano, std::uint64_t seed) {
  std::vector<std::string> ids;
  for (int i = 0; i < panos; ++i) ids.push_back(synth_id(SynthKind::GridTags, first_seed + i, 1024));
  EpisodeSetConfig ec;
  ec.per_pano = per_pano;
  ec.seed = seed;
  return generate_episode_set(ids, ec);
}

// Validation episodes run with a short step limit so that hopeless thresholds cost little.
BenchConfig validation_config(std::shared_ptr<PanoramaStore> store, std::vector<EpisodeSpec> episodes) {
  BenchConfig cfg;
  cfg.panoramas = std::move(store);
  cfg.sets = {{"easy", std::move(episodes)}};
  cfg.env.max_steps = 400;
  return cfg;
}

Verdict rule_agent() {
  auto store = std::make_shared<PanoramaStore>();
  auto cache = std::make_shared<FeatureCache>();
  const AgentFamily family = [cache](const Threshold& t) {
    RuleAgentConfig rc;
    rc.d_thresh = t;
    return std::make_unique<RuleAgent>(rc, nullptr, cache);
  };
  const auto grid = param_search(family, validation_config(store, grid_tag_episodes(201, 3, 4, 7)), default_grid());
  const Threshold best = grid.best[0];

  BenchConfig cfg;
  cfg.panoramas = store;
  cfg.sets = {{"easy", grid_tag_episodes(101, 10, 10, 2)}};
  cfg.make_agent = [&] { return family(best); };
  std::vector<double> eps;
  int stopped = 0;
  cfg.out_dir = std::filesystem::temp_directory_path() / ("findview_acceptance_" + std::to_string(::getpid()));
  std::filesystem::remove_all(cfg.out_dir);
  const auto result = run_benchmark(cfg);
  for (const auto& rec : read_trace_file(result.cells[0].trace).records) {
    const auto o = outcome_of(rec);
    eps.push_back(localization_error(o));
    stopped += o.stop_called;
  }
  std::filesystem::remove_all(cfg.out_dir);
  std::sort(eps.begin(), eps.end());
  const double median = eps.size() % 2 ? eps[eps.size() / 2] : 0.5 * (eps[eps.size() / 2 - 1] + eps[eps.size() / 2]);
  const double omega_stop = 100.0 * stopped / static_cast<double>(eps.size());
  return {eps.size() == 100 && omega_stop >= 90.0 && median <= 5.0,
          fmt("d_thresh %s, 100 episodes: omega_stop %.1f%%, median eps %.2f, mean eps %.2f, SPL %.1f%%",
              threshold_label(best).c_str(), omega_stop, median, result.cells[0].row.eps, result.cells[0].row.spl)};
}

Verdict corruption_properties() {
  std::vector<RgbImage> images;
  for (int i = 0; i < 20; ++i) {
    const auto pano = synth_panorama(static_cast<SynthKind>(i % 3), 512, 256, 900 + i);
    images.push_back(render_perspective(pano, {double(i * 5 - 45), double(i * 17 - 170)}, make_intrinsics(90, 128, 96)));
  }
  int nondeterministic = 0, reshaped = 0, non_monotone = 0;
  std::string offenders;
  for (CorruptionKind k : kAllCorruptions) {
    double prev = -1;
    for (int s = 1; s <= 5; ++s) {
      double total = 0;
      for (std::size_t i = 0; i < images.size(); ++i) {
        const CorruptionSpec spec{k, s, 1000 + i};
        const RgbImage out = corrupt(images[i], spec);
        if (out.width() != images[i].width() || out.height() != images[i].height()) {
          ++reshaped;
          continue;
        }
        if (i < 2 && out != corrupt(images[i], spec)) ++nondeterministic;
        total += mean_abs_diff(images[i], out);
      }
      const double mean = total / images.size();
      if (!(mean > prev)) {
        ++non_monotone;
        offenders += fmt(" %s:%d (%.3f <= %.3f)", std::string(to_string(k)).c_str(), s, mean, prev);
      }
      prev = mean;
    }
  }
  return {nondeterministic == 0 && reshaped == 0 && non_monotone == 0,
          fmt("16 kinds x 5 severities x 20 images: %d nondeterministic, %d reshaped, %d non-monotone steps",
              nondeterministic, reshaped, non_monotone) +
              offenders};
}

Verdict grid_search_determinism() {
  auto episodes = grid_tag_episodes(301, 2, 2, 9);
  auto run = [&] {
    auto store = std::make_shared<PanoramaStore>();
    auto cache = std::make_shared<FeatureCache>();
    const AgentFamily family = [cache](const Threshold& t) {
      RuleAgentConfig rc;
      rc.d_thresh = t;
      return std::make_unique<RuleAgent>(rc, nullptr, cache);
    };
    auto cfg = validation_config(store, episodes);
    cfg.env.max_steps = 200;
    return param_search(family, cfg, parse_grid("10,20,...,100,inf"));
  };
  const auto a = run();
  const auto b = run();
  const bool structure = a.grid == default_grid() && a.grid.size() == 11 && !a.grid.back();
  std::string eps;
  for (double e : a.eps[0]) eps += fmt("%.2f ", e);
  return {structure && a.eps == b.eps && a.best == b.best,
          "grid {10,...,100,inf}, eps " + eps + "argmin " + threshold_label(a.best[0]) + " / " +
              threshold_label(b.best[0])};
}

struct ReplayLog {
  std::vector<std::vector<std::uint8_t>> frames;
  long steps = 0;
  double seconds = 0;
};

ReplayLog replay(const std::vector<std::pair<int, Action>>& log) {
  ServerConfig cfg;
  cfg.n_envs = 16;
  cfg.seed = 4;
  cfg.difficulty = Difficulty::Easy;
  for (int s = 0; s < 4; ++s) cfg.panos.push_back(synth_id(SynthKind::Voronoi, 40 + s, 1024));
  auto store = std::make_shared<PanoramaStore>();
  for (const auto& id : cfg.panos) store->get(id);
  Session session(cfg, store);
  int fds[2];
  if (socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) throw std::runtime_error("socketpair");
  std::thread server([&] { session.run(fds[1], fds[1]); });

  ReplayLog out;
  auto send = [&](const std::string& json) { write_frame(fds[0], json); };
  auto collect = [&] {
    auto control = read_frame(fds[0]);
    out.frames.push_back(*control);
    const auto j = nlohmann::json::parse(control->begin(), control->end());
    if (j.value("ok", false) && j.contains("obs_bytes")) out.frames.push_back(*read_frame(fds[0]));
    return j;
  };
  const auto t0 = std::chrono::steady_clock::now();
  send(R"({"op":"hello","version":1})");
  collect();
  for (int e = 0; e < 16; ++e) {
    send(R"({"op":"reset","env":)" + std::to_string(e) + "}");
    collect();
  }
  for (const auto& [env, action] : log) {
    send(R"({"op":"step","env":)" + std::to_string(env) + R"(,"action":")" + std::string(to_string(action)) + "\"}");
    const auto j = collect();
    ++out.steps;
    if (j.value("done", false)) {
      send(R"({"op":"reset","env":)" + std::to_string(env) + "}");
      collect();
    }
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  send(R"({"op":"close"})");
  collect();
  server.join();
  ::close(fds[0]);
  ::close(fds[1]);
  return out;
}

Verdict protocol_determinism() {
  std::mt19937_64 rng(1234);
  std::vector<std::pair<int, Action>> log;
  for (int i = 0; i < 1000; ++i) {
    const auto r = rng();
    log.emplace_back(static_cast<int>(r % 16), (r >> 8) % 50 == 0 ? Action::Stop : kAllActions[(r >> 16) % 4]);
  }
  const auto a = replay(log);
  const auto b = replay(log);
  std::size_t bytes = 0;
  for (const auto& f : a.frames) bytes += f.size();
  const double rate = a.steps / a.seconds;
  return {a.frames == b.frames,
          fmt("1000-action log, %zu frames / %zu bytes identical: %s; throughput %.0f steps/s with 16 envs (soft "
              "target 200)",
              a.frames.size(), bytes, a.frames == b.frames ? "yes" : "NO", rate)};
}

}  // namespace

// An optional argument runs only the criteria whose name contains it.
int main(int argc, char** argv) {
  if (argc > 1) g_filter = argv[1];
  criterion("projection-oracle", 60, projection_oracle);
  criterion("yaw-equivariance", 10, yaw_equivariance);
  criterion("dynamics-fuzz", 10, dynamics_fuzz);
  criterion("l1-bfs-equivalence", 60, bfs_equivalence);
  criterion("difficulty-sampling", 30, difficulty_sampling);
  criterion("reward-fixtures", 5, reward_fixtures);
  criterion("oracle-end-to-end", 120, oracle_end_to_end);
  criterion("metrics-fixtures", 0, metrics_fixtures);
  criterion("rule-agent-easy", 600, rule_agent);
  criterion("corruption-properties", 120, corruption_properties);
  criterion("grid-search", 0, grid_search_determinism);
  criterion("protocol-determinism", 0, protocol_determinism);
  std::printf("%d criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
