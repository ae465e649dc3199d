#include <unistd.h>

#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "findview/agents.hpp"
#include "findview/bench.hpp"
#include "findview/dataset.hpp"
#include "findview/error.hpp"
#include "findview/image_io.hpp"
#include "findview/remote_agent.hpp"
#include "findview/server.hpp"

using namespace findview;

namespace {

struct PanoOptions {
  std::string manifest;
  std::string dir;

  void add(CLI::App* app) {
    app->add_option("--manifest", manifest, "panorama manifest (id, path, scene per line)");
    app->add_option("--pano-dir", dir, "directory of equirectangular panoramas");
  }

  std::shared_ptr<PanoramaStore> store() const {
    if (!manifest.empty()) {
      std::ifstream in(manifest);
      if (!in) throw Error(ErrorCode::Io, "cannot open " + manifest);
      return std::make_shared<PanoramaStore>(read_manifest(in));
    }
    if (!dir.empty()) return std::make_shared<PanoramaStore>(build_catalog(dir));
    return std::make_shared<PanoramaStore>();
  }
};

std::pair<int, int> parse_size(const std::string& text) {
  const auto x = text.find('x');
  if (x == std::string::npos) throw Error(ErrorCode::Parse, "size must look like 256x256");
  return {std::stoi(text.substr(0, x)), std::stoi(text.substr(x + 1))};
}

Difficulty difficulty_arg(const std::string& name) {
  const auto d = parse_difficulty(name);
  if (!d) throw Error(ErrorCode::Parse, "unknown difficulty " + name);
  return *d;
}

// Loads an image file or resolves a panorama id (synth:..., manifest id).
EquirectImage load_panorama(const std::string& pano, const PanoramaStore& store) {
  if (pano.rfind("synth:", 0) == 0 || !std::filesystem::exists(pano)) return *store.get(pano);
  return EquirectImage(load_image(pano));
}

struct AgentOptions {
  std::string kind = "rule-orb";
  std::optional<double> d_thresh;
  int n_kps = 500;
  std::vector<std::string> command;

  void add(CLI::App* app) {
    app->add_option("--agent", kind, "oracle, rule-orb or remote")
        ->check(CLI::IsMember({"oracle", "rule-orb", "remote"}));
    app->add_option("--d-thresh", d_thresh, "rule agent descriptor-distance gate (default: none)");
    app->add_option("--n-kps", n_kps, "rule agent keypoint budget");
    app->add_option("--agent-cmd", command, "remote agent command line, e.g. --agent-cmd findview agent")
        ->expected(1, -1);
  }

  RuleAgentConfig rule_config(const Threshold& t) const {
    RuleAgentConfig cfg;
    cfg.n_kps = n_kps;
    cfg.d_thresh = t;
    cfg.validate();
    return cfg;
  }

  AgentFactory factory() const {
    if (kind == "oracle") return [] { return std::make_unique<OracleAgent>(); };
    if (kind == "remote") {
      if (command.empty()) throw Error(ErrorCode::InvalidSpec, "--agent remote needs --agent-cmd");
      return [cmd = command] { return std::make_unique<RemoteAgent>(cmd); };
    }
    auto cache = std::make_shared<FeatureCache>();
    const auto cfg = rule_config(d_thresh);
    return [cfg, cache] { return std::make_unique<RuleAgent>(cfg, nullptr, cache); };
  }
};

std::vector<EpisodeSet> load_sets(const std::vector<std::string>& files) {
  std::vector<EpisodeSet> sets;
  for (const auto& f : files) {
    EpisodeSet set;
    set.episodes = load_episode_file(f);
    set.label = std::filesystem::path(f).stem().string();
    if (!set.episodes.empty()) {
      const Difficulty d = set.episodes.front().difficulty;
      const bool uniform = std::all_of(set.episodes.begin(), set.episodes.end(),
                                       [d](const EpisodeSpec& e) { return e.difficulty == d; });
      if (uniform && d != Difficulty::Unclassified) set.label = std::string(to_string(d));
    }
    for (const auto& other : sets) {
      if (other.label == set.label) set.label = std::filesystem::path(f).stem().string();
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

std::vector<CorruptionCell> corruption_cells(const std::vector<std::string>& args, bool include_clean) {
  std::vector<CorruptionCell> cells;
  if (include_clean || args.empty()) cells.emplace_back(std::nullopt);
  for (const auto& a : args) {
    const auto spec = parse_corruption_arg(a);
    cells.emplace_back(std::make_pair(spec.kind, spec.severity));
  }
  return cells;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FindView: look-around view localization on 360 degree panoramas"};
  app.require_subcommand(1);

  // render
  auto* render = app.add_subcommand("render", "render a perspective view of a panorama");
  std::string r_pano, r_out, r_size = "256x256";
  double r_pitch = 0, r_yaw = 0, r_fov = 90;
  PanoOptions r_panos;
  render->add_option("--pano", r_pano, "image path or panorama id")->required();
  render->add_option("--pitch", r_pitch);
  render->add_option("--yaw", r_yaw);
  render->add_option("--fov", r_fov);
  render->add_option("--size", r_size, "WxH");
  render->add_option("--out", r_out)->required();
  r_panos.add(render);

  // corrupt
  auto* corrupt_cmd = app.add_subcommand("corrupt", "apply a corruption to an image");
  std::string c_in, c_out, c_kind;
  int c_severity = 1;
  std::uint64_t c_seed = 0;
  corrupt_cmd->add_option("--in", c_in)->required();
  corrupt_cmd->add_option("--kind", c_kind)->required();
  corrupt_cmd->add_option("--severity", c_severity)->required();
  corrupt_cmd->add_option("--seed", c_seed);
  corrupt_cmd->add_option("--out", c_out)->required();

  // catalog
  auto* catalog_cmd = app.add_subcommand("catalog", "scan a directory into a manifest");
  std::string cat_dir, cat_scene = "unknown", cat_out;
  catalog_cmd->add_option("--dir", cat_dir)->required();
  catalog_cmd->add_option("--scene", cat_scene);
  catalog_cmd->add_option("--out", cat_out, "manifest path (default: stdout)");

  // split
  auto* split_cmd = app.add_subcommand("split", "split a manifest into train/val/test manifests");
  std::string sp_manifest, sp_out = ".";
  SplitSpec sp;
  split_cmd->add_option("--manifest", sp_manifest)->required();
  split_cmd->add_option("--train", sp.train);
  split_cmd->add_option("--val", sp.val);
  split_cmd->add_option("--test", sp.test);
  split_cmd->add_option("--seed", sp.seed);
  split_cmd->add_option("--out-dir", sp_out);

  // episodes
  auto* episodes_cmd = app.add_subcommand("episodes", "generate an episode file");
  std::vector<std::string> ep_panos;
  std::string ep_manifest, ep_difficulty = "easy", ep_corruption, ep_out;
  EpisodeSetConfig ep;
  episodes_cmd->add_option("--pano", ep_panos, "panorama ids (repeatable)");
  episodes_cmd->add_option("--manifest", ep_manifest, "use every id in a manifest");
  episodes_cmd->add_option("--difficulty", ep_difficulty);
  episodes_cmd->add_option("--per-pano", ep.per_pano);
  episodes_cmd->add_option("--fov", ep.fov);
  episodes_cmd->add_option("--corruption", ep_corruption, "kind:severity");
  episodes_cmd->add_option("--seed", ep.seed);
  episodes_cmd->add_option("--min-steps", ep.sampler.min_steps);
  episodes_cmd->add_option("--out", ep_out, "episode file (default: stdout)");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic panorama");
  std::string sy_kind = "grid-tags", sy_out;
  std::uint64_t sy_seed = 0;
  int sy_width = 1024;
  synth_cmd->add_option("--kind", sy_kind, "voronoi, fractal-noise or grid-tags");
  synth_cmd->add_option("--seed", sy_seed);
  synth_cmd->add_option("--width", sy_width);
  synth_cmd->add_option("--out", sy_out)->required();

  // serve
  auto* serve = app.add_subcommand("serve", "serve environments over the wire protocol");
  ServerConfig sv;
  std::string sv_host = "127.0.0.1", sv_episodes, sv_difficulty = "easy";
  int sv_port = 5555;
  bool sv_stdio = false;
  PanoOptions sv_panos;
  serve->add_option("--host", sv_host);
  serve->add_option("--port", sv_port, "0 picks a free port");
  serve->add_flag("--stdio", sv_stdio, "speak the protocol on stdin/stdout");
  serve->add_option("--n-envs", sv.n_envs);
  serve->add_option("--seed", sv.seed);
  serve->add_option("--fov", sv.fov);
  serve->add_flag("--hide-state", sv.hide_state, "omit rotations and target angles from replies");
  serve->add_option("--episodes", sv_episodes, "episode file; otherwise episodes are sampled");
  serve->add_option("--difficulty", sv_difficulty);
  serve->add_option("--pano", sv.panos, "panorama ids to sample from (repeatable)");
  serve->add_option("--max-steps", sv.env.max_steps);
  sv_panos.add(serve);

  // agent
  auto* agent_cmd = app.add_subcommand("agent", "run the rule agent as a remote agent on stdin/stdout");
  AgentOptions ag;
  agent_cmd->add_option("--d-thresh", ag.d_thresh);
  agent_cmd->add_option("--n-kps", ag.n_kps);

  // detect
  auto* detect = app.add_subcommand("detect", "reference detector plug-in: PNG on stdin, keypoint lines on stdout");
  OrbConfig det;
  detect->add_option("--n-kps", det.max_keypoints);

  // bench
  auto* bench = app.add_subcommand("bench", "benchmark agents");
  bench->require_subcommand(1);
  std::vector<std::string> b_episodes, b_corruptions;
  std::string b_out;
  int b_threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  bool b_no_clean = false, b_fresh = false;
  AgentOptions b_agent;
  PanoOptions b_panos;
  int b_max_steps = 5000;
  auto add_common = [&](CLI::App* c) {
    c->add_option("--episodes", b_episodes, "episode files, one set per file")->required()->expected(1, -1);
    c->add_option("--threads", b_threads);
    c->add_option("--max-steps", b_max_steps);
    b_agent.add(c);
    b_panos.add(c);
  };
  auto* b_run = bench->add_subcommand("run", "run agents over episode sets");
  add_common(b_run);
  b_run->add_option("--corruption", b_corruptions, "kind:severity cells (repeatable)")->expected(1, -1);
  b_run->add_flag("--no-clean", b_no_clean, "skip the clean cell when corruptions are given");
  b_run->add_option("--out", b_out)->required();
  b_run->add_flag("--fresh", b_fresh, "ignore existing traces");

  auto* b_grid = bench->add_subcommand("grid", "search the rule agent d_thresh grid");
  std::string g_grid = "10,20,...,100,inf";
  add_common(b_grid);
  b_grid->add_option("--grid", g_grid);
  b_grid->add_option("--out", b_out, "directory for grid.txt and grid.csv");

  auto* b_fps = bench->add_subcommand("fps", "measure agent frames per second");
  int f_warmup = 10;
  long f_frames = 2000;
  add_common(b_fps);
  b_fps->add_option("--warmup", f_warmup);
  b_fps->add_option("--frames", f_frames);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*render) {
      const auto [w, h] = parse_size(r_size);
      const auto pano = load_panorama(r_pano, *r_panos.store());
      save_image(render_perspective(pano, ViewRotation{r_pitch, r_yaw}, make_intrinsics(r_fov, w, h)), r_out);
    } else if (*corrupt_cmd) {
      const auto kind = parse_corruption_kind(c_kind);
      if (!kind) throw Error(ErrorCode::UnknownCorruption, c_kind);
      save_image(corrupt(load_image(c_in), CorruptionSpec{*kind, c_severity, c_seed}), c_out);
    } else if (*catalog_cmd) {
      const auto catalog = build_catalog(cat_dir, cat_scene);
      for (const auto& w : catalog.warnings) std::cerr << "warning: " << w << '\n';
      if (cat_out.empty()) {
        write_manifest(std::cout, catalog);
      } else {
        std::ofstream out(cat_out);
        write_manifest(out, catalog);
      }
    } else if (*split_cmd) {
      std::ifstream in(sp_manifest);
      if (!in) throw Error(ErrorCode::Io, "cannot open " + sp_manifest);
      const auto parts = split(read_manifest(in), sp);
      std::filesystem::create_directories(sp_out);
      for (const auto& [name, part] : {std::pair{"train", &parts.train}, {"val", &parts.val}, {"test", &parts.test}}) {
        std::ofstream out(std::filesystem::path(sp_out) / (std::string(name) + ".manifest"));
        write_manifest(out, *part);
      }
    } else if (*episodes_cmd) {
      ep.difficulty = difficulty_arg(ep_difficulty);
      if (!ep_corruption.empty()) {
        const auto spec = parse_corruption_arg(ep_corruption);
        ep.corruption = std::make_pair(spec.kind, spec.severity);
      }
      if (!ep_manifest.empty()) {
        std::ifstream in(ep_manifest);
        if (!in) throw Error(ErrorCode::Io, "cannot open " + ep_manifest);
        for (const auto& e : read_manifest(in).entries) ep_panos.push_back(e.id);
      }
      if (ep_panos.empty()) throw Error(ErrorCode::InvalidSpec, "no panoramas given (--pano or --manifest)");
      const auto specs = generate_episode_set(ep_panos, ep);
      if (ep_out.empty()) {
        write_episodes(std::cout, specs);
      } else {
        std::ofstream out(ep_out);
        write_episodes(out, specs);
      }
    } else if (*synth_cmd) {
      const auto kind = parse_synth_kind(sy_kind);
      if (!kind) throw Error(ErrorCode::Parse, "unknown synthetic kind " + sy_kind);
      save_image(synth_panorama(*kind, sy_width, sy_width / 2, sy_seed).pixels(), sy_out);
    } else if (*serve) {
      if (!sv_episodes.empty()) sv.episodes = load_episode_file(sv_episodes);
      sv.difficulty = difficulty_arg(sv_difficulty);
      const auto panos = sv_panos.store();
      if (sv_stdio) return Session(sv, panos).run(STDIN_FILENO, STDOUT_FILENO) ? 0 : 1;
      return serve_tcp(sv, panos, sv_host, sv_port,
                       [](int port) { std::cerr << "listening on port " << port << std::endl; })
                 ? 0
                 : 1;
    } else if (*agent_cmd) {
      RuleAgent agent(ag.rule_config(ag.d_thresh));
      return serve_agent(agent, STDIN_FILENO, STDOUT_FILENO) ? 0 : 1;
    } else if (*detect) {
      const std::vector<std::uint8_t> png{std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
      std::cout << format_keypoint_lines(detect_and_compute(to_gray(decode_image(png)), det));
    } else if (*bench) {
      BenchConfig cfg;
      cfg.make_agent = b_agent.factory();
      cfg.panoramas = b_panos.store();
      cfg.sets = load_sets(b_episodes);
      cfg.threads = b_threads;
      cfg.env.max_steps = b_max_steps;
      if (*b_run) {
        cfg.corruptions = corruption_cells(b_corruptions, !b_no_clean);
        cfg.out_dir = b_out;
        cfg.resume = !b_fresh;
        const auto result = run_benchmark(cfg);
        write_bench_tables(std::cout, result);
        for (const auto& c : result.cells) {
          if (c.crashed > 0) std::cerr << c.set << '/' << c.corruption << ": " << c.crashed << " agent crashes\n";
        }
      } else if (*b_grid) {
        if (b_agent.kind != "rule-orb") throw Error(ErrorCode::InvalidSpec, "grid search applies to the rule agent");
        auto cache = std::make_shared<FeatureCache>();
        const AgentFamily family = [&](const Threshold& t) {
          return std::make_unique<RuleAgent>(b_agent.rule_config(t), nullptr, cache);
        };
        const auto result = param_search(family, cfg, parse_grid(g_grid));
        std::ostringstream table;
        write_grid_table(table, result);
        std::cout << table.str();
        if (!b_out.empty()) {
          std::filesystem::create_directories(b_out);
          write_text(std::filesystem::path(b_out) / "grid.txt", table.str());
          std::ostringstream csv;
          csv << "set";
          for (const auto& t : result.grid) csv << ',' << threshold_label(t);
          csv << ",best\n";
          for (std::size_t s = 0; s < result.sets.size(); ++s) {
            csv << result.sets[s];
            for (double e : result.eps[s]) csv << ',' << e;
            csv << ',' << threshold_label(result.best[s]) << '\n';
          }
          write_text(std::filesystem::path(b_out) / "grid.csv", csv.str());
        }
      } else if (*b_fps) {
        auto agent = cfg.make_agent();
        std::vector<EpisodeSpec> episodes;
        for (const auto& s : cfg.sets) episodes.insert(episodes.end(), s.episodes.begin(), s.episodes.end());
        const auto r = measure_fps(*agent, episodes, cfg.panoramas, cfg.env, f_warmup, f_frames);
        std::cout << agent->name() << " fps " << format_fps(r.fps) << " (" << r.frames << " frames)\n";
      }
    }
  } catch (const Error& e) {
    std::cerr << "findview: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "findview: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
