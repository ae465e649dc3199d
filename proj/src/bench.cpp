#include "findview/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "findview/error.hpp"

namespace findview {

namespace {

constexpr std::string_view kBegin = "# begin\t";
constexpr std::string_view kEnd = "# end\t";

std::string_view end_name(EpisodeEnd e) {
  switch (e) {
    case EpisodeEnd::Stopped: return "stopped";
    case EpisodeEnd::Forced: return "forced";
    case EpisodeEnd::Crashed: return "crashed";
  }
  return "forced";
}

std::optional<EpisodeEnd> parse_end(std::string_view s) {
  if (s == "stopped") return EpisodeEnd::Stopped;
  if (s == "forced") return EpisodeEnd::Forced;
  if (s == "crashed") return EpisodeEnd::Crashed;
  return std::nullopt;
}

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

int to_int(const std::string& s) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw Error(ErrorCode::Parse, "expected an integer, got '" + s + "'");
  return v;
}

std::string one_line(std::string s) {
  std::replace_if(s.begin(), s.end(), [](char c) { return c == '\n' || c == '\r' || c == '\t'; }, ' ');
  return s;
}

std::string file_safe(std::string s) {
  std::replace_if(
      s.begin(), s.end(), [](char c) { return !(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'); },
      '-');
  return s;
}

EnvConfig env_for(const EnvConfig& base, double fov) {
  EnvConfig cfg = base;
  cfg.camera = default_camera(fov);
  return cfg;
}

EpisodeSpec apply_cell(EpisodeSpec spec, const CorruptionCell& cell) {
  if (cell) spec.corruption = CorruptionSpec{cell->first, cell->second, spec.seed};
  return spec;
}

AgentInput input_for(const Agent& agent, const StepResult& r, const EpisodeSpec& spec) {
  if (!agent.privileged()) return AgentInput{r.observation, std::nullopt, std::nullopt};
  return AgentInput{r.observation, r.info.rotation, spec.target};
}

EpisodeRecord run_episode(Agent& agent, FindViewEnv& env, const EpisodeSpec& spec, int index) {
  EpisodeRecord rec;
  rec.index = index;
  rec.spec = spec;
  StepResult r = env.reset(spec);
  try {
    agent.reset();
    while (!r.done) {
      const Action a = agent.act(input_for(agent, r, spec));
      r = env.step(a);
      rec.steps.push_back({r.info.step, a, r.reward, static_cast<int>(r.info.rotation.pitch),
                           static_cast<int>(r.info.rotation.yaw)});
    }
  } catch (const std::exception& e) {
    rec.end = EpisodeEnd::Crashed;
    rec.message = one_line(e.what());
    return rec;
  }
  rec.end = r.info.stop_called ? EpisodeEnd::Stopped : EpisodeEnd::Forced;
  return rec;
}

// Runs episodes [first, specs.size()) on worker threads; `emit` sees records in index order.
void run_episodes(const BenchConfig& cfg, const std::vector<EpisodeSpec>& specs, std::size_t first,
                  const std::function<void(EpisodeRecord&&)>& emit) {
  if (first >= specs.size()) return;
  const std::size_t n = specs.size();
  const int workers = static_cast<int>(std::min<std::size_t>(std::max(cfg.threads, 1), n - first));
  std::atomic<std::size_t> next{first};
  std::mutex mutex;
  std::vector<std::optional<EpisodeRecord>> ready(n);
  std::size_t emitted = first;
  std::exception_ptr failure;

  auto work = [&] {
    try {
      auto agent = cfg.make_agent();
      std::map<double, std::unique_ptr<FindViewEnv>> envs;
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) break;
        {
          std::lock_guard lock(mutex);
          if (failure) break;
        }
        auto& env = envs[specs[i].fov];
        if (!env) env = std::make_unique<FindViewEnv>(env_for(cfg.env, specs[i].fov), cfg.panoramas);
        auto rec = run_episode(*agent, *env, specs[i], static_cast<int>(i));
        std::lock_guard lock(mutex);
        ready[i] = std::move(rec);
        while (emitted < n && ready[emitted]) {
          emit(std::move(*ready[emitted]));
          ready[emitted].reset();
          ++emitted;
        }
      }
    } catch (...) {
      std::lock_guard lock(mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::string corruption_label(const CorruptionCell& cell) {
  if (!cell) return "none";
  return std::string(to_string(cell->first)) + ":" + std::to_string(cell->second);
}

void BenchConfig::validate() const {
  if (!make_agent) throw Error(ErrorCode::InvalidSpec, "benchmark needs an agent");
  if (!panoramas) throw Error(ErrorCode::InvalidSpec, "benchmark needs a panorama source");
  if (sets.empty()) throw Error(ErrorCode::InvalidSpec, "benchmark needs at least one episode set");
  if (corruptions.empty()) throw Error(ErrorCode::InvalidSpec, "corruption matrix is empty");
  for (const auto& c : corruptions) {
    if (c && (c->second < 1 || c->second > 5)) throw Error(ErrorCode::InvalidSeverity, corruption_label(c));
  }
  for (const auto& s : sets) {
    if (s.episodes.empty()) throw Error(ErrorCode::InvalidSpec, "episode set '" + s.label + "' is empty");
  }
  if (threads < 1) throw Error(ErrorCode::InvalidSpec, "threads must be positive");
  env.validate();
}

std::string format_record(const EpisodeRecord& record) {
  std::string out;
  out += kBegin;
  out += std::to_string(record.index) + '\t' + serialize_episode(record.spec) + '\n';
  char reward[40];
  for (const auto& s : record.steps) {
    std::snprintf(reward, sizeof reward, "%.17g", s.reward);
    out += std::to_string(record.index) + '\t' + std::to_string(s.t) + '\t' + std::string(to_string(s.action)) +
           '\t' + reward + '\t' + std::to_string(s.pitch) + '\t' + std::to_string(s.yaw) + '\n';
  }
  out += kEnd;
  out += std::to_string(record.index) + '\t' + std::string(end_name(record.end));
  if (!record.message.empty()) out += '\t' + one_line(record.message);
  out += '\n';
  return out;
}

ParsedTrace parse_trace(std::istream& in) {
  ParsedTrace trace;
  std::optional<EpisodeRecord> open;
  std::size_t offset = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (in.eof()) break;  // unterminated last line
    offset += line.size() + 1;
    const std::string where = "trace line " + std::to_string(line_no);
    if (line.starts_with(kBegin)) {
      if (open) throw Error(ErrorCode::Parse, where + ": episode " + std::to_string(open->index) + " never ended");
      const auto tab = line.find('\t', kBegin.size());
      if (tab == std::string::npos) throw Error(ErrorCode::Parse, where + ": malformed begin line");
      open.emplace();
      open->index = to_int(line.substr(kBegin.size(), tab - kBegin.size()));
      open->spec = parse_episode(std::string_view(line).substr(tab + 1));
    } else if (line.starts_with(kEnd)) {
      const auto f = split_tabs(std::string_view(line).substr(kEnd.size()));
      if (!open || f.size() < 2 || to_int(f[0]) != open->index) {
        throw Error(ErrorCode::Parse, where + ": end line does not close the open episode");
      }
      const auto end = parse_end(f[1]);
      if (!end) throw Error(ErrorCode::Parse, where + ": unknown episode end '" + f[1] + "'");
      open->end = *end;
      if (f.size() > 2) open->message = f[2];
      trace.records.push_back(std::move(*open));
      open.reset();
      trace.complete_bytes = offset;
    } else if (!line.empty() && line[0] == '#') {
      continue;
    } else {
      const auto f = split_tabs(line);
      if (!open || f.size() != 6 || to_int(f[0]) != open->index) {
        throw Error(ErrorCode::Parse, where + ": step line outside its episode");
      }
      const auto action = parse_action(f[2]);
      if (!action) throw Error(ErrorCode::Parse, where + ": unknown action '" + f[2] + "'");
      TraceStep s;
      s.t = to_int(f[1]);
      s.action = *action;
      try {
        s.reward = std::stod(f[3]);
      } catch (const std::exception&) {
        throw Error(ErrorCode::Parse, where + ": bad reward '" + f[3] + "'");
      }
      s.pitch = to_int(f[4]);
      s.yaw = to_int(f[5]);
      open->steps.push_back(s);
    }
  }
  return trace;
}

ParsedTrace read_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open trace " + path.string());
  return parse_trace(in);
}

EpisodeOutcome outcome_of(const EpisodeRecord& record) {
  EpisodeOutcome o;
  o.episode_id = record.spec.pano + "#" + std::to_string(record.index);
  o.initial = record.spec.initial;
  o.target = record.spec.target;
  o.final_rotation = record.spec.initial;
  if (!record.steps.empty()) {
    o.final_rotation = ViewRotation{static_cast<double>(record.steps.back().pitch),
                                    static_cast<double>(record.steps.back().yaw)};
  }
  o.path_length = static_cast<int>(
      std::count_if(record.steps.begin(), record.steps.end(), [](const TraceStep& s) { return is_movement(s.action); }));
  o.stop_called = record.end == EpisodeEnd::Stopped;
  o.forced = record.end != EpisodeEnd::Stopped;
  return o;
}

BenchmarkRow aggregate_records(const std::vector<EpisodeRecord>& records) {
  std::vector<EpisodeOutcome> outcomes;
  outcomes.reserve(records.size());
  for (const auto& r : records) outcomes.push_back(outcome_of(r));
  return aggregate(outcomes);
}

BenchResult run_benchmark(const BenchConfig& cfg) {
  cfg.validate();
  BenchResult result;
  result.agent = cfg.make_agent()->name();
  const bool to_disk = !cfg.out_dir.empty();
  if (to_disk) std::filesystem::create_directories(cfg.out_dir / "traces");

  for (const auto& set : cfg.sets) {
    for (const auto& corruption : cfg.corruptions) {
      CellResult cell;
      cell.set = set.label;
      cell.corruption = corruption_label(corruption);
      std::vector<EpisodeSpec> specs;
      for (const auto& e : set.episodes) specs.push_back(apply_cell(e, corruption));

      std::vector<EpisodeRecord> records;
      std::ofstream trace;
      if (to_disk) {
        cell.trace = cfg.out_dir / "traces" / (file_safe(set.label) + "__" + file_safe(cell.corruption) + ".trace");
        if (cfg.resume && std::filesystem::exists(cell.trace)) {
          auto parsed = read_trace_file(cell.trace);
          for (std::size_t i = 0; i < parsed.records.size(); ++i) {
            const auto& r = parsed.records[i];
            if (r.index != static_cast<int>(i) || i >= specs.size() || !(r.spec == specs[i])) {
              throw Error(ErrorCode::InvalidSpec,
                          cell.trace.string() + " was written for a different episode set; remove it or disable resume");
            }
          }
          std::filesystem::resize_file(cell.trace, parsed.complete_bytes);
          records = std::move(parsed.records);
        } else {
          std::ofstream(cell.trace, std::ios::binary | std::ios::trunc);
        }
        trace.open(cell.trace, std::ios::binary | std::ios::app);
        if (!trace) throw Error(ErrorCode::Io, "cannot write " + cell.trace.string());
      }

      run_episodes(cfg, specs, records.size(), [&](EpisodeRecord&& rec) {
        if (to_disk) {
          trace << format_record(rec);
          trace.flush();
          if (!trace) throw Error(ErrorCode::Io, "write failed on " + cell.trace.string());
        }
        records.push_back(std::move(rec));
      });

      if (to_disk) {
        trace.close();
        records = read_trace_file(cell.trace).records;
      }
      cell.row = aggregate_records(records);
      cell.crashed = static_cast<int>(
          std::count_if(records.begin(), records.end(), [](const EpisodeRecord& r) { return r.end == EpisodeEnd::Crashed; }));
      result.cells.push_back(std::move(cell));
    }
  }

  if (to_disk) {
    std::ofstream csv(cfg.out_dir / "results.csv");
    write_bench_csv(csv, result);
    std::ofstream tables(cfg.out_dir / "tables.txt");
    write_bench_tables(tables, result);
  }
  return result;
}

void write_bench_csv(std::ostream& out, const BenchResult& result) {
  out << kBenchCsvHeader << '\n';
  for (const auto& c : result.cells) out << c.set << ',' << csv_row(c.corruption, c.row) << '\n';
}

void write_bench_tables(std::ostream& out, const BenchResult& result) {
  std::vector<std::string> corruptions;
  for (const auto& c : result.cells) {
    if (std::find(corruptions.begin(), corruptions.end(), c.corruption) == corruptions.end()) {
      corruptions.push_back(c.corruption);
    }
  }
  bool first = true;
  for (const auto& corruption : corruptions) {
    std::vector<LabeledRow> rows;
    for (const auto& c : result.cells) {
      if (c.corruption == corruption) rows.push_back({c.set, c.row});
    }
    if (!first) out << '\n';
    first = false;
    write_table(out, result.agent + ", corruption " + corruption, rows);
  }
}

std::vector<Threshold> default_grid() {
  std::vector<Threshold> grid;
  for (int v = 10; v <= 100; v += 10) grid.emplace_back(v);
  grid.emplace_back(std::nullopt);
  return grid;
}

std::vector<Threshold> parse_grid(std::string_view text) {
  std::vector<Threshold> grid;
  std::vector<std::string> items;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto pos = text.find(',', start);
    items.emplace_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string& item = items[i];
    if (item == "inf" || item == "∞") {
      grid.emplace_back(std::nullopt);
    } else if (item == "...") {
      if (grid.size() < 2 || !grid[grid.size() - 1] || !grid[grid.size() - 2] || i + 1 >= items.size()) {
        throw Error(ErrorCode::Parse, "'...' needs two numbers before it and one after");
      }
      const double step = *grid[grid.size() - 1] - *grid[grid.size() - 2];
      const std::string& stop_text = items[i + 1];
      const double stop = stop_text == "inf" ? 100.0 : std::stod(stop_text);
      if (step <= 0) throw Error(ErrorCode::Parse, "'...' needs an increasing sequence");
      for (double v = *grid.back() + step; v < stop - 1e-9; v += step) grid.emplace_back(v);
    } else {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(item, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != item.size() || !(v >= 0)) {
        throw Error(ErrorCode::Parse, "bad threshold '" + item + "'");
      }
      grid.emplace_back(v);
    }
  }
  if (grid.empty()) throw Error(ErrorCode::EmptyInput, "empty grid");
  return grid;
}

std::string threshold_label(const Threshold& t) {
  if (!t) return "inf";
  std::ostringstream s;
  s << *t;
  return s.str();
}

namespace {

bool threshold_less(const Threshold& a, const Threshold& b) {
  if (!a) return false;
  if (!b) return true;
  return *a < *b;
}

}  // namespace

GridSearchResult param_search(const AgentFamily& family, const BenchConfig& base, const std::vector<Threshold>& grid) {
  if (grid.empty()) throw Error(ErrorCode::EmptyInput, "empty threshold grid");
  if (base.sets.empty()) throw Error(ErrorCode::EmptyInput, "no validation episodes");
  GridSearchResult result;
  result.grid = grid;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    BenchConfig cfg = base;
    cfg.out_dir.clear();
    const Threshold t = grid[g];
    cfg.make_agent = [&family, t] { return family(t); };
    const auto run = run_benchmark(cfg);
    if (g == 0) {
      for (const auto& c : run.cells) result.sets.push_back(c.corruption == "none" ? c.set : c.set + "/" + c.corruption);
      result.eps.assign(run.cells.size(), std::vector<double>(grid.size(), 0.0));
    }
    for (std::size_t c = 0; c < run.cells.size(); ++c) result.eps[c][g] = run.cells[c].row.eps;
  }
  for (const auto& row : result.eps) {
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
      if (row[g] < row[best] || (row[g] == row[best] && threshold_less(grid[g], grid[best]))) best = g;
    }
    result.best.push_back(grid[best]);
  }
  return result;
}

void write_grid_table(std::ostream& out, const GridSearchResult& result) {
  std::size_t label_w = 10;
  for (const auto& s : result.sets) label_w = std::max(label_w, s.size());
  out << std::left << std::setw(static_cast<int>(label_w)) << "d_thresh" << std::right;
  for (const auto& t : result.grid) out << std::setw(9) << threshold_label(t);
  out << std::setw(9) << "best" << '\n';
  for (std::size_t c = 0; c < result.sets.size(); ++c) {
    out << std::left << std::setw(static_cast<int>(label_w)) << result.sets[c] << std::right << std::fixed
        << std::setprecision(2);
    for (double e : result.eps[c]) out << std::setw(9) << e;
    out << std::setw(9) << threshold_label(result.best[c]) << '\n';
    out.unsetf(std::ios::floatfield);
  }
}

FpsResult measure_fps(Agent& agent, const std::vector<EpisodeSpec>& episodes,
                      std::shared_ptr<const PanoramaSource> panoramas, const EnvConfig& env, int warmup,
                      long max_frames) {
  if (episodes.empty()) throw Error(ErrorCode::EmptyInput, "fps measurement needs at least one episode");
  using clock = std::chrono::steady_clock;
  std::map<double, std::unique_ptr<FindViewEnv>> envs;
  FpsResult result;
  clock::duration spent{};
  long calls = 0;
  for (const auto& spec : episodes) {
    if (result.frames >= max_frames) break;
    auto& e = envs[spec.fov];
    if (!e) e = std::make_unique<FindViewEnv>(env_for(env, spec.fov), panoramas);
    StepResult r = e->reset(spec);
    agent.reset();
    while (!r.done && result.frames < max_frames) {
      const AgentInput input = input_for(agent, r, spec);
      const auto t0 = clock::now();
      const Action a = agent.act(input);
      const auto t1 = clock::now();
      if (calls++ >= warmup) {
        spent += t1 - t0;
        ++result.frames;
      }
      r = e->step(a);
    }
  }
  result.seconds = std::chrono::duration<double>(spent).count();
  result.fps = result.frames == 0 ? 0.0 : result.frames / std::max(result.seconds, 1e-9);
  return result;
}

std::string format_fps(double fps) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", fps);
  return buf;
}

}  // namespace findview
