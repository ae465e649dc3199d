#include "findview/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "findview/error.hpp"
#include "findview/image_io.hpp"
#include "findview/random.hpp"

namespace findview {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Value noise on a lattice that is periodic in x, sampled at pixel resolution.
class PeriodicNoise {
 public:
  PeriodicNoise(int width, int height, int cell, Rng& rng)
      : cell_(std::max(1, cell)), gx_(std::max(1, width / cell_)), gy_(height / cell_ + 2), lattice_(gx_ * gy_) {
    for (auto& v : lattice_) v = uniform01(rng);
    scale_x_ = static_cast<double>(gx_) / width;
  }

  double at(int x, int y) const {
    const double fx = x * scale_x_;
    const double fy = static_cast<double>(y) / cell_;
    const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
    const double tx = smoothstep(fx - x0), ty = smoothstep(fy - y0);
    const int xa = x0 % gx_, xb = (x0 + 1) % gx_;
    const int ya = std::min(y0, gy_ - 1), yb = std::min(y0 + 1, gy_ - 1);
    const double top = lerp(v(xa, ya), v(xb, ya), tx);
    const double bot = lerp(v(xa, yb), v(xb, yb), tx);
    return lerp(top, bot, ty);
  }

 private:
  static double lerp(double a, double b, double t) { return a + (b - a) * t; }
  double v(int x, int y) const { return lattice_[static_cast<std::size_t>(y) * gx_ + x]; }

  int cell_, gx_, gy_;
  std::vector<double> lattice_;
  double scale_x_ = 1.0;
};

std::vector<double> fractal(int w, int h, int base_cell, int octaves, Rng& rng) {
  std::vector<double> out(static_cast<std::size_t>(w) * h, 0.0);
  double amp = 1.0, total = 0.0;
  int cell = base_cell;
  for (int o = 0; o < octaves && cell >= 1; ++o) {
    PeriodicNoise noise(w, h, cell, rng);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out[static_cast<std::size_t>(y) * w + x] += amp * noise.at(x, y);
    total += amp;
    amp *= 0.55;
    cell /= 2;
  }
  for (auto& v : out) v /= total;
  return out;
}

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

Rgb random_color(Rng& rng, int lo, int hi) {
  return {static_cast<std::uint8_t>(uniform_int(rng, lo, hi)), static_cast<std::uint8_t>(uniform_int(rng, lo, hi)),
          static_cast<std::uint8_t>(uniform_int(rng, lo, hi))};
}

RgbImage make_fractal(int w, int h, Rng& rng) {
  RgbImage img(w, h);
  const int base = std::max(2, w / 16);
  const auto r = fractal(w, h, base, 6, rng);
  const auto g = fractal(w, h, base, 6, rng);
  const auto b = fractal(w, h, base, 6, rng);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t k = static_cast<std::size_t>(y) * w + x;
      // Stretch the mid-range for contrast.
      img.set(x, y, {to_u8((r[k] - 0.5) * 2.2 * 255 + 128), to_u8((g[k] - 0.5) * 2.2 * 255 + 128),
                     to_u8((b[k] - 0.5) * 2.2 * 255 + 128)});
    }
  }
  return img;
}

RgbImage make_voronoi(int w, int h, Rng& rng) {
  const int cell = std::max(4, w / 48);
  const int gx = std::max(1, w / cell), gy = h / cell + 1;
  struct Site {
    double x, y;
    Rgb color;
  };
  std::vector<Site> sites(static_cast<std::size_t>(gx) * gy);
  for (int j = 0; j < gy; ++j)
    for (int i = 0; i < gx; ++i)
      sites[static_cast<std::size_t>(j) * gx + i] = {(i + uniform01(rng)) * w / gx, (j + uniform01(rng)) * cell,
                                                     random_color(rng, 20, 235)};
  const double cw = static_cast<double>(w) / gx;
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int ci = static_cast<int>(x / cw), cj = y / cell;
      double best = 1e300, second = 1e300;
      const Site* nearest = nullptr;
      for (int dj = -1; dj <= 1; ++dj) {
        const int j = cj + dj;
        if (j < 0 || j >= gy) continue;
        for (int di = -1; di <= 1; ++di) {
          const int i = ((ci + di) % gx + gx) % gx;
          const Site& s = sites[static_cast<std::size_t>(j) * gx + i];
          double dx = std::abs(x + 0.5 - s.x);
          dx = std::min(dx, w - dx);
          const double dy = y + 0.5 - s.y;
          const double d = std::sqrt(dx * dx + dy * dy);
          if (d < best) {
            second = best;
            best = d;
            nearest = &s;
          } else if (d < second) {
            second = d;
          }
        }
      }
      img.set(x, y, second - best < 1.2 ? Rgb{15, 15, 15} : nearest->color);
    }
  }
  return img;
}

RgbImage make_grid_tags(int w, int h, Rng& rng) {
  const int cells_x = std::max(1, w / 32);
  const double cell = static_cast<double>(w) / cells_x;
  RgbImage img(w, h);
  const auto bg = fractal(w, h, std::max(2, w / 32), 4, rng);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::uint8_t v = to_u8(90 + 80 * bg[static_cast<std::size_t>(y) * w + x]);
      img.set(x, y, {v, static_cast<std::uint8_t>(v * 0.9), static_cast<std::uint8_t>(v * 0.8)});
    }

  const int cells_y = static_cast<int>(std::ceil(h / cell));
  constexpr int kModules = 5;
  for (int cj = 0; cj < cells_y; ++cj) {
    for (int ci = 0; ci < cells_x; ++ci) {
      const Rgb dark = random_color(rng, 0, 70);
      const Rgb light = random_color(rng, 170, 255);
      const std::uint32_t bits = static_cast<std::uint32_t>(rng());
      // Tag occupies most of the cell at a random sub-cell offset.
      const double module = cell * 0.78 / kModules;
      const double span = module * kModules;
      const double ox = ci * cell + uniform_real(rng, 0.04, 0.18) * cell;
      const double oy = cj * cell + uniform_real(rng, 0.04, 0.18) * cell;
      const int x0 = static_cast<int>(std::floor(ox)), x1 = static_cast<int>(std::ceil(ox + span));
      const int y0 = static_cast<int>(std::floor(oy)), y1 = static_cast<int>(std::ceil(oy + span));
      for (int y = std::max(0, y0); y < std::min(h, y1); ++y) {
        for (int x = x0; x < x1; ++x) {
          const int mx = static_cast<int>((x + 0.5 - ox) / module);
          const int my = static_cast<int>((y + 0.5 - oy) / module);
          if (mx < 0 || my < 0 || mx >= kModules || my >= kModules) continue;
          const bool border = mx == 0 || my == 0 || mx == kModules - 1 || my == kModules - 1;
          const bool on = border ? ((mx + my) % 2 == 0) : ((bits >> ((my - 1) * 3 + (mx - 1))) & 1U);
          img.set(((x % w) + w) % w, y, on ? dark : light);
        }
      }
    }
  }
  return img;
}

}  // namespace

const CatalogEntry* PanoramaCatalog::find(std::string_view id) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), id,
                             [](const CatalogEntry& e, std::string_view v) { return e.id < v; });
  return it != entries.end() && it->id == id ? &*it : nullptr;
}

PanoramaCatalog build_catalog(const fs::path& dir, const std::string& scene) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::Io, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  }
  if (files.empty()) throw Error(ErrorCode::EmptyDirectory, "no PNG/JPEG files in " + dir.string());
  std::sort(files.begin(), files.end());

  PanoramaCatalog cat;
  for (const auto& f : files) {
    const auto size = probe_image_size(f);
    if (!size) {
      cat.warnings.push_back(f.string() + ": not decodable");
      continue;
    }
    if (size->first != 2 * size->second) {
      cat.warnings.push_back(f.string() + ": " + std::to_string(size->first) + "x" + std::to_string(size->second) +
                             " is not 2:1");
      continue;
    }
    const std::string id = f.stem().string();
    if (std::any_of(cat.entries.begin(), cat.entries.end(), [&](const CatalogEntry& e) { return e.id == id; })) {
      cat.warnings.push_back(f.string() + ": duplicate id " + id);
      continue;
    }
    cat.entries.push_back({id, f, size->first, size->second, scene});
  }
  std::sort(cat.entries.begin(), cat.entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return cat;
}

void write_manifest(std::ostream& out, const PanoramaCatalog& catalog) {
  for (const auto& e : catalog.entries) out << e.id << '\t' << e.path.string() << '\t' << e.scene << '\n';
}

PanoramaCatalog read_manifest(std::istream& in) {
  PanoramaCatalog cat;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    CatalogEntry e;
    std::string path;
    if (!std::getline(fields, e.id, '\t') || !std::getline(fields, path, '\t') || !std::getline(fields, e.scene)) {
      throw Error(ErrorCode::Parse, "manifest line " + std::to_string(lineno) + " needs id<TAB>path<TAB>scene");
    }
    e.path = path;
    if (const auto size = probe_image_size(e.path)) {
      e.width = size->first;
      e.height = size->second;
    }
    cat.entries.push_back(std::move(e));
  }
  std::sort(cat.entries.begin(), cat.entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < cat.entries.size(); ++i) {
    if (cat.entries[i].id == cat.entries[i - 1].id) throw Error(ErrorCode::Parse, "duplicate id " + cat.entries[i].id);
  }
  return cat;
}

void SplitSpec::validate() const {
  if (!(train > 0 && val > 0 && test > 0)) throw Error(ErrorCode::InvalidSpec, "split ratios must be positive");
  if (std::abs(train + val + test - 1.0) > 1e-9) throw Error(ErrorCode::InvalidSpec, "split ratios must sum to 1");
}

CatalogSplit split(const PanoramaCatalog& catalog, const SplitSpec& spec) {
  spec.validate();
  std::vector<std::size_t> order(catalog.entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(spec.seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1))]);
  }
  const std::size_t n = order.size();
  const std::size_t n_train = std::min(n, static_cast<std::size_t>(std::llround(spec.train * n)));
  const std::size_t n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(spec.val * n)));

  CatalogSplit out;
  for (std::size_t k = 0; k < n; ++k) {
    PanoramaCatalog& dst = k < n_train ? out.train : (k < n_train + n_val ? out.val : out.test);
    dst.entries.push_back(catalog.entries[order[k]]);
  }
  for (PanoramaCatalog* c : {&out.train, &out.val, &out.test}) {
    std::sort(c->entries.begin(), c->entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  }
  return out;
}

std::vector<EpisodeSpec> generate_episode_set(const std::vector<std::string>& pano_ids, const EpisodeSetConfig& cfg) {
  Rng rng(cfg.seed);
  std::vector<EpisodeSpec> out;
  out.reserve(pano_ids.size() * static_cast<std::size_t>(std::max(0, cfg.per_pano)));
  for (const auto& id : pano_ids) {
    for (int i = 0; i < cfg.per_pano; ++i) {
      EpisodeSpec spec = sample_episode(cfg.difficulty, id, cfg.fov, rng, cfg.sampler);
      if (cfg.corruption) spec.corruption = CorruptionSpec{cfg.corruption->first, cfg.corruption->second, spec.seed};
      out.push_back(std::move(spec));
    }
  }
  return out;
}

std::string_view to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::Voronoi: return "voronoi";
    case SynthKind::FractalNoise: return "fractal-noise";
    case SynthKind::GridTags: return "grid-tags";
  }
  return "grid-tags";
}

std::optional<SynthKind> parse_synth_kind(std::string_view name) {
  for (SynthKind k : {SynthKind::Voronoi, SynthKind::FractalNoise, SynthKind::GridTags})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

EquirectImage synth_panorama(SynthKind kind, int width, int height, std::uint64_t seed) {
  if (width < 2 || height < 1 || width != 2 * height) {
    throw Error(ErrorCode::BadAspect, "synthetic panorama must be 2:1, got " + std::to_string(width) + "x" +
                                          std::to_string(height));
  }
  Rng rng(mix_seed(seed, 0x5157 + static_cast<std::uint64_t>(kind)));
  switch (kind) {
    case SynthKind::Voronoi: return EquirectImage(make_voronoi(width, height, rng));
    case SynthKind::FractalNoise: return EquirectImage(make_fractal(width, height, rng));
    case SynthKind::GridTags: return EquirectImage(make_grid_tags(width, height, rng));
  }
  throw Error(ErrorCode::InvalidSpec, "unknown synthetic kind");
}

std::string synth_id(SynthKind kind, std::uint64_t seed, int width) {
  std::string id = "synth:" + std::string(to_string(kind)) + ":" + std::to_string(seed);
  if (width != 1024) id += ":" + std::to_string(width);
  return id;
}

PanoramaStore::PanoramaStore(PanoramaCatalog catalog) : catalog_(std::move(catalog)) {}

void PanoramaStore::add(const std::string& id, EquirectImage image) {
  std::lock_guard lock(mutex_);
  cache_[id] = std::make_shared<const EquirectImage>(std::move(image));
}

std::shared_ptr<const EquirectImage> PanoramaStore::get(const std::string& id) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(id); it != cache_.end()) return it->second;
  }
  std::shared_ptr<const EquirectImage> loaded;
  if (id.rfind("synth:", 0) == 0) {
    // synth:<kind>:<seed>[:<width>]
    std::vector<std::string> parts;
    std::istringstream s(id);
    for (std::string part; std::getline(s, part, ':');) parts.push_back(part);
    const auto kind = parts.size() >= 3 ? parse_synth_kind(parts[1]) : std::nullopt;
    if (!kind || parts.size() > 4) throw Error(ErrorCode::MissingPanorama, "bad synthetic id " + id);
    try {
      const std::uint64_t seed = std::stoull(parts[2]);
      const int width = parts.size() == 4 ? std::stoi(parts[3]) : 1024;
      loaded = std::make_shared<const EquirectImage>(synth_panorama(*kind, width, width / 2, seed));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::MissingPanorama, "bad synthetic id " + id);
    }
  } else {
    const CatalogEntry* entry = catalog_.find(id);
    if (!entry) throw Error(ErrorCode::MissingPanorama, "unknown panorama id " + id);
    try {
      loaded = std::make_shared<const EquirectImage>(load_image(entry->path));
    } catch (const Error& e) {
      throw Error(ErrorCode::MissingPanorama, e.what());
    }
  }
  std::lock_guard lock(mutex_);
  return cache_.try_emplace(id, loaded).first->second;
}

}  // namespace findview
