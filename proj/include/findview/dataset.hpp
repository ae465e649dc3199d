#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "findview/environment.hpp"
#include "findview/projection.hpp"

namespace findview {

struct CatalogEntry {
  std::string id;
  std::filesystem::path path;
  int width = 0;
  int height = 0;
  std::string scene = "unknown";  // indoor / outdoor / synthetic / unknown

  friend bool operator==(const CatalogEntry&, const CatalogEntry&) = default;
};

struct PanoramaCatalog {
  std::vector<CatalogEntry> entries;  // sorted by id, ids unique
  std::vector<std::string> warnings;  // rejected files

  std::size_t size() const { return entries.size(); }
  const CatalogEntry* find(std::string_view id) const;
};

/// Scans a directory (non-recursive) for PNG/JPEG panoramas. Files that are not 2:1 are listed in
/// warnings and excluded. Throws EmptyDirectory when no image files are present.
PanoramaCatalog build_catalog(const std::filesystem::path& dir, const std::string& scene = "unknown");

/// Manifest lines: id<TAB>path<TAB>scene. Width and height are probed on read.
void write_manifest(std::ostream& out, const PanoramaCatalog& catalog);
PanoramaCatalog read_manifest(std::istream& in);

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct CatalogSplit {
  PanoramaCatalog train;
  PanoramaCatalog val;
  PanoramaCatalog test;
};

/// Seeded shuffle, then partition by ratios (train and val rounded, test takes the rest).
CatalogSplit split(const PanoramaCatalog& catalog, const SplitSpec& spec);

struct EpisodeSetConfig {
  Difficulty difficulty = Difficulty::Easy;
  int per_pano = 10;
  double fov = 90.0;
  std::optional<std::pair<CorruptionKind, int>> corruption;
  std::uint64_t seed = 0;
  SamplerConfig sampler;
};

/// Deterministic episode list over the given panorama ids, in order.
std::vector<EpisodeSpec> generate_episode_set(const std::vector<std::string>& pano_ids, const EpisodeSetConfig& cfg);

enum class SynthKind { Voronoi, FractalNoise, GridTags };

std::string_view to_string(SynthKind kind);
std::optional<SynthKind> parse_synth_kind(std::string_view name);

/// Seamless (wraps in yaw), seeded, richly textured panorama. Throws BadAspect unless width = 2 * height.
EquirectImage synth_panorama(SynthKind kind, int width, int height, std::uint64_t seed);

/// Synthetic panorama id: "synth:<kind>:<seed>[:<width>]" (default width 1024).
std::string synth_id(SynthKind kind, std::uint64_t seed, int width = 1024);

/// Resolves catalog ids from disk and synthetic ids by generation; caches decoded panoramas.
class PanoramaStore : public PanoramaSource {
 public:
  PanoramaStore() = default;
  explicit PanoramaStore(PanoramaCatalog catalog);

  std::shared_ptr<const EquirectImage> get(const std::string& id) const override;

  /// Registers an in-memory panorama under an id.
  void add(const std::string& id, EquirectImage image);

 private:
  PanoramaCatalog catalog_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, std::shared_ptr<const EquirectImage>, std::less<>> cache_;
};

}  // namespace findview
