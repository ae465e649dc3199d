#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "findview/dataset.hpp"
#include "findview/image_io.hpp"
#include "test_util.hpp"

using namespace findview;
using findview::oracle::error_of;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("findview_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                         "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace

TEST(Synth, SeamlessAndDeterministic) {
  for (SynthKind k : {SynthKind::Voronoi, SynthKind::FractalNoise, SynthKind::GridTags}) {
    const auto a = synth_panorama(k, 512, 256, 5);
    EXPECT_EQ(a, synth_panorama(k, 512, 256, 5)) << to_string(k);
    EXPECT_NE(a, synth_panorama(k, 512, 256, 6)) << to_string(k);
    // Wrap seam: last column is about as close to the first as neighbouring columns are to each other.
    double seam = 0, inner = 0;
    for (int y = 0; y < 256; ++y) {
      const Rgb l = a.pixels().at(511, y), r = a.pixels().at(0, y), m0 = a.pixels().at(255, y), m1 = a.pixels().at(256, y);
      seam += std::abs(l.r - r.r) + std::abs(l.g - r.g) + std::abs(l.b - r.b);
      inner += std::abs(m0.r - m1.r) + std::abs(m0.g - m1.g) + std::abs(m0.b - m1.b);
    }
    EXPECT_LT(seam, 3.0 * inner + 256 * 3) << to_string(k);
  }
  EXPECT_EQ(error_of([] { synth_panorama(SynthKind::GridTags, 300, 100, 1); }), ErrorCode::BadAspect);
}

TEST(Synth, KindNames) {
  for (SynthKind k : {SynthKind::Voronoi, SynthKind::FractalNoise, SynthKind::GridTags})
    EXPECT_EQ(parse_synth_kind(to_string(k)), k);
  EXPECT_EQ(synth_id(SynthKind::GridTags, 7), "synth:grid-tags:7");
  EXPECT_EQ(synth_id(SynthKind::Voronoi, 7, 512), "synth:voronoi:7:512");
}

TEST(Store, ResolvesSyntheticIds) {
  PanoramaStore store;
  const auto a = store.get("synth:voronoi:3:256");
  EXPECT_EQ(a->width(), 256);
  EXPECT_EQ(a.get(), store.get("synth:voronoi:3:256").get());
  EXPECT_EQ(*a, synth_panorama(SynthKind::Voronoi, 256, 128, 3));
  EXPECT_EQ(error_of([&] { store.get("synth:marble:3"); }), ErrorCode::MissingPanorama);
  EXPECT_EQ(error_of([&] { store.get("synth:voronoi:x"); }), ErrorCode::MissingPanorama);
  EXPECT_EQ(error_of([&] { store.get("livingroom"); }), ErrorCode::MissingPanorama);
}

TEST(Catalog, ScansDirectoryAndRejectsBadAspect) {
  TempDir dir;
  save_image(synth_panorama(SynthKind::Voronoi, 64, 32, 1).pixels(), dir.path() / "b.png");
  save_image(synth_panorama(SynthKind::Voronoi, 64, 32, 2).pixels(), dir.path() / "a.jpg");
  save_image(RgbImage(50, 40), dir.path() / "square.png");
  std::ofstream(dir.path() / "notes.txt") << "hello";
  const auto cat = build_catalog(dir.path(), "outdoor");
  ASSERT_EQ(cat.size(), 2u);
  EXPECT_EQ(cat.entries[0].id, "a");
  EXPECT_EQ(cat.entries[1].id, "b");
  EXPECT_EQ(cat.entries[1].width, 64);
  EXPECT_EQ(cat.entries[1].scene, "outdoor");
  ASSERT_EQ(cat.warnings.size(), 1u);
  EXPECT_NE(cat.warnings[0].find("square.png"), std::string::npos);
  EXPECT_NE(cat.find("b"), nullptr);
  EXPECT_EQ(cat.find("c"), nullptr);

  PanoramaStore store(cat);
  EXPECT_EQ(store.get("b")->pixels(), synth_panorama(SynthKind::Voronoi, 64, 32, 1).pixels());

  std::stringstream manifest;
  write_manifest(manifest, cat);
  const auto back = read_manifest(manifest);
  EXPECT_EQ(back.entries, cat.entries);
}

TEST(Catalog, EmptyDirectory) {
  TempDir dir;
  EXPECT_EQ(error_of([&] { build_catalog(dir.path()); }), ErrorCode::EmptyDirectory);
}

TEST(Split, PartitionsDeterministically) {
  PanoramaCatalog cat;
  for (int i = 0; i < 100; ++i) cat.entries.push_back({"p" + std::to_string(1000 + i), "x", 2, 1, "unknown"});
  const auto s = split(cat, {0.8, 0.1, 0.1, 3});
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.val.size(), 10u);
  EXPECT_EQ(s.test.size(), 10u);
  std::set<std::string> ids;
  for (const auto* part : {&s.train, &s.val, &s.test})
    for (const auto& e : part->entries) EXPECT_TRUE(ids.insert(e.id).second);
  EXPECT_EQ(ids.size(), 100u);
  const auto again = split(cat, {0.8, 0.1, 0.1, 3});
  EXPECT_EQ(again.test.entries, s.test.entries);
  const auto other = split(cat, {0.8, 0.1, 0.1, 4});
  EXPECT_NE(other.test.entries, s.test.entries);
  EXPECT_EQ(error_of([&] { split(cat, {0.8, 0.3, 0.1, 0}); }), ErrorCode::InvalidSpec);
}

TEST(EpisodeSet, DeterministicWithCorruption) {
  EpisodeSetConfig cfg;
  cfg.difficulty = Difficulty::Medium;
  cfg.per_pano = 3;
  cfg.seed = 17;
  cfg.corruption = std::make_pair(CorruptionKind::Fog, 3);
  const std::vector<std::string> ids{"a", "b"};
  const auto eps = generate_episode_set(ids, cfg);
  ASSERT_EQ(eps.size(), 6u);
  EXPECT_EQ(eps, generate_episode_set(ids, cfg));
  for (const auto& e : eps) {
    EXPECT_EQ(e.difficulty, Difficulty::Medium);
    ASSERT_TRUE(e.corruption);
    EXPECT_EQ(e.corruption->seed, e.seed);
    EXPECT_EQ(classify_difficulty(e.initial, e.target, 90, 10), Difficulty::Medium);
  }
  EXPECT_EQ(eps[0].pano, "a");
  EXPECT_EQ(eps[5].pano, "b");
}
