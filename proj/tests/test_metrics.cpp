#include <gtest/gtest.h>

#include <sstream>

#include "findview/metrics.hpp"
#include "test_util.hpp"

using namespace findview;
using findview::oracle::error_of;

namespace {

EpisodeOutcome outcome(ViewRotation init, ViewRotation fin, ViewRotation target, int path, bool stop) {
  return {"e", init, fin, target, path, stop, !stop};
}

}  // namespace

TEST(Metrics, LocalizationError) {
  EXPECT_EQ(localization_error(outcome({0, 0}, {2, 178}, {0, -179}, 5, true)), 5.0);
}

TEST(Metrics, OraclePathLength) {
  EXPECT_EQ(oracle_path_length({0, 170}, {3, -170}), 23);
  EXPECT_EQ(oracle_path_length({0, 0}, {10, 20}, 5), 6);
  EXPECT_EQ(error_of([] { oracle_path_length({0, 0.5}, {0, 0}); }), ErrorCode::OffGrid);
  EXPECT_EQ(error_of([] { oracle_path_length({0, 3}, {0, 0}, 5); }), ErrorCode::OffGrid);
}

TEST(Metrics, SplExamples) {
  const std::vector<EpisodeOutcome> exact{outcome({0, 0}, {0, 10}, {0, 10}, 10, true)};
  EXPECT_EQ(spl(exact), 100.0);
  const std::vector<EpisodeOutcome> detour{outcome({0, 0}, {0, 10}, {0, 10}, 20, true)};
  EXPECT_EQ(spl(detour), 50.0);
  const std::vector<EpisodeOutcome> miss{outcome({0, 0}, {0, 9}, {0, 10}, 9, true)};
  EXPECT_EQ(spl(miss), 0.0);
  // Start at the target: oracle length is zero and success counts fully.
  const std::vector<EpisodeOutcome> trivial{outcome({5, 5}, {5, 5}, {5, 5}, 0, true)};
  EXPECT_EQ(spl(trivial), 100.0);
  EXPECT_EQ(error_of([] { spl({}); }), ErrorCode::EmptyInput);
}

TEST(Metrics, TwoEpisodeAggregate) {
  const std::vector<EpisodeOutcome> two{outcome({0, 0}, {0, 10}, {0, 10}, 10, true),
                                        outcome({0, 0}, {0, 6}, {0, 10}, 6, true)};
  const auto row = aggregate(two);
  EXPECT_EQ(row.eps, 2.0);
  EXPECT_EQ(row.omega_stop, 100.0);
  EXPECT_EQ(row.omega_perf, 50.0);
  EXPECT_EQ(row.spl, 50.0);
  EXPECT_EQ(row.n, 2);
  EXPECT_EQ(row.n_stop, 2);
  EXPECT_EQ(row.n_perf, 1);
}

TEST(Metrics, NoStopsMeansNoPerfectRate) {
  const std::vector<EpisodeOutcome> never{outcome({0, 0}, {0, 10}, {0, 10}, 5000, false)};
  const auto row = aggregate(never);
  EXPECT_EQ(row.omega_stop, 0.0);
  EXPECT_EQ(row.omega_perf, 0.0);
  // Landing on the target without stopping still counts toward path efficiency.
  EXPECT_DOUBLE_EQ(row.spl, 100.0 * 10 / 5000);
}

TEST(Metrics, SplBoundedProperty) {
  std::vector<EpisodeOutcome> all;
  for (int p = 0; p < 20; ++p) {
    all.push_back(outcome({0, 0}, {0, double(p % 3)}, {0, 0}, p, p % 2 == 0));
    const double s = spl(all);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 100.0);
  }
}

TEST(Metrics, CsvAndTable) {
  BenchmarkRow row{3.4125, 98.7, 42.0, 40.5, 100, 98, 41};
  EXPECT_EQ(csv_row("easy", row), "easy,3.4125,98.7000,42.0000,40.5000,100,98,41");
  std::ostringstream out;
  const std::vector<LabeledRow> rows{{"easy", row}};
  write_table(out, "orb", rows);
  EXPECT_NE(out.str().find("easy"), std::string::npos);
  EXPECT_NE(out.str().find("98.70"), std::string::npos);
}
