#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "findview/projection.hpp"

namespace findview {

struct EpisodeOutcome {
  std::string episode_id;
  ViewRotation initial;
  ViewRotation final_rotation;
  ViewRotation target;
  int path_length = 0;  // movement actions only; stop is not counted
  bool stop_called = false;
  bool forced = false;
};

struct BenchmarkRow {
  double eps = 0.0;         // mean localization error, degrees
  double omega_stop = 0.0;  // percent
  double omega_perf = 0.0;  // percent of stopped episodes
  double spl = 0.0;         // percent
  int n = 0;
  int n_stop = 0;
  int n_perf = 0;
};

double localization_error(const EpisodeOutcome& outcome);

/// Minimal number of movement steps between two rotations on the step grid.
/// Throws OffGrid when either rotation is not a multiple of step_deg.
int oracle_path_length(const ViewRotation& init, const ViewRotation& target, int step_deg = 1);

/// Percent in [0, 100]. Throws EmptyInput on an empty list.
double spl(std::span<const EpisodeOutcome> outcomes, int step_deg = 1);

/// Throws EmptyInput on an empty list.
BenchmarkRow aggregate(std::span<const EpisodeOutcome> outcomes, int step_deg = 1);

inline constexpr const char* kCsvHeader = "difficulty,eps,omega_stop,omega_perf,spl,n,n_stop,n_perf";

std::string csv_row(const std::string& label, const BenchmarkRow& row);

struct LabeledRow {
  std::string label;
  BenchmarkRow row;
};

/// Aligned plain-text table, one block of four metric columns per labeled row.
void write_table(std::ostream& out, const std::string& title, std::span<const LabeledRow> rows);

}  // namespace findview
