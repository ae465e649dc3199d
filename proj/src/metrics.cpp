#include "findview/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "findview/environment.hpp"
#include "findview/error.hpp"

namespace findview {

double localization_error(const EpisodeOutcome& outcome) { return angular_l1(outcome.target, outcome.final_rotation); }

int oracle_path_length(const ViewRotation& init, const ViewRotation& target, int step_deg) {
  for (const ViewRotation& r : {init, target}) {
    for (double v : {r.pitch, r.yaw}) {
      if (std::floor(v) != v || static_cast<long long>(v) % step_deg != 0) {
        throw Error(ErrorCode::OffGrid, "rotation component " + std::to_string(v) + " is not on the " +
                                            std::to_string(step_deg) + " degree grid");
      }
    }
  }
  return static_cast<int>(std::lround(angular_l1(init, target) / step_deg));
}

namespace {

double spl_term(const EpisodeOutcome& o, int step_deg) {
  if (localization_error(o) != 0.0) return 0.0;
  const double oracle = oracle_path_length(o.initial, o.target, step_deg);
  if (oracle == 0.0) return 1.0;
  return oracle / std::max<double>(o.path_length, oracle);
}

}  // namespace

double spl(std::span<const EpisodeOutcome> outcomes, int step_deg) {
  if (outcomes.empty()) throw Error(ErrorCode::EmptyInput, "spl of no episodes");
  double sum = 0.0;
  for (const auto& o : outcomes) sum += spl_term(o, step_deg);
  return 100.0 * sum / static_cast<double>(outcomes.size());
}

BenchmarkRow aggregate(std::span<const EpisodeOutcome> outcomes, int step_deg) {
  if (outcomes.empty()) throw Error(ErrorCode::EmptyInput, "aggregate of no episodes");
  BenchmarkRow row;
  row.n = static_cast<int>(outcomes.size());
  double eps_sum = 0.0;
  for (const auto& o : outcomes) {
    const double e = localization_error(o);
    eps_sum += e;
    if (o.stop_called) {
      ++row.n_stop;
      if (e == 0.0) ++row.n_perf;
    }
  }
  row.eps = eps_sum / row.n;
  row.omega_stop = 100.0 * row.n_stop / row.n;
  row.omega_perf = row.n_stop == 0 ? 0.0 : 100.0 * row.n_perf / row.n_stop;
  row.spl = spl(outcomes, step_deg);
  return row;
}

std::string csv_row(const std::string& label, const BenchmarkRow& row) {
  std::ostringstream s;
  s << label << std::fixed << std::setprecision(4) << ',' << row.eps << ',' << row.omega_stop << ','
    << row.omega_perf << ',' << row.spl << ',' << row.n << ',' << row.n_stop << ',' << row.n_perf;
  return s.str();
}

void write_table(std::ostream& out, const std::string& title, std::span<const LabeledRow> rows) {
  std::size_t label_w = 6;
  for (const auto& r : rows) label_w = std::max(label_w, r.label.size());
  const std::string rule(label_w + 4 * 10 + 12, '=');
  out << title << '\n' << rule << '\n';
  out << std::left << std::setw(static_cast<int>(label_w)) << "cell" << std::right << std::setw(10) << "eps"
      << std::setw(10) << "w_stop" << std::setw(10) << "w_perf" << std::setw(10) << "spl" << std::setw(12) << "n"
      << '\n'
      << std::string(rule.size(), '-') << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(label_w)) << r.label << std::right << std::fixed
        << std::setprecision(2) << std::setw(10) << r.row.eps << std::setw(10) << r.row.omega_stop << std::setw(10)
        << r.row.omega_perf << std::setw(10) << r.row.spl << std::setw(12) << r.row.n << '\n';
  }
  out << rule << '\n';
}

}  // namespace findview
