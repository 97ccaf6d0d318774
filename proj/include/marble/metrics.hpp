// SPDX-License-Identifier: Apache-2.0
//
// Localization metrics and their CSV exports.

#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace marble {

using Point2 = std::array<double, 2>;

struct SampleError {
  double loc_m = 0.0;
  double angle_deg = 0.0;  // signed, wrapped to (-180, 180]
  double range_m = 0.0;    // |range_pred - range_true|
};

struct MetricsReport {
  double loc_rmse_m = 0.0;
  double angle_rmse_deg = 0.0;
  double range_rmse_m = 0.0;
  std::vector<SampleError> errors;
};

/// Wraps an angle difference in degrees into (-180, 180].
double wrap_degrees(double d);

SampleError sample_error(const Point2& pred, const Point2& truth);

double rmse(std::span<const double> errors);

/// Throws std::invalid_argument for empty input or mismatched lengths.
MetricsReport evaluate(std::span<const Point2> predictions, std::span<const Point2> truths);

struct CdfPoint {
  double error = 0.0;
  double fraction = 0.0;
};

/// Empirical CDF with one row per distinct error value.
std::vector<CdfPoint> error_cdf(std::span<const double> errors);

struct GridCell {
  double x = 0.0, y = 0.0;  // cell centre
  double mean_error = 0.0;
  std::size_t count = 0;
};

/// Mean error per occupied cell on the lattice of cell_m squares; rows are
/// ordered by (x, y).
std::vector<GridCell> spatial_error_grid(std::span<const Point2> positions,
                                         std::span<const double> errors, double cell_m = 5.0);

struct LatencyStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p99_ms = 0.0;
  std::size_t measured = 0;
};

/// Times predict(i) for i in [0, n), serially; the first warmup calls are
/// discarded. Throws if any prediction is non-finite or n <= warmup.
LatencyStats bench_latency(const std::function<Point2(std::size_t)>& predict, std::size_t n,
                           std::size_t warmup);

struct MetricsRow {
  std::string method;
  std::string scene;
  double power_dbm = 0.0;
  double loc_rmse_m = 0.0;
  double angle_rmse_deg = 0.0;
  double range_rmse_m = 0.0;
};

struct BenchRow {
  std::string method;
  LatencyStats stats;
};

void write_metrics_csv(std::ostream& os, std::span<const MetricsRow> rows);
void write_cdf_csv(std::ostream& os, std::span<const CdfPoint> cdf);
std::vector<CdfPoint> read_cdf_csv(std::istream& is);
void write_grid_csv(std::ostream& os, std::span<const GridCell> cells);
std::vector<GridCell> read_grid_csv(std::istream& is);
void write_bench_csv(std::ostream& os, std::span<const BenchRow> rows);

}  // namespace marble
