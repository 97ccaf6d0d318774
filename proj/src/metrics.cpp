// SPDX-License-Identifier: Apache-2.0

#include "marble/metrics.hpp"

#include "marble/common.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace marble {

double wrap_degrees(double d) {
  d = std::fmod(d, 360.0);
  if (d <= -180.0) d += 360.0;
  if (d > 180.0) d -= 360.0;
  return d;
}

SampleError sample_error(const Point2& pred, const Point2& truth) {
  SampleError e;
  e.loc_m = std::hypot(pred[0] - truth[0], pred[1] - truth[1]);
  e.range_m = std::abs(std::hypot(pred[0], pred[1]) - std::hypot(truth[0], truth[1]));
  const double az_pred = std::atan2(pred[1], pred[0]) * 180.0 / kPi;
  const double az_true = std::atan2(truth[1], truth[0]) * 180.0 / kPi;
  e.angle_deg = wrap_degrees(az_pred - az_true);
  return e;
}

double rmse(std::span<const double> errors) {
  if (errors.empty()) throw std::invalid_argument("rmse of an empty list");
  double s = 0.0;
  for (double e : errors) s += e * e;
  return std::sqrt(s / static_cast<double>(errors.size()));
}

MetricsReport evaluate(std::span<const Point2> predictions, std::span<const Point2> truths) {
  if (predictions.empty()) throw std::invalid_argument("evaluate: empty test split");
  if (predictions.size() != truths.size()) throw std::invalid_argument("evaluate: length mismatch");
  MetricsReport r;
  r.errors.reserve(predictions.size());
  std::vector<double> loc, ang, rng;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const SampleError e = sample_error(predictions[i], truths[i]);
    r.errors.push_back(e);
    loc.push_back(e.loc_m);
    ang.push_back(e.angle_deg);
    rng.push_back(e.range_m);
  }
  r.loc_rmse_m = rmse(loc);
  r.angle_rmse_deg = rmse(ang);
  r.range_rmse_m = rmse(rng);
  return r;
}

std::vector<CdfPoint> error_cdf(std::span<const double> errors) {
  if (errors.empty()) throw std::invalid_argument("error_cdf: empty input");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<CdfPoint> out;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    out.push_back({sorted[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

std::vector<GridCell> spatial_error_grid(std::span<const Point2> positions,
                                         std::span<const double> errors, double cell_m) {
  if (!(cell_m > 0.0)) throw std::invalid_argument("cell size must be positive");
  if (positions.size() != errors.size()) throw std::invalid_argument("spatial grid: length mismatch");
  std::map<std::pair<long long, long long>, std::pair<double, std::size_t>> cells;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto ix = static_cast<long long>(std::floor(positions[i][0] / cell_m));
    const auto iy = static_cast<long long>(std::floor(positions[i][1] / cell_m));
    auto& c = cells[{ix, iy}];
    c.first += errors[i];
    c.second += 1;
  }
  std::vector<GridCell> out;
  out.reserve(cells.size());
  for (const auto& [key, acc] : cells)
    out.push_back({(static_cast<double>(key.first) + 0.5) * cell_m,
                   (static_cast<double>(key.second) + 0.5) * cell_m,
                   acc.first / static_cast<double>(acc.second), acc.second});
  return out;
}

LatencyStats bench_latency(const std::function<Point2(std::size_t)>& predict, std::size_t n,
                           std::size_t warmup) {
  if (n <= warmup) throw std::invalid_argument("bench_latency: split size must exceed warmup count");
  using clock = std::chrono::steady_clock;
  std::vector<double> ms;
  ms.reserve(n - warmup);
  for (std::size_t i = 0; i < n; ++i) {
    const auto t0 = clock::now();
    const Point2 p = predict(i);
    const auto t1 = clock::now();
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]))
      throw std::runtime_error("bench_latency: non-finite prediction for sample " + std::to_string(i));
    if (i >= warmup) ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  LatencyStats s;
  s.measured = ms.size();
  double sum = 0.0;
  for (double v : ms) sum += v;
  s.mean_ms = sum / static_cast<double>(ms.size());
  std::sort(ms.begin(), ms.end());
  auto rank = [&ms](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(ms.size())));
    return ms[std::min(ms.size() - 1, k == 0 ? 0 : k - 1)];
  };
  s.p50_ms = rank(0.50);
  s.p99_ms = rank(0.99);
  return s;
}

namespace {

std::vector<std::vector<double>> read_numeric_csv(std::istream& is, const std::string& header) {
  std::string line;
  if (!std::getline(is, line) || line != header)
    throw std::runtime_error("CSV header mismatch, expected '" + header + "'");
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void write_metrics_csv(std::ostream& os, std::span<const MetricsRow> rows) {
  os << "method,scene,power_dbm,loc_rmse_m,angle_rmse_deg,range_rmse_m\n" << std::setprecision(17);
  for (const auto& r : rows)
    os << r.method << ',' << r.scene << ',' << r.power_dbm << ',' << r.loc_rmse_m << ','
       << r.angle_rmse_deg << ',' << r.range_rmse_m << '\n';
}

void write_cdf_csv(std::ostream& os, std::span<const CdfPoint> cdf) {
  os << "error_m,fraction\n" << std::setprecision(17);
  for (const auto& p : cdf) os << p.error << ',' << p.fraction << '\n';
}

std::vector<CdfPoint> read_cdf_csv(std::istream& is) {
  std::vector<CdfPoint> out;
  for (const auto& row : read_numeric_csv(is, "error_m,fraction")) {
    if (row.size() != 2) throw std::runtime_error("cdf CSV: expected 2 columns");
    out.push_back({row[0], row[1]});
  }
  return out;
}

void write_grid_csv(std::ostream& os, std::span<const GridCell> cells) {
  os << "x_m,y_m,mean_err_m,count\n" << std::setprecision(17);
  for (const auto& c : cells) os << c.x << ',' << c.y << ',' << c.mean_error << ',' << c.count << '\n';
}

std::vector<GridCell> read_grid_csv(std::istream& is) {
  std::vector<GridCell> out;
  for (const auto& row : read_numeric_csv(is, "x_m,y_m,mean_err_m,count")) {
    if (row.size() != 4) throw std::runtime_error("grid CSV: expected 4 columns");
    out.push_back({row[0], row[1], row[2], static_cast<std::size_t>(row[3])});
  }
  return out;
}

void write_bench_csv(std::ostream& os, std::span<const BenchRow> rows) {
  os << "method,mean_ms,p50_ms,p99_ms\n" << std::setprecision(17);
  for (const auto& r : rows)
    os << r.method << ',' << r.stats.mean_ms << ',' << r.stats.p50_ms << ',' << r.stats.p99_ms << '\n';
}

}  // namespace marble
