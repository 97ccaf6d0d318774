// SPDX-License-Identifier: Apache-2.0
//
// Frequency-domain channel over an OFDM grid and per-sample receiver noise.

#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "marble/common.hpp"
#include "marble/path_solver.hpp"

namespace marble {

struct FrequencyGrid {
  double f0 = kCarrierHz;  // first subcarrier, Hz
  double delta_f = 240e3;  // Hz
  int M = 1584;

  double freq(int m) const { return f0 + static_cast<double>(m) * delta_f; }
  double bandwidth() const { return static_cast<double>(M) * delta_f; }
  void validate() const;
};

/// Uniform linear array along +y at the BS height.
struct ArrayConfig {
  int N_r = 128;
  double spacing_m = kSpeedOfLight / kCarrierHz / 2.0;

  static ArrayConfig half_wave(int n, double f0_hz) { return {n, kSpeedOfLight / f0_hz / 2.0}; }
  void validate() const;
};

/// Element n's phase for a plane wave from (azimuth, elevation); the
/// element response is exp(-j * phase).
inline double steering_phase(int n, double f_hz, double azimuth, double elevation,
                             const ArrayConfig& cfg) {
  const double u = std::sin(azimuth) * std::cos(elevation);
  return kTwoPi * f_hz * static_cast<double>(n) * cfg.spacing_m * u / kSpeedOfLight;
}

using ChannelMatrix = Eigen::MatrixXcd;  // N_r x M, column m is h_m

/// [H]_{n,m} = sum_l g_l exp(-j2pi f_m tau_l) exp(-j steering_phase(n, f_m, dir_l)).
ChannelMatrix synthesize_channel(const PathSet& paths, const FrequencyGrid& grid,
                                 const ArrayConfig& cfg);

/// Circularly-symmetric complex Gaussian, E|eta|^2 = noise_power, deterministic
/// in (sample_seed, epoch).
std::vector<cdouble> noise_vector(std::uint64_t sample_seed, std::uint64_t epoch,
                                  double noise_power, int M);

/// Thermal noise per subcarrier in mW: -174 dBm/Hz + 10log10(delta_f) + NF.
double thermal_noise_mw(double delta_f_hz, double noise_figure_db = 7.0);

}  // namespace marble
