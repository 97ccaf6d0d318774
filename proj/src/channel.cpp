// SPDX-License-Identifier: Apache-2.0

#include "marble/channel.hpp"

#include <stdexcept>

namespace marble {

void FrequencyGrid::validate() const {
  if (M < 1) throw std::invalid_argument("frequency grid needs M >= 1");
  if (!(delta_f > 0.0)) throw std::invalid_argument("subcarrier spacing must be positive");
  if (!(f0 > 0.0)) throw std::invalid_argument("start frequency must be positive");
}

void ArrayConfig::validate() const {
  if (N_r < 1) throw std::invalid_argument("array needs N_r >= 1");
  if (!(spacing_m > 0.0)) throw std::invalid_argument("element spacing must be positive");
}

ChannelMatrix synthesize_channel(const PathSet& paths, const FrequencyGrid& grid,
                                 const ArrayConfig& cfg) {
  ChannelMatrix h = ChannelMatrix::Zero(cfg.N_r, grid.M);
  for (const PropagationPath& p : paths.paths) {
    for (int m = 0; m < grid.M; ++m) {
      const double f = grid.freq(m);
      const cdouble delay_term = p.gain * std::polar(1.0, -kTwoPi * f * p.delay);
      for (int n = 0; n < cfg.N_r; ++n)
        h(n, m) += delay_term * std::polar(1.0, -steering_phase(n, f, p.azimuth, p.elevation, cfg));
    }
  }
  return h;
}

std::vector<cdouble> noise_vector(std::uint64_t sample_seed, std::uint64_t epoch,
                                  double noise_power, int M) {
  if (!(noise_power >= 0.0)) throw std::invalid_argument("noise power must be non-negative");
  std::vector<cdouble> out(static_cast<std::size_t>(M));
  if (noise_power == 0.0) return out;
  Rng rng(stream_key(sample_seed, epoch, /*domain=*/2));
  const double sigma = std::sqrt(noise_power / 2.0);
  for (auto& v : out) {
    const double re = rng.normal();
    const double im = rng.normal();
    v = {sigma * re, sigma * im};
  }
  return out;
}

double thermal_noise_mw(double delta_f_hz, double noise_figure_db) {
  return dbm_to_mw(-174.0 + 10.0 * std::log10(delta_f_hz) + noise_figure_db);
}

}  // namespace marble
