// SPDX-License-Identifier: Apache-2.0
//
// Learnable rainbow beamformer: per-element phase shifts and true time
// delays, the received per-subcarrier spectrum and its analytic gradients.
//
// Power quantities (transmit power, noise, |y|^2) are in milliwatts, so the
// log-power features are in dBm.

#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "marble/channel.hpp"
#include "marble/common.hpp"
#include "marble/path_solver.hpp"

namespace marble {

/// Delays are stored as tau_tilde = tau / kTauScale.
inline constexpr double kTauScale = 1e-9;

struct BeamformerParams {
  Eigen::VectorXd phi;        // rad
  Eigen::VectorXd tau_tilde;  // ns

  int size() const { return static_cast<int>(phi.size()); }
  friend bool operator==(const BeamformerParams& a, const BeamformerParams& b) {
    return a.phi.size() == b.phi.size() && a.tau_tilde.size() == b.tau_tilde.size() &&
           a.phi == b.phi && a.tau_tilde == b.tau_tilde;
  }
};

struct PhysicsConfig {
  double p_t_mw = dbm_to_mw(23.0);
  cdouble pilot{1.0, 0.0};
  double epsilon = 1e-12;  // log floor, mW
  double noise_power_mw = 0.0;

  void validate() const;
};

struct Spectrum {
  std::vector<cdouble> y;
  std::vector<double> p_db;
};

/// Closed-form rainbow initialization: the beam points at theta_start on the
/// first subcarrier and theta_end at f0 + W.
BeamformerParams init_rainbow(const ArrayConfig& cfg, const FrequencyGrid& grid,
                              double theta_start, double theta_end);

/// w_m with [w_m]_n = exp(-j(phi_n + 2pi(f_m - f0) tau_n)) / sqrt(N_r), N_r x M.
Eigen::MatrixXcd beam_weights(const BeamformerParams& params, const FrequencyGrid& grid,
                              const ArrayConfig& cfg);

/// conj(w) laid out as M x N_r real/imag planes; shared by every sample
/// processed under one parameter setting.
struct Combiner {
  Eigen::ArrayXXd re, im;
};
Combiner make_combiner(const BeamformerParams& params, const FrequencyGrid& grid,
                       const ArrayConfig& cfg);

/// Per-sample state retained for backward_params: the noiseless
/// per-element contributions c_mn = sqrt(Pt/M) x_m conj(w_mn) h_mn and y.
struct SpectrumCache {
  Eigen::ArrayXXd c_re, c_im;  // M x N_r
  std::vector<cdouble> y;
  double epsilon = 0.0;
  bool valid = false;
};

/// Received spectrum computed path by path (H is never stored beyond one
/// sample's cache). noise may be empty for a noiseless spectrum.
Spectrum received_spectrum(const Combiner& comb, const PathSet& paths, const PhysicsConfig& phys,
                           const FrequencyGrid& grid, const ArrayConfig& cfg,
                           std::span<const cdouble> noise, SpectrumCache* cache = nullptr);

Spectrum received_spectrum(const BeamformerParams& params, const PathSet& paths,
                           const PhysicsConfig& phys, const FrequencyGrid& grid,
                           const ArrayConfig& cfg, std::span<const cdouble> noise,
                           SpectrumCache* cache = nullptr);

/// Noiseless y only (no log), used to cache spectra under a frozen beam.
std::vector<cdouble> noiseless_signal(const Combiner& comb, const PathSet& paths,
                                      const PhysicsConfig& phys, const FrequencyGrid& grid,
                                      const ArrayConfig& cfg);

/// 10log10(|y|^2 + eps) element-wise.
std::vector<double> log_power(std::span<const cdouble> y, double epsilon);

struct BeamformerGrad {
  Eigen::VectorXd d_phi;
  Eigen::VectorXd d_tau_tilde;
};

/// Accumulates dL/dphi and dL/dtau_tilde for one cached sample into `out`
/// (which must be sized N_r).
void backward_params(const SpectrumCache& cache, std::span<const double> d_p_db,
                     const FrequencyGrid& grid, BeamformerGrad& out);

BeamformerGrad backward_params(const SpectrumCache& cache, std::span<const double> d_p_db,
                               const FrequencyGrid& grid);

/// 20log10|w(f)^H a(theta, f)| over angle_grid (elevation 0), dB.
std::vector<double> beam_pattern(const BeamformerParams& params, double f_hz,
                                 std::span<const double> angle_grid, const FrequencyGrid& grid,
                                 const ArrayConfig& cfg);

void write_beamformer(std::ostream& os, const BeamformerParams& params);
BeamformerParams read_beamformer(std::istream& is);

}  // namespace marble
