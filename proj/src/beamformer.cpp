// SPDX-License-Identifier: Apache-2.0

#include "marble/beamformer.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

#include "marble/binary_io.hpp"

namespace marble {

void PhysicsConfig::validate() const {
  if (!(p_t_mw > 0.0)) throw std::invalid_argument("transmit power must be positive");
  if (std::abs(std::abs(pilot) - 1.0) > 1e-12) throw std::invalid_argument("pilot must have unit modulus");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("log floor must be non-negative");
  if (!(noise_power_mw >= 0.0)) throw std::invalid_argument("noise power must be non-negative");
}

BeamformerParams init_rainbow(const ArrayConfig& cfg, const FrequencyGrid& grid,
                              double theta_start, double theta_end) {
  const double W = grid.bandwidth();
  if (!(W > 0.0)) throw std::invalid_argument("rainbow sweep needs a positive bandwidth");
  const double f0 = grid.f0, d = cfg.spacing_m;
  const double t0 =
      d * ((f0 + W) * std::sin(theta_end) - f0 * std::sin(theta_start)) / (kSpeedOfLight * W);
  BeamformerParams p;
  p.phi.resize(cfg.N_r);
  p.tau_tilde.resize(cfg.N_r);
  for (int n = 0; n < cfg.N_r; ++n) {
    p.phi[n] = kTwoPi * f0 * n * d * std::sin(theta_start) / kSpeedOfLight;
    p.tau_tilde[n] = n * t0 / kTauScale;
  }
  return p;
}

Eigen::MatrixXcd beam_weights(const BeamformerParams& params, const FrequencyGrid& grid,
                              const ArrayConfig& cfg) {
  if (params.size() != cfg.N_r) throw std::invalid_argument("beamformer size does not match N_r");
  const double amp = 1.0 / std::sqrt(static_cast<double>(cfg.N_r));
  Eigen::MatrixXcd w(cfg.N_r, grid.M);
  for (int m = 0; m < grid.M; ++m) {
    const double df = grid.freq(m) - grid.f0;
    for (int n = 0; n < cfg.N_r; ++n)
      w(n, m) = std::polar(amp, -(params.phi[n] + kTwoPi * df * params.tau_tilde[n] * kTauScale));
  }
  return w;
}

Combiner make_combiner(const BeamformerParams& params, const FrequencyGrid& grid,
                       const ArrayConfig& cfg) {
  if (params.size() != cfg.N_r) throw std::invalid_argument("beamformer size does not match N_r");
  const double amp = 1.0 / std::sqrt(static_cast<double>(cfg.N_r));
  Combiner c;
  c.re.resize(grid.M, cfg.N_r);
  c.im.resize(grid.M, cfg.N_r);
  for (int n = 0; n < cfg.N_r; ++n) {
    for (int m = 0; m < grid.M; ++m) {
      const double df = grid.freq(m) - grid.f0;
      const double psi = params.phi[n] + kTwoPi * df * params.tau_tilde[n] * kTauScale;
      c.re(m, n) = amp * std::cos(psi);
      c.im(m, n) = amp * std::sin(psi);
    }
  }
  return c;
}

namespace {

// Channel planes (M x N_r) accumulated path by path. The element phasor is
// advanced by one complex multiply per element.
void accumulate_channel(const PathSet& paths, const FrequencyGrid& grid, const ArrayConfig& cfg,
                        Eigen::ArrayXXd& h_re, Eigen::ArrayXXd& h_im) {
  const int M = grid.M, N = cfg.N_r;
  h_re.setZero(M, N);
  h_im.setZero(M, N);
  Eigen::ArrayXd zr(M), zi(M), rr(M), ri(M), tr(M);
  for (const PropagationPath& p : paths.paths) {
    for (int m = 0; m < M; ++m) {
      const double f = grid.freq(m);
      const cdouble z = p.gain * std::polar(1.0, -kTwoPi * f * p.delay);
      const double step = steering_phase(1, f, p.azimuth, p.elevation, cfg);
      zr[m] = z.real();
      zi[m] = z.imag();
      rr[m] = std::cos(step);
      ri[m] = -std::sin(step);
    }
    for (int n = 0; n < N; ++n) {
      h_re.col(n) += zr;
      h_im.col(n) += zi;
      tr = zr * rr - zi * ri;
      zi = zr * ri + zi * rr;
      zr = tr;
    }
  }
}

void contributions(const Combiner& comb, const PathSet& paths, const PhysicsConfig& phys,
                   const FrequencyGrid& grid, const ArrayConfig& cfg, Eigen::ArrayXXd& c_re,
                   Eigen::ArrayXXd& c_im) {
  if (comb.re.rows() != grid.M || comb.re.cols() != cfg.N_r)
    throw std::invalid_argument("combiner shape does not match grid/array");
  Eigen::ArrayXXd h_re, h_im;
  accumulate_channel(paths, grid, cfg, h_re, h_im);
  const cdouble k = std::sqrt(phys.p_t_mw / grid.M) * phys.pilot;
  Eigen::ArrayXXd t_re = comb.re * h_re - comb.im * h_im;
  Eigen::ArrayXXd t_im = comb.re * h_im + comb.im * h_re;
  c_re = k.real() * t_re - k.imag() * t_im;
  c_im = k.real() * t_im + k.imag() * t_re;
}

}  // namespace

std::vector<double> log_power(std::span<const cdouble> y, double epsilon) {
  std::vector<double> out(y.size());
  for (std::size_t m = 0; m < y.size(); ++m) out[m] = 10.0 * std::log10(std::norm(y[m]) + epsilon);
  return out;
}

std::vector<cdouble> noiseless_signal(const Combiner& comb, const PathSet& paths,
                                      const PhysicsConfig& phys, const FrequencyGrid& grid,
                                      const ArrayConfig& cfg) {
  Eigen::ArrayXXd c_re, c_im;
  contributions(comb, paths, phys, grid, cfg, c_re, c_im);
  const Eigen::ArrayXd yr = c_re.rowwise().sum();
  const Eigen::ArrayXd yi = c_im.rowwise().sum();
  std::vector<cdouble> y(static_cast<std::size_t>(grid.M));
  for (int m = 0; m < grid.M; ++m) y[m] = {yr[m], yi[m]};
  return y;
}

Spectrum received_spectrum(const Combiner& comb, const PathSet& paths, const PhysicsConfig& phys,
                           const FrequencyGrid& grid, const ArrayConfig& cfg,
                           std::span<const cdouble> noise, SpectrumCache* cache) {
  if (!noise.empty() && static_cast<int>(noise.size()) != grid.M)
    throw std::invalid_argument("noise vector length must equal M");
  SpectrumCache local;
  SpectrumCache& c = cache ? *cache : local;
  contributions(comb, paths, phys, grid, cfg, c.c_re, c.c_im);
  const Eigen::ArrayXd yr = c.c_re.rowwise().sum();
  const Eigen::ArrayXd yi = c.c_im.rowwise().sum();
  Spectrum s;
  s.y.resize(static_cast<std::size_t>(grid.M));
  for (int m = 0; m < grid.M; ++m) {
    s.y[m] = {yr[m], yi[m]};
    if (!noise.empty()) s.y[m] += noise[m];
  }
  s.p_db = log_power(s.y, phys.epsilon);
  c.y = s.y;
  c.epsilon = phys.epsilon;
  c.valid = true;
  return s;
}

Spectrum received_spectrum(const BeamformerParams& params, const PathSet& paths,
                           const PhysicsConfig& phys, const FrequencyGrid& grid,
                           const ArrayConfig& cfg, std::span<const cdouble> noise,
                           SpectrumCache* cache) {
  return received_spectrum(make_combiner(params, grid, cfg), paths, phys, grid, cfg, noise, cache);
}

void backward_params(const SpectrumCache& cache, std::span<const double> d_p_db,
                     const FrequencyGrid& grid, BeamformerGrad& out) {
  if (!cache.valid) throw std::logic_error("backward_params called without a forward cache");
  const int M = static_cast<int>(cache.c_re.rows());
  const int N = static_cast<int>(cache.c_re.cols());
  if (static_cast<int>(d_p_db.size()) != M) throw std::invalid_argument("gradient length must equal M");
  if (out.d_phi.size() != N || out.d_tau_tilde.size() != N)
    throw std::invalid_argument("gradient accumulator has the wrong size");

  // g_m = dL/dp_m * dp/d|y|^2 * 2; d|y|^2/dphi_n = 2 Re(conj(y) j c_mn)
  //     = 2 (Im y Re c - Re y Im c)
  Eigen::ArrayXd a(M), b(M), df(M);
  const double k = 10.0 / std::log(10.0);
  for (int m = 0; m < M; ++m) {
    const cdouble y = cache.y[m];
    const double g = d_p_db[m] * k / (std::norm(y) + cache.epsilon) * 2.0;
    a[m] = g * y.imag();
    b[m] = -g * y.real();
    df[m] = kTwoPi * (grid.freq(m) - grid.f0) * kTauScale;
  }
  for (int n = 0; n < N; ++n) {
    const Eigen::ArrayXd dphi_m = a * cache.c_re.col(n) + b * cache.c_im.col(n);
    out.d_phi[n] += dphi_m.sum();
    out.d_tau_tilde[n] += (dphi_m * df).sum();
  }
}

BeamformerGrad backward_params(const SpectrumCache& cache, std::span<const double> d_p_db,
                               const FrequencyGrid& grid) {
  BeamformerGrad g;
  g.d_phi = Eigen::VectorXd::Zero(cache.c_re.cols());
  g.d_tau_tilde = Eigen::VectorXd::Zero(cache.c_re.cols());
  backward_params(cache, d_p_db, grid, g);
  return g;
}

std::vector<double> beam_pattern(const BeamformerParams& params, double f_hz,
                                 std::span<const double> angle_grid, const FrequencyGrid& grid,
                                 const ArrayConfig& cfg) {
  if (params.size() != cfg.N_r) throw std::invalid_argument("beamformer size does not match N_r");
  const double amp = 1.0 / std::sqrt(static_cast<double>(cfg.N_r));
  const double df = f_hz - grid.f0;
  std::vector<double> out;
  out.reserve(angle_grid.size());
  for (double theta : angle_grid) {
    cdouble acc = 0.0;
    for (int n = 0; n < cfg.N_r; ++n) {
      const double w_phase = params.phi[n] + kTwoPi * df * params.tau_tilde[n] * kTauScale;
      // conj(w_n) * a_n
      acc += std::polar(amp, w_phase - steering_phase(n, f_hz, theta, 0.0, cfg));
    }
    out.push_back(20.0 * std::log10(std::abs(acc)));
  }
  return out;
}

void write_beamformer(std::ostream& os, const BeamformerParams& params) {
  io::put<std::uint64_t>(os, static_cast<std::uint64_t>(params.size()));
  for (int n = 0; n < params.size(); ++n) io::put<double>(os, params.phi[n]);
  for (int n = 0; n < params.size(); ++n) io::put<double>(os, params.tau_tilde[n]);
}

BeamformerParams read_beamformer(std::istream& is) {
  const auto n = io::get<std::uint64_t>(is, "beamformer size");
  if (n == 0 || n > (1u << 20)) throw std::runtime_error("implausible beamformer size");
  BeamformerParams p;
  p.phi.resize(static_cast<Eigen::Index>(n));
  p.tau_tilde.resize(static_cast<Eigen::Index>(n));
  for (auto& v : p.phi) v = io::get<double>(is, "beamformer phase");
  for (auto& v : p.tau_tilde) v = io::get<double>(is, "beamformer delay");
  return p;
}

}  // namespace marble
