// SPDX-License-Identifier: Apache-2.0
//
// MARBLE-Net (learnable rainbow beamformer + 1-D CNN regressor) and the
// RaiNet baseline, sharing one model container.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "marble/beamformer.hpp"
#include "marble/dataset.hpp"
#include "marble/nn.hpp"

namespace marble {

enum class ModelKind : std::uint8_t { marble = 0, rainet = 1 };

ModelKind parse_model_kind(std::string_view name);
std::string_view to_string(ModelKind kind);

/// Grid, array and power settings used to turn records into spectra.
struct SystemConfig {
  FrequencyGrid grid;
  ArrayConfig array;
  PhysicsConfig phys;
  double p_t_dbm = 23.0;
};

SystemConfig make_system(const PhysicsSnapshot& snap, std::optional<double> p_t_dbm = std::nullopt);

inline constexpr double kMaxDistance = 200.0;  // m, output scale
inline constexpr double kSweepStartDeg = -60.0;
inline constexpr double kSweepEndDeg = 60.0;

std::vector<nn::LayerSpec> marble_layers(int num_subcarriers);
std::vector<nn::LayerSpec> rainet_layers(int num_subcarriers);

struct LocalizationModel {
  ModelKind kind = ModelKind::marble;
  nn::Network net;
  BeamformerParams beam;
  double feature_mean = 0.0;
  double feature_std = 1.0;
  double d_max = kMaxDistance;

  friend bool operator==(const LocalizationModel&, const LocalizationModel&) = default;
};

/// Network initialized from `seed`; beam initialized to the default
/// -60..+60 degree rainbow sweep.
LocalizationModel build_model(ModelKind kind, const SystemConfig& sys, std::uint64_t seed);

/// The fixed rainbow used at initialization (and by the k-NN codebook).
BeamformerParams initial_beam(const SystemConfig& sys);

/// Noise realization index: 0 is reserved for evaluation.
inline constexpr std::uint64_t kEvalNoiseEpoch = 0;

/// Log-power spectrum of one record under `beam`, with the noise draw for
/// noise_epoch.
std::vector<double> record_spectrum(const BeamformerParams& beam, const SampleRecord& rec,
                                    const SystemConfig& sys, std::uint64_t noise_epoch,
                                    SpectrumCache* cache = nullptr);

/// Global mean/std of the training spectra under the model's beam with
/// evaluation noise.
void fit_normalization(LocalizationModel& model, std::span<const SampleRecord> train,
                       const SystemConfig& sys);

/// Position estimate (x, y) in metres from a log-power spectrum.
std::array<double, 2> predict_from_spectrum(const LocalizationModel& model,
                                            std::span<const double> p_db);

/// Full pipeline: spectrum under the model's beam with evaluation noise,
/// then the regressor.
std::array<double, 2> predict(const LocalizationModel& model, const SampleRecord& rec,
                              const SystemConfig& sys);

}  // namespace marble
