// SPDX-License-Identifier: Apache-2.0

#include "marble/models.hpp"

#include <stdexcept>
#include <string>

namespace marble {

using nn::Activation;
using nn::LayerSpec;

ModelKind parse_model_kind(std::string_view name) {
  if (name == "marble") return ModelKind::marble;
  if (name == "rainet") return ModelKind::rainet;
  throw std::invalid_argument("unknown model '" + std::string(name) + "'");
}

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::marble ? "marble" : "rainet";
}

SystemConfig make_system(const PhysicsSnapshot& snap, std::optional<double> p_t_dbm) {
  SystemConfig s;
  s.grid = snap.grid;
  s.array = snap.array;
  s.p_t_dbm = p_t_dbm.value_or(snap.p_t_dbm);
  s.phys.p_t_mw = dbm_to_mw(s.p_t_dbm);
  s.phys.epsilon = snap.epsilon;
  s.phys.noise_power_mw = thermal_noise_mw(snap.grid.delta_f, snap.noise_figure_db);
  s.grid.validate();
  s.array.validate();
  s.phys.validate();
  return s;
}

std::vector<LayerSpec> marble_layers(int num_subcarriers) {
  std::vector<LayerSpec> specs;
  const int channels[] = {1, 16, 32, 64, 128, 128};
  int length = num_subcarriers;
  for (int i = 0; i < 5; ++i) {
    specs.push_back(LayerSpec::conv(channels[i], channels[i + 1], 5, 2, 2));
    specs.push_back(LayerSpec::act(Activation::relu));
    length = nn::conv_output_length(length, 5, 2, 2);
  }
  int in = channels[5] * length;
  for (int hidden : {512, 256, 128}) {
    specs.push_back(LayerSpec::dense(in, hidden));
    specs.push_back(LayerSpec::act(Activation::relu));
    in = hidden;
  }
  specs.push_back(LayerSpec::dense(in, 2));
  specs.push_back(LayerSpec::act(Activation::tanh));
  return specs;
}

std::vector<LayerSpec> rainet_layers(int num_subcarriers) {
  std::vector<LayerSpec> specs;
  const int channels[] = {1, 8, 16, 32};
  int length = num_subcarriers;
  for (int i = 0; i < 3; ++i) {
    specs.push_back(LayerSpec::conv(channels[i], channels[i + 1], 7, 4, 3));
    specs.push_back(LayerSpec::act(Activation::tanh));
    length = nn::conv_output_length(length, 7, 4, 3);
  }
  int in = channels[3] * length;
  for (int hidden : {256, 128}) {
    specs.push_back(LayerSpec::dense(in, hidden));
    specs.push_back(LayerSpec::act(Activation::tanh));
    in = hidden;
  }
  specs.push_back(LayerSpec::dense(in, 2));
  specs.push_back(LayerSpec::act(Activation::tanh));
  return specs;
}

BeamformerParams initial_beam(const SystemConfig& sys) {
  return init_rainbow(sys.array, sys.grid, deg2rad(kSweepStartDeg), deg2rad(kSweepEndDeg));
}

LocalizationModel build_model(ModelKind kind, const SystemConfig& sys, std::uint64_t seed) {
  LocalizationModel m;
  m.kind = kind;
  const auto specs = kind == ModelKind::marble ? marble_layers(sys.grid.M) : rainet_layers(sys.grid.M);
  nn::infer_shapes(specs, {1, sys.grid.M});
  m.net = nn::init_network(specs, seed);
  m.beam = initial_beam(sys);
  return m;
}

std::vector<double> record_spectrum(const BeamformerParams& beam, const SampleRecord& rec,
                                    const SystemConfig& sys, std::uint64_t noise_epoch,
                                    SpectrumCache* cache) {
  const auto noise = noise_vector(rec.noise_seed, noise_epoch, sys.phys.noise_power_mw, sys.grid.M);
  return received_spectrum(beam, rec.paths, sys.phys, sys.grid, sys.array, noise, cache).p_db;
}

void fit_normalization(LocalizationModel& model, std::span<const SampleRecord> train,
                       const SystemConfig& sys) {
  if (train.empty()) throw std::invalid_argument("cannot fit normalization on an empty set");
  const Combiner comb = make_combiner(model.beam, sys.grid, sys.array);
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  for (const SampleRecord& r : train) {
    const auto noise = noise_vector(r.noise_seed, kEvalNoiseEpoch, sys.phys.noise_power_mw, sys.grid.M);
    const Spectrum s = received_spectrum(comb, r.paths, sys.phys, sys.grid, sys.array, noise);
    for (double v : s.p_db) {
      sum += v;
      sum_sq += v * v;
    }
    n += s.p_db.size();
  }
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(sum_sq / static_cast<double>(n) - mean * mean, 0.0);
  model.feature_mean = mean;
  model.feature_std = var > 0.0 ? std::sqrt(var) : 1.0;
}

std::array<double, 2> predict_from_spectrum(const LocalizationModel& model,
                                            std::span<const double> p_db) {
  nn::Tensor x;
  x.channels = 1;
  x.length = static_cast<int>(p_db.size());
  x.batch = 1;
  x.data.resize(1, x.length);
  const double inv = 1.0 / model.feature_std;
  for (int m = 0; m < x.length; ++m) x.data(0, m) = (p_db[m] - model.feature_mean) * inv;
  const nn::Tensor out = nn::forward(model.net, x);
  return {out.data(0, 0) * model.d_max, out.data(1, 0) * model.d_max};
}

std::array<double, 2> predict(const LocalizationModel& model, const SampleRecord& rec,
                              const SystemConfig& sys) {
  const auto p_db = record_spectrum(model.beam, rec, sys, kEvalNoiseEpoch);
  return predict_from_spectrum(model, p_db);
}

}  // namespace marble
